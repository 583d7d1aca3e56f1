#include "ghostcde/rfcde.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>

#include <nlohmann/json.hpp>

#include "ghostcde/parallel.hpp"
#include "ghostcde/rng.hpp"

namespace ghostcde::rfcde {

namespace {

// Gaussian tails beyond this many bandwidths contribute < 1e-31 and are skipped.
constexpr double kKernelCutoff = 12.0;
constexpr char kMagic[8] = {'G', 'C', 'D', 'E', 'F', 'R', 'S', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

} // namespace

Matrix Matrix::select_rows(std::span<const std::size_t> idx) const
{
  Matrix out(idx.size(), cols_);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(idx[i] * cols_), cols_,
                out.data_.begin() + static_cast<std::ptrdiff_t>(i * cols_));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tree

std::size_t Tree::leaf_index(std::span<const double> x) const
{
  std::size_t at = 0;
  while (!nodes[at].is_leaf()) {
    const auto& n = nodes[at];
    at = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                                       : n.right);
  }
  return at;
}

std::span<const std::uint32_t> Tree::leaf_for(std::span<const double> x) const
{
  const auto& n = nodes[leaf_index(x)];
  return {leaf_rows.data() + n.leaf_begin, n.leaf_end - n.leaf_begin};
}

std::size_t Tree::depth() const
{
  std::size_t best = 0;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [at, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    if (!nodes[at].is_leaf()) {
      stack.emplace_back(static_cast<std::size_t>(nodes[at].left), d + 1);
      stack.emplace_back(static_cast<std::size_t>(nodes[at].right), d + 1);
    }
  }
  return best;
}

std::size_t Tree::n_leaves() const
{
  return static_cast<std::size_t>(
    std::count_if(nodes.begin(), nodes.end(), [](const Node& n) { return n.is_leaf(); }));
}

double WeightVector::sum() const
{
  return std::accumulate(w.begin(), w.end(), 0.0);
}

// ---------------------------------------------------------------------------
// Grid

Grid Grid::line(std::vector<double> points)
{
  Grid g;
  g.axes.push_back(std::move(points));
  g.validate();
  return g;
}

Grid Grid::lattice(std::vector<double> xs, std::vector<double> ys)
{
  Grid g;
  g.axes.push_back(std::move(xs));
  g.axes.push_back(std::move(ys));
  g.validate();
  return g;
}

Grid Grid::uniform(double lo, double hi, std::size_t n)
{
  if (n < 2 || !(hi > lo)) {
    throw std::invalid_argument("Grid::uniform needs n >= 2 and hi > lo");
  }
  std::vector<double> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    pts[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return line(std::move(pts));
}

std::size_t Grid::size() const
{
  if (axes.empty()) {
    return 0;
  }
  std::size_t n = 1;
  for (const auto& a : axes) {
    n *= a.size();
  }
  return n;
}

std::array<double, 2> Grid::point(std::size_t i) const
{
  if (axes.size() == 1) {
    return {axes[0][i], 0.0};
  }
  const std::size_t n1 = axes[1].size();
  return {axes[0][i / n1], axes[1][i % n1]};
}

void Grid::validate() const
{
  if (axes.empty() || axes.size() > 2) {
    throw std::invalid_argument("grid must have one or two axes");
  }
  for (const auto& a : axes) {
    if (a.empty()) {
      throw std::invalid_argument("grid axis is empty");
    }
    for (std::size_t i = 1; i < a.size(); ++i) {
      if (!(a[i] > a[i - 1])) {
        throw std::invalid_argument("grid axis must be strictly increasing");
      }
    }
  }
}

void DensityGrid::normalize()
{
  const double total = std::accumulate(values.begin(), values.end(), 0.0);
  if (!(total > 0.0)) {
    throw std::runtime_error("no_support");
  }
  for (auto& v : values) {
    v /= total;
  }
  normalized = true;
}

// ---------------------------------------------------------------------------
// Training

namespace {

void validate_config(const ForestConfig& c, std::size_t p)
{
  if (c.n_trees == 0) {
    throw std::invalid_argument("n_trees must be positive");
  }
  if (c.min_leaf_size == 0) {
    throw std::invalid_argument("min_leaf_size must be positive");
  }
  if (c.n_basis == 0) {
    throw std::invalid_argument("n_basis must be positive");
  }
  if (c.features_per_split > p) {
    throw std::invalid_argument("features_per_split exceeds the number of features");
  }
}

std::size_t split_candidates(const ForestConfig& c, std::size_t p)
{
  if (c.features_per_split > 0) {
    return c.features_per_split;
  }
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(p)))));
}

// Orthonormal cosine basis on [0, 1] without the constant term; 2D responses
// use the tensor product (again dropping the constant).
std::vector<double> basis_matrix(const Matrix& Y, const std::vector<double>& lo,
                                 const std::vector<double>& hi, std::size_t n_basis,
                                 std::size_t& width)
{
  const std::size_t n = Y.rows();
  const std::size_t d = Y.cols();
  auto cosines = [&](double z, std::vector<double>& out) {
    out.resize(n_basis);
    out[0] = 1.0;
    for (std::size_t j = 1; j < n_basis; ++j) {
      out[j] = std::numbers::sqrt2 * std::cos(std::numbers::pi * static_cast<double>(j) * z);
    }
  };
  auto rescale = [&](std::size_t i, std::size_t k) {
    const double span = hi[k] - lo[k];
    return span > 0.0 ? (Y(i, k) - lo[k]) / span : 0.5;
  };
  width = d == 1 ? n_basis - 1 : n_basis * n_basis - 1;
  std::vector<double> basis(n * width);
  std::vector<double> c0;
  std::vector<double> c1;
  for (std::size_t i = 0; i < n; ++i) {
    double* row = basis.data() + i * width;
    cosines(rescale(i, 0), c0);
    if (d == 1) {
      std::copy(c0.begin() + 1, c0.end(), row);
      continue;
    }
    cosines(rescale(i, 1), c1);
    std::size_t at = 0;
    for (std::size_t j = 0; j < n_basis; ++j) {
      for (std::size_t k = 0; k < n_basis; ++k) {
        if (j == 0 && k == 0) {
          continue;
        }
        row[at++] = c0[j] * c1[k];
      }
    }
  }
  return basis;
}

class TreeBuilder
{
public:
  TreeBuilder(const Matrix& X, const std::vector<double>& basis, std::size_t width,
              const ForestConfig& config, std::size_t mtry, std::uint64_t seed)
    : X_(X)
    , basis_(basis)
    , width_(width)
    , config_(config)
    , mtry_(mtry)
    , rng_(seed)
  {}

  Tree build()
  {
    const std::size_t n = X_.rows();
    std::vector<std::uint32_t> idx(n);
    if (config_.bootstrap) {
      for (auto& i : idx) {
        i = static_cast<std::uint32_t>(rng_.index(n));
      }
    } else {
      std::iota(idx.begin(), idx.end(), 0u);
    }

    struct Work
    {
      std::size_t node;
      std::size_t begin;
      std::size_t end;
      std::size_t depth;
    };
    tree_.nodes.emplace_back();
    std::vector<Work> stack{{0, 0, n, 0}};
    std::vector<double> total(width_);
    while (!stack.empty()) {
      Work w = stack.back();
      stack.pop_back();
      const std::size_t m = w.end - w.begin;
      bool split = false;
      if (m >= 2 * config_.min_leaf_size && (!config_.max_depth || w.depth < *config_.max_depth)) {
        std::fill(total.begin(), total.end(), 0.0);
        for (std::size_t k = w.begin; k < w.end; ++k) {
          const double* b = row(idx[k]);
          for (std::size_t j = 0; j < width_; ++j) {
            total[j] += b[j];
          }
        }
        if (auto best = best_split(idx, w.begin, w.end, total)) {
          const auto f = best->feature;
          const double thr = best->threshold;
          auto mid = std::stable_partition(
            idx.begin() + static_cast<std::ptrdiff_t>(w.begin),
            idx.begin() + static_cast<std::ptrdiff_t>(w.end),
            [&](std::uint32_t r) { return X_(r, f) <= thr; });
          const auto cut = static_cast<std::size_t>(mid - idx.begin());
          const auto left = tree_.nodes.size();
          tree_.nodes.emplace_back();
          tree_.nodes.emplace_back();
          auto& node = tree_.nodes[w.node];
          node.feature = static_cast<std::int32_t>(f);
          node.threshold = thr;
          node.left = static_cast<std::int32_t>(left);
          node.right = static_cast<std::int32_t>(left + 1);
          stack.push_back({left + 1, cut, w.end, w.depth + 1});
          stack.push_back({left, w.begin, cut, w.depth + 1});
          split = true;
        }
      }
      if (!split) {
        make_leaf(idx, w.node, w.begin, w.end);
      }
    }
    return std::move(tree_);
  }

private:
  struct Split
  {
    std::size_t feature;
    double threshold;
  };

  const double* row(std::uint32_t r) const { return basis_.data() + static_cast<std::size_t>(r) * width_; }

  static double sq(const std::vector<double>& v)
  {
    double s = 0.0;
    for (double x : v) {
      s += x * x;
    }
    return s;
  }

  std::optional<Split> best_split(const std::vector<std::uint32_t>& idx, std::size_t begin,
                                  std::size_t end, const std::vector<double>& total)
  {
    const std::size_t m = end - begin;
    const std::size_t p = X_.cols();
    // partial Fisher-Yates draw of mtry candidate features
    features_.resize(p);
    std::iota(features_.begin(), features_.end(), std::size_t{0});
    for (std::size_t i = 0; i < mtry_; ++i) {
      const std::size_t j = i + rng_.index(p - i);
      std::swap(features_[i], features_[j]);
    }

    const double parent = sq(total) / static_cast<double>(m);
    double best_score = parent;
    std::optional<Split> best;
    std::vector<double> left(width_);
    std::vector<double> right(width_);
    for (std::size_t fi = 0; fi < mtry_; ++fi) {
      const std::size_t f = features_[fi];
      sorted_.clear();
      for (std::size_t k = begin; k < end; ++k) {
        sorted_.emplace_back(X_(idx[k], f), idx[k]);
      }
      std::sort(sorted_.begin(), sorted_.end());
      if (sorted_.front().first == sorted_.back().first) {
        continue;
      }
      std::fill(left.begin(), left.end(), 0.0);
      const std::size_t min_leaf = config_.min_leaf_size;
      for (std::size_t k = 0; k + 1 < m; ++k) {
        const double* b = row(sorted_[k].second);
        for (std::size_t j = 0; j < width_; ++j) {
          left[j] += b[j];
        }
        const std::size_t n_left = k + 1;
        const std::size_t n_right = m - n_left;
        if (n_right < min_leaf) {
          break;
        }
        if (n_left < min_leaf || sorted_[k].first == sorted_[k + 1].first) {
          continue;
        }
        double l2 = 0.0;
        double r2 = 0.0;
        for (std::size_t j = 0; j < width_; ++j) {
          const double r = total[j] - left[j];
          l2 += left[j] * left[j];
          r2 += r * r;
        }
        const double score = l2 / static_cast<double>(n_left) + r2 / static_cast<double>(n_right);
        if (score > best_score) {
          const double lo = sorted_[k].first;
          const double hi = sorted_[k + 1].first;
          double thr = lo + (hi - lo) / 2.0;
          if (!(thr < hi)) {
            thr = lo;
          }
          best_score = score;
          best = Split{f, thr};
        }
      }
    }
    // ties with the parent (no information gain) do not split
    if (best && !(best_score > parent * (1.0 + 1e-12) + 1e-300)) {
      best.reset();
    }
    return best;
  }

  void make_leaf(const std::vector<std::uint32_t>& idx, std::size_t node, std::size_t begin,
                 std::size_t end)
  {
    std::vector<std::uint32_t> rows(idx.begin() + static_cast<std::ptrdiff_t>(begin),
                                    idx.begin() + static_cast<std::ptrdiff_t>(end));
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    auto& n = tree_.nodes[node];
    n.leaf_begin = static_cast<std::uint32_t>(tree_.leaf_rows.size());
    tree_.leaf_rows.insert(tree_.leaf_rows.end(), rows.begin(), rows.end());
    n.leaf_end = static_cast<std::uint32_t>(tree_.leaf_rows.size());
  }

  const Matrix& X_;
  const std::vector<double>& basis_;
  std::size_t width_;
  const ForestConfig& config_;
  std::size_t mtry_;
  Rng rng_;
  Tree tree_;
  std::vector<std::size_t> features_;
  std::vector<std::pair<double, std::uint32_t>> sorted_;
};

} // namespace

Forest train(const Matrix& X, const Matrix& Y, const ForestConfig& config)
{
  if (X.rows() != Y.rows()) {
    throw std::invalid_argument("train: X and Y row counts differ");
  }
  if (Y.cols() != 1 && Y.cols() != 2) {
    throw std::invalid_argument("train: responses must be 1D or 2D");
  }
  if (X.cols() == 0) {
    throw std::invalid_argument("train: no features");
  }
  validate_config(config, X.cols());
  if (X.rows() < 2 * config.min_leaf_size) {
    throw std::invalid_argument("train: need at least 2 * min_leaf_size rows");
  }
  for (double v : X.data()) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("train: non-finite feature value");
    }
  }
  for (double v : Y.data()) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("train: non-finite response value");
    }
  }

  Forest forest;
  forest.config_ = config;
  forest.n_features_ = X.cols();
  forest.responses_ = Y;
  forest.finalize();

  std::size_t width = 0;
  const auto basis = basis_matrix(Y, forest.lo_, forest.hi_, config.n_basis, width);
  const std::size_t mtry = split_candidates(config, X.cols());
  forest.trees_.resize(config.n_trees);
  if (width == 0) {
    // a single basis function carries no split information
    ForestConfig leaf_only = config;
    leaf_only.max_depth = 0;
    parallel_for(config.n_trees, config.workers, [&](std::size_t t) {
      TreeBuilder b(X, basis, width, leaf_only, mtry, derive_seed(config.seed, {t}));
      forest.trees_[t] = b.build();
    });
    return forest;
  }
  parallel_for(config.n_trees, config.workers, [&](std::size_t t) {
    TreeBuilder b(X, basis, width, config, mtry, derive_seed(config.seed, {t}));
    forest.trees_[t] = b.build();
  });
  return forest;
}

Forest Forest::from_parts(ForestConfig config, std::size_t n_features, Matrix responses,
                          std::vector<Tree> trees)
{
  if (trees.empty()) {
    throw std::invalid_argument("forest needs at least one tree");
  }
  if (responses.cols() != 1 && responses.cols() != 2) {
    throw std::invalid_argument("responses must be 1D or 2D");
  }
  for (const auto& t : trees) {
    if (t.nodes.empty()) {
      throw std::invalid_argument("tree without nodes");
    }
    for (const auto& n : t.nodes) {
      if (n.is_leaf()) {
        if (n.leaf_end <= n.leaf_begin || n.leaf_end > t.leaf_rows.size()) {
          throw std::invalid_argument("leaf with invalid row range");
        }
      } else if (static_cast<std::size_t>(n.feature) >= n_features || n.left < 0 || n.right < 0
                 || static_cast<std::size_t>(n.left) >= t.nodes.size()
                 || static_cast<std::size_t>(n.right) >= t.nodes.size()
                 || !std::isfinite(n.threshold)) {
        throw std::invalid_argument("malformed internal node");
      }
    }
    for (auto r : t.leaf_rows) {
      if (r >= responses.rows()) {
        throw std::invalid_argument("leaf row out of range");
      }
    }
  }
  Forest f;
  config.n_trees = trees.size();
  f.config_ = config;
  f.n_features_ = n_features;
  f.responses_ = std::move(responses);
  f.trees_ = std::move(trees);
  f.finalize();
  return f;
}

void Forest::finalize()
{
  const std::size_t d = responses_.cols();
  lo_.assign(d, 0.0);
  hi_.assign(d, 0.0);
  for (std::size_t k = 0; k < d; ++k) {
    double lo = responses_(0, k);
    double hi = lo;
    for (std::size_t i = 1; i < responses_.rows(); ++i) {
      lo = std::min(lo, responses_(i, k));
      hi = std::max(hi, responses_(i, k));
    }
    lo_[k] = lo;
    hi_[k] = hi;
  }
  SparseWeights uniform;
  uniform.rows.resize(responses_.rows());
  std::iota(uniform.rows.begin(), uniform.rows.end(), 0u);
  uniform.weights.assign(responses_.rows(), 1.0);
  marginal_h_ = plugin_bandwidth(responses_, uniform);
  for (auto& h : marginal_h_) {
    if (!(h > 0.0) || !std::isfinite(h)) {
      h = 1.0;
    }
  }
}

// ---------------------------------------------------------------------------
// Prediction

SparseWeights Forest::sparse_weights(std::span<const double> x) const
{
  if (x.size() != n_features_) {
    throw std::invalid_argument("feature dimension mismatch: expected "
                                + std::to_string(n_features_) + ", got "
                                + std::to_string(x.size()));
  }
  std::vector<std::pair<std::uint32_t, double>> contrib;
  for (const auto& t : trees_) {
    auto rows = t.leaf_for(x);
    const double share = 1.0 / static_cast<double>(rows.size());
    for (auto r : rows) {
      contrib.emplace_back(r, share);
    }
  }
  // stable: per-row sums accumulate in tree order
  std::stable_sort(contrib.begin(), contrib.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  SparseWeights out;
  const double inv_t = 1.0 / static_cast<double>(trees_.size());
  for (std::size_t i = 0; i < contrib.size();) {
    const auto r = contrib[i].first;
    double s = 0.0;
    for (; i < contrib.size() && contrib[i].first == r; ++i) {
      s += contrib[i].second;
    }
    out.rows.push_back(r);
    out.weights.push_back(s * inv_t);
  }
  return out;
}

std::vector<double> plugin_bandwidth(const Matrix& responses, const SparseWeights& w)
{
  const std::size_t d = responses.cols();
  double sw = 0.0;
  double sw2 = 0.0;
  for (double v : w.weights) {
    sw += v;
    sw2 += v * v;
  }
  std::vector<double> h(d, 0.0);
  if (!(sw > 0.0)) {
    return h;
  }
  const double n_eff = sw * sw / sw2;
  for (std::size_t k = 0; k < d; ++k) {
    double mean = 0.0;
    for (std::size_t i = 0; i < w.rows.size(); ++i) {
      mean += w.weights[i] * responses(w.rows[i], k);
    }
    mean /= sw;
    double var = 0.0;
    for (std::size_t i = 0; i < w.rows.size(); ++i) {
      const double dev = responses(w.rows[i], k) - mean;
      var += w.weights[i] * dev * dev;
    }
    var /= sw;
    h[k] = 1.06 * std::sqrt(var) * std::pow(n_eff, -0.2);
  }
  return h;
}

std::vector<double> Forest::bandwidth_for(const SparseWeights& w) const
{
  auto h = plugin_bandwidth(responses_, w);
  for (std::size_t k = 0; k < h.size(); ++k) {
    if (!(h[k] > 0.0) || !std::isfinite(h[k])) {
      h[k] = marginal_h_[k];
    }
  }
  return h;
}

DensityGrid weighted_kde(const Matrix& responses, const SparseWeights& w, const Grid& grid,
                         const std::vector<double>& bandwidth)
{
  grid.validate();
  const std::size_t d = responses.cols();
  if (grid.dim() != d) {
    throw std::invalid_argument("grid dimension does not match the response dimension");
  }
  if (bandwidth.size() != d) {
    throw std::invalid_argument("bandwidth needs one value per response dimension");
  }
  for (double h : bandwidth) {
    if (!(h > 0.0) || !std::isfinite(h)) {
      throw std::invalid_argument("bandwidth must be positive");
    }
  }
  double sw = 0.0;
  for (double v : w.weights) {
    sw += v;
  }
  if (!(sw > 0.0)) {
    throw std::runtime_error("no_support");
  }

  DensityGrid out;
  out.grid = grid;
  out.bandwidth = bandwidth;
  out.values.assign(grid.size(), 0.0);

  // kernel values of one response along one axis, restricted to the cutoff
  auto axis_kernel = [](const std::vector<double>& axis, double y, double h, std::size_t& first,
                        std::vector<double>& k) {
    const auto lo = std::lower_bound(axis.begin(), axis.end(), y - kKernelCutoff * h);
    const auto hi = std::upper_bound(axis.begin(), axis.end(), y + kKernelCutoff * h);
    first = static_cast<std::size_t>(lo - axis.begin());
    k.clear();
    for (auto it = lo; it < hi; ++it) {
      const double u = (*it - y) / h;
      k.push_back(std::exp(-0.5 * u * u));
    }
  };

  std::vector<double> k0;
  std::vector<double> k1;
  std::size_t f0 = 0;
  std::size_t f1 = 0;
  if (d == 1) {
    const auto& axis = grid.axes[0];
    for (std::size_t i = 0; i < w.rows.size(); ++i) {
      if (w.weights[i] == 0.0) {
        continue;
      }
      axis_kernel(axis, responses(w.rows[i], 0), bandwidth[0], f0, k0);
      for (std::size_t j = 0; j < k0.size(); ++j) {
        out.values[f0 + j] += w.weights[i] * k0[j];
      }
    }
    const double scale = 1.0 / (sw * std::sqrt(2.0 * std::numbers::pi) * bandwidth[0]);
    for (auto& v : out.values) {
      v *= scale;
    }
    return out;
  }

  const std::size_t n1 = grid.axes[1].size();
  for (std::size_t i = 0; i < w.rows.size(); ++i) {
    if (w.weights[i] == 0.0) {
      continue;
    }
    axis_kernel(grid.axes[0], responses(w.rows[i], 0), bandwidth[0], f0, k0);
    if (k0.empty()) {
      continue;
    }
    axis_kernel(grid.axes[1], responses(w.rows[i], 1), bandwidth[1], f1, k1);
    for (std::size_t a = 0; a < k0.size(); ++a) {
      const double wa = w.weights[i] * k0[a];
      double* dst = out.values.data() + (f0 + a) * n1 + f1;
      for (std::size_t b = 0; b < k1.size(); ++b) {
        dst[b] += wa * k1[b];
      }
    }
  }
  const double scale = 1.0 / (sw * 2.0 * std::numbers::pi * bandwidth[0] * bandwidth[1]);
  for (auto& v : out.values) {
    v *= scale;
  }
  return out;
}

WeightVector leaf_weights(const Forest& forest, std::span<const double> x)
{
  const auto sparse = forest.sparse_weights(x);
  WeightVector out;
  out.w.assign(forest.n_train(), 0.0);
  for (std::size_t i = 0; i < sparse.rows.size(); ++i) {
    out.w[sparse.rows[i]] = sparse.weights[i];
  }
  return out;
}

DensityGrid predict_density(const Forest& forest, std::span<const double> x, const Grid& grid,
                            std::optional<std::vector<double>> bandwidth, bool normalize)
{
  const auto w = forest.sparse_weights(x);
  const auto h = bandwidth ? *bandwidth : forest.bandwidth_for(w);
  auto d = weighted_kde(forest.responses(), w, grid, h);
  if (normalize) {
    d.normalize();
  }
  return d;
}

double Forest::density_at(std::span<const double> x, std::span<const double> y,
                          std::optional<std::vector<double>> bandwidth) const
{
  if (y.size() != response_dim()) {
    throw std::invalid_argument("response point dimension mismatch");
  }
  const auto w = sparse_weights(x);
  const auto h = bandwidth ? *bandwidth : bandwidth_for(w);
  double num = 0.0;
  double sw = 0.0;
  for (std::size_t i = 0; i < w.rows.size(); ++i) {
    double k = 1.0;
    for (std::size_t d = 0; d < y.size(); ++d) {
      const double u = (responses_(w.rows[i], d) - y[d]) / h[d];
      k *= std::exp(-0.5 * u * u) / (std::sqrt(2.0 * std::numbers::pi) * h[d]);
    }
    num += w.weights[i] * k;
    sw += w.weights[i];
  }
  if (!(sw > 0.0)) {
    throw std::runtime_error("no_support");
  }
  return num / sw;
}

std::array<double, 2> density_mean(const DensityGrid& d)
{
  std::array<double, 2> m{0.0, 0.0};
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    const auto p = d.grid.point(i);
    m[0] += d.values[i] * p[0];
    m[1] += d.values[i] * p[1];
  }
  return m;
}

std::array<double, 2> density_mode(const DensityGrid& d)
{
  if (d.values.empty()) {
    throw std::invalid_argument("density_mode: empty grid");
  }
  const auto it = std::max_element(d.values.begin(), d.values.end());
  return d.grid.point(static_cast<std::size_t>(it - d.values.begin()));
}

double trapezoid(const Grid& grid, std::span<const double> values)
{
  auto weights = [](const std::vector<double>& a) {
    std::vector<double> w(a.size(), 0.0);
    for (std::size_t i = 0; i + 1 < a.size(); ++i) {
      const double half = 0.5 * (a[i + 1] - a[i]);
      w[i] += half;
      w[i + 1] += half;
    }
    return w;
  };
  const auto w0 = weights(grid.axes[0]);
  if (grid.dim() == 1) {
    double s = 0.0;
    for (std::size_t i = 0; i < w0.size(); ++i) {
      s += w0[i] * values[i];
    }
    return s;
  }
  const auto w1 = weights(grid.axes[1]);
  double s = 0.0;
  for (std::size_t i = 0; i < w0.size(); ++i) {
    for (std::size_t j = 0; j < w1.size(); ++j) {
      s += w0[i] * w1[j] * values[i * w1.size() + j];
    }
  }
  return s;
}

double cde_loss(const Forest& forest, const Matrix& X_test, const Matrix& Y_test, const Grid& grid,
                unsigned workers)
{
  if (X_test.rows() == 0 || X_test.rows() != Y_test.rows()) {
    throw std::invalid_argument("cde_loss: empty or mismatched test set");
  }
  const std::size_t m = X_test.rows();
  std::vector<double> integral(m);
  std::vector<double> at_obs(m);
  parallel_for(m, workers, [&](std::size_t i) {
    const auto w = forest.sparse_weights(X_test.row(i));
    const auto h = forest.bandwidth_for(w);
    auto dens = weighted_kde(forest.responses(), w, grid, h);
    std::vector<double> sq(dens.values.size());
    for (std::size_t k = 0; k < sq.size(); ++k) {
      sq[k] = dens.values[k] * dens.values[k];
    }
    integral[i] = trapezoid(grid, sq);
    at_obs[i] = forest.density_at(X_test.row(i), Y_test.row(i), h);
  });
  double a = 0.0;
  double b = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    a += integral[i];
    b += at_obs[i];
  }
  return a / static_cast<double>(m) - 2.0 * b / static_cast<double>(m);
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

template <typename T>
void put(std::ostream& out, const T& v)
{
  static_assert(std::is_trivially_copyable_v<T>);
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.write(buf, sizeof(T));
}

template <typename T>
T get(std::istream& in)
{
  static_assert(std::is_trivially_copyable_v<T>);
  char buf[sizeof(T)];
  if (!in.read(buf, sizeof(T))) {
    throw std::runtime_error("forest file truncated");
  }
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

} // namespace

void Forest::save(std::ostream& out) const
{
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kFormatVersion);
  put<std::uint64_t>(out, config_.n_trees);
  put<std::uint64_t>(out, config_.features_per_split);
  put<std::uint64_t>(out, config_.min_leaf_size);
  put<std::uint8_t>(out, config_.max_depth.has_value());
  put<std::uint64_t>(out, config_.max_depth.value_or(0));
  put<std::uint64_t>(out, config_.n_basis);
  put<std::uint8_t>(out, config_.bootstrap);
  put<std::uint64_t>(out, config_.seed);
  put<std::uint64_t>(out, n_features_);
  put<std::uint64_t>(out, responses_.rows());
  put<std::uint64_t>(out, responses_.cols());
  for (double v : responses_.data()) {
    put<double>(out, v);
  }
  put<std::uint64_t>(out, trees_.size());
  for (const auto& t : trees_) {
    put<std::uint64_t>(out, t.nodes.size());
    for (const auto& n : t.nodes) {
      put<std::int32_t>(out, n.feature);
      put<double>(out, n.threshold);
      put<std::int32_t>(out, n.left);
      put<std::int32_t>(out, n.right);
      put<std::uint32_t>(out, n.leaf_begin);
      put<std::uint32_t>(out, n.leaf_end);
    }
    put<std::uint64_t>(out, t.leaf_rows.size());
    for (auto r : t.leaf_rows) {
      put<std::uint32_t>(out, r);
    }
  }
  if (!out) {
    throw std::runtime_error("failed writing forest");
  }
}

Forest Forest::load(std::istream& in)
{
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("not a forest file (bad magic)");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kFormatVersion) {
    throw std::runtime_error("unsupported forest file version " + std::to_string(version));
  }
  ForestConfig c;
  c.n_trees = get<std::uint64_t>(in);
  c.features_per_split = get<std::uint64_t>(in);
  c.min_leaf_size = get<std::uint64_t>(in);
  const bool has_depth = get<std::uint8_t>(in) != 0;
  const auto depth = get<std::uint64_t>(in);
  if (has_depth) {
    c.max_depth = depth;
  }
  c.n_basis = get<std::uint64_t>(in);
  c.bootstrap = get<std::uint8_t>(in) != 0;
  c.seed = get<std::uint64_t>(in);
  const auto p = get<std::uint64_t>(in);
  const auto n = get<std::uint64_t>(in);
  const auto d = get<std::uint64_t>(in);
  if (d != 1 && d != 2) {
    throw std::runtime_error("forest file: bad response dimension");
  }
  std::vector<double> y(n * d);
  for (auto& v : y) {
    v = get<double>(in);
  }
  const auto n_trees = get<std::uint64_t>(in);
  std::vector<Tree> trees(n_trees);
  for (auto& t : trees) {
    t.nodes.resize(get<std::uint64_t>(in));
    for (auto& node : t.nodes) {
      node.feature = get<std::int32_t>(in);
      node.threshold = get<double>(in);
      node.left = get<std::int32_t>(in);
      node.right = get<std::int32_t>(in);
      node.leaf_begin = get<std::uint32_t>(in);
      node.leaf_end = get<std::uint32_t>(in);
    }
    t.leaf_rows.resize(get<std::uint64_t>(in));
    for (auto& r : t.leaf_rows) {
      r = get<std::uint32_t>(in);
    }
  }
  return from_parts(c, p, Matrix(n, d, std::move(y)), std::move(trees));
}

std::string Forest::to_json() const
{
  nlohmann::json j;
  j["format"] = "ghostcde-forest";
  j["version"] = kFormatVersion;
  j["config"] = {{"n_trees", config_.n_trees},
                 {"features_per_split", config_.features_per_split},
                 {"min_leaf_size", config_.min_leaf_size},
                 {"max_depth", config_.max_depth ? nlohmann::json(*config_.max_depth) : nlohmann::json()},
                 {"n_basis", config_.n_basis},
                 {"bootstrap", config_.bootstrap},
                 {"seed", config_.seed}};
  j["n_features"] = n_features_;
  j["n_train"] = responses_.rows();
  j["response_dim"] = responses_.cols();
  j["response_min"] = lo_;
  j["response_max"] = hi_;
  j["marginal_bandwidth"] = marginal_h_;
  auto& jt = j["trees"] = nlohmann::json::array();
  for (const auto& t : trees_) {
    nlohmann::json tree;
    auto& nodes = tree["nodes"] = nlohmann::json::array();
    for (const auto& n : t.nodes) {
      if (n.is_leaf()) {
        nodes.push_back({{"leaf_rows", std::vector<std::uint32_t>(t.leaf_rows.begin() + n.leaf_begin,
                                                                  t.leaf_rows.begin() + n.leaf_end)}});
      } else {
        nodes.push_back({{"feature", n.feature},
                         {"threshold", n.threshold},
                         {"left", n.left},
                         {"right", n.right}});
      }
    }
    jt.push_back(std::move(tree));
  }
  return j.dump(1);
}

} // namespace ghostcde::rfcde
