#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ghostcde::rfcde {

//! Dense row-major matrix of doubles.
class Matrix
{
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
    : rows_(rows)
    , cols_(cols)
    , data_(rows * cols, fill)
  {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows)
    , cols_(cols)
    , data_(std::move(data))
  {
    if (data_.size() != rows * cols) {
      throw std::invalid_argument("Matrix: data size does not match shape");
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  const std::vector<double>& data() const { return data_; }

  //! Rows selected by index, in the given order.
  Matrix select_rows(std::span<const std::size_t> idx) const;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct ForestConfig
{
  std::size_t n_trees = 500;
  std::size_t features_per_split = 0; // 0 means ceil(sqrt(p))
  std::size_t min_leaf_size = 5;
  std::optional<std::size_t> max_depth;
  std::size_t n_basis = 15; // cosine basis size per response dimension
  bool bootstrap = true;
  std::uint64_t seed = 0;
  unsigned workers = 1; // training threads; results do not depend on it
};

struct Node
{
  std::int32_t feature = -1; // -1 marks a leaf
  double threshold = 0.0;    // go left when x[feature] <= threshold
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::uint32_t leaf_begin = 0; // leaf rows are leaf_rows[leaf_begin, leaf_end)
  std::uint32_t leaf_end = 0;

  bool is_leaf() const { return feature < 0; }
};

//! One CDE tree. Leaves hold the distinct training rows of the tree's
//! (bootstrap) sample that fall in them.
struct Tree
{
  std::vector<Node> nodes; // nodes[0] is the root
  std::vector<std::uint32_t> leaf_rows;

  std::size_t leaf_index(std::span<const double> x) const;
  std::span<const std::uint32_t> leaf_for(std::span<const double> x) const;
  std::size_t depth() const;
  std::size_t n_leaves() const;
};

//! Forest weights: one nonnegative weight per training row.
struct WeightVector
{
  std::vector<double> w;

  double sum() const;
};

//! Nonzero weights, sorted by row index.
struct SparseWeights
{
  std::vector<std::uint32_t> rows;
  std::vector<double> weights;
};

//! Evaluation grid. One axis for 1D; for 2D the lattice axes[0] x axes[1] with
//! flat index i0 * axes[1].size() + i1. Axes must be sorted ascending.
struct Grid
{
  std::vector<std::vector<double>> axes;

  static Grid line(std::vector<double> points);
  static Grid lattice(std::vector<double> xs, std::vector<double> ys);
  static Grid uniform(double lo, double hi, std::size_t n);

  std::size_t dim() const { return axes.size(); }
  std::size_t size() const;
  std::array<double, 2> point(std::size_t i) const;
  void validate() const;
};

struct DensityGrid
{
  Grid grid;
  std::vector<double> values;
  bool normalized = false;
  std::vector<double> bandwidth; // one per response dimension

  //! Rescales values to a discrete probability vector. Throws "no_support"
  //! when all values are zero.
  void normalize();
};

class Forest
{
public:
  Forest() = default;

  //! Assembles a forest from explicit trees; used for loading and for
  //! hand-built trees in tests.
  static Forest from_parts(ForestConfig config, std::size_t n_features, Matrix responses,
                           std::vector<Tree> trees);

  const ForestConfig& config() const { return config_; }
  std::size_t n_features() const { return n_features_; }
  std::size_t n_train() const { return responses_.rows(); }
  std::size_t response_dim() const { return responses_.cols(); }
  const Matrix& responses() const { return responses_; }
  const std::vector<Tree>& trees() const { return trees_; }
  const std::vector<double>& response_min() const { return lo_; }
  const std::vector<double>& response_max() const { return hi_; }
  //! Plug-in bandwidth of the unweighted training responses.
  const std::vector<double>& marginal_bandwidth() const { return marginal_h_; }

  SparseWeights sparse_weights(std::span<const double> x) const;

  //! Weighted plug-in bandwidth for the given weights, falling back to the
  //! marginal bandwidth when the weighted spread is zero.
  std::vector<double> bandwidth_for(const SparseWeights& w) const;

  //! f(y | x) at a single response point (continuous, unnormalized).
  double density_at(std::span<const double> x, std::span<const double> y,
                    std::optional<std::vector<double>> bandwidth = std::nullopt) const;

  void save(std::ostream& out) const;
  static Forest load(std::istream& in);
  std::string to_json() const;

private:
  friend Forest train(const Matrix&, const Matrix&, const ForestConfig&);
  void finalize();

  ForestConfig config_;
  std::size_t n_features_ = 0;
  Matrix responses_;
  std::vector<Tree> trees_;
  std::vector<double> lo_;
  std::vector<double> hi_;
  std::vector<double> marginal_h_;
};

//! Grows config.n_trees CDE trees. Splits maximise
//! sum_j S_jL^2 / n_L + sum_j S_jR^2 / n_R over cosine-basis projections of the
//! rescaled responses, which minimises the CDE loss of the node series estimate.
Forest train(const Matrix& X, const Matrix& Y, const ForestConfig& config);

WeightVector leaf_weights(const Forest& forest, std::span<const double> x);

//! Weighted Gaussian KDE of the training responses on `grid`. An empty
//! bandwidth selects the weighted plug-in rule.
DensityGrid predict_density(const Forest& forest, std::span<const double> x, const Grid& grid,
                            std::optional<std::vector<double>> bandwidth = std::nullopt,
                            bool normalize = false);

//! Same as predict_density for precomputed weights.
DensityGrid weighted_kde(const Matrix& responses, const SparseWeights& w, const Grid& grid,
                         const std::vector<double>& bandwidth);

//! h = 1.06 * sigma_w * n_eff^(-1/5) per response dimension, with
//! n_eff = (sum w)^2 / sum w^2. Zero when the weighted spread is zero.
std::vector<double> plugin_bandwidth(const Matrix& responses, const SparseWeights& w);

std::array<double, 2> density_mean(const DensityGrid& d);
std::array<double, 2> density_mode(const DensityGrid& d);

//! Empirical CDE loss: mean of integral f^2 (trapezoid on `grid`) minus twice
//! the mean of f at the observed responses.
double cde_loss(const Forest& forest, const Matrix& X_test, const Matrix& Y_test, const Grid& grid,
                unsigned workers = 1);

//! Trapezoid-rule integral of grid values (1D or 2D lattice).
double trapezoid(const Grid& grid, std::span<const double> values);

} // namespace ghostcde::rfcde
