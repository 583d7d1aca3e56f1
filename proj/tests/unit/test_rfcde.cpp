#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <sstream>

#include "ghostcde/rfcde.hpp"
#include "ghostcde/rng.hpp"
#include "support.hpp"

using namespace ghostcde;
using namespace ghostcde::rfcde;

namespace {

Tree two_leaf_tree(double threshold, std::vector<std::uint32_t> left, std::vector<std::uint32_t> right)
{
  Tree t;
  Node root;
  root.feature = 0;
  root.threshold = threshold;
  root.left = 1;
  root.right = 2;
  Node a;
  a.leaf_begin = 0;
  a.leaf_end = static_cast<std::uint32_t>(left.size());
  Node b;
  b.leaf_begin = a.leaf_end;
  b.leaf_end = static_cast<std::uint32_t>(left.size() + right.size());
  t.nodes = {root, a, b};
  t.leaf_rows = left;
  t.leaf_rows.insert(t.leaf_rows.end(), right.begin(), right.end());
  return t;
}

struct Sim
{
  Matrix X;
  Matrix Y;
};

//! Y = x1 + N(0, sd) with `noise` extra uniform features (signal=false drops x1 from Y).
Sim simulate(std::size_t n, std::size_t noise, double sd, std::uint64_t seed, bool signal = true)
{
  Rng rng(seed);
  Sim s{Matrix(n, 1 + noise), Matrix(n, 1)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= noise; ++j) {
      s.X(i, j) = rng.uniform(-2.0, 2.0);
    }
    s.Y(i, 0) = (signal ? s.X(i, 0) : 0.0) + rng.normal(0.0, sd);
  }
  return s;
}

std::vector<std::size_t> range(std::size_t lo, std::size_t hi)
{
  std::vector<std::size_t> v(hi - lo);
  std::iota(v.begin(), v.end(), lo);
  return v;
}

} // namespace

TEST_CASE("default config uses 500 trees")
{
  CHECK(ForestConfig{}.n_trees == 500);
}

TEST_CASE("single depth-0 tree gives uniform weights")
{
  Matrix Y(4, 1, std::vector<double>{0, 1, 2, 3});
  const auto f = testing::depth0_forest(2, Y);
  const double x[2] = {0.3, -1.0};
  const auto w = leaf_weights(f, x).w;
  REQUIRE(w.size() == 4);
  for (double v : w) {
    CHECK(v == 0.25);
  }
}

TEST_CASE("two hand-built trees give weights (0.25, 0.5, 0.25)")
{
  Matrix Y(3, 1, std::vector<double>{1, 2, 3});
  ForestConfig c;
  c.n_trees = 2;
  c.bootstrap = false;
  // tree 1: A={1,2} | B={3}; tree 2: A'={1} | B'={2,3}. x*=0 lands in A and B'.
  auto f = Forest::from_parts(c, 1, Y, {two_leaf_tree(0.5, {0, 1}, {2}), two_leaf_tree(-0.5, {0}, {1, 2})});
  const double x[1] = {0.0};
  const auto w = leaf_weights(f, x).w;
  CHECK(w[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(w[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(w[2] == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("trained weights are nonnegative and sum to one")
{
  auto s = simulate(300, 3, 0.5, 11);
  ForestConfig c;
  c.n_trees = 30;
  c.seed = 3;
  const auto f = train(s.X, s.Y, c);
  Rng rng(99);
  for (int q = 0; q < 50; ++q) {
    double x[4];
    for (double& v : x) {
      v = rng.uniform(-3.0, 3.0);
    }
    const auto w = leaf_weights(f, x);
    CHECK(std::all_of(w.w.begin(), w.w.end(), [](double v) { return v >= 0.0; }));
    CHECK(std::fabs(w.sum() - 1.0) < 1e-12);
  }
}

TEST_CASE("every bootstrap row sits in exactly one leaf")
{
  auto s = simulate(200, 2, 0.5, 12);
  ForestConfig c;
  c.n_trees = 10;
  c.seed = 5;
  const auto f = train(s.X, s.Y, c);
  for (const auto& t : f.trees()) {
    std::vector<int> seen(200, 0);
    for (const auto& n : t.nodes) {
      if (n.is_leaf()) {
        CHECK(n.leaf_end - n.leaf_begin >= 1);
        for (auto i = n.leaf_begin; i < n.leaf_end; ++i) {
          ++seen[t.leaf_rows[i]];
        }
      } else {
        CHECK(std::isfinite(n.threshold));
      }
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int k) { return k <= 1; }));
    CHECK(std::count(seen.begin(), seen.end(), 1) == static_cast<long>(t.leaf_rows.size()));
  }
}

TEST_CASE("max_depth 0 and constant features give single-leaf trees")
{
  auto s = simulate(50, 2, 0.5, 13);
  ForestConfig c;
  c.n_trees = 5;
  c.max_depth = 0;
  const auto f = train(s.X, s.Y, c);
  for (const auto& t : f.trees()) {
    CHECK(t.nodes.size() == 1);
    CHECK(std::is_sorted(t.leaf_rows.begin(), t.leaf_rows.end()));
    CHECK(std::adjacent_find(t.leaf_rows.begin(), t.leaf_rows.end()) == t.leaf_rows.end());
  }
  c.max_depth.reset();
  c.bootstrap = false;
  Matrix flat(50, 3, 1.0);
  const auto g = train(flat, s.Y, c);
  for (const auto& t : g.trees()) {
    CHECK(t.nodes.size() == 1);
    CHECK(t.leaf_rows.size() == 50);
  }
}

TEST_CASE("training rejects too few rows, bad shapes and non-finite input")
{
  auto s = simulate(9, 1, 0.5, 1);
  ForestConfig c;
  c.n_trees = 2;
  CHECK_THROWS(train(s.X, s.Y, c));
  auto t = simulate(20, 1, 0.5, 1);
  c.features_per_split = 3;
  CHECK_THROWS(train(t.X, t.Y, c));
  c.features_per_split = 0;
  t.X(3, 1) = std::nan("");
  CHECK_THROWS(train(t.X, t.Y, c));
  const double x[1] = {0.0};
  t = simulate(20, 1, 0.5, 1);
  const auto f = train(t.X, t.Y, c);
  CHECK_THROWS(leaf_weights(f, x));
}

TEST_CASE("single kernel density is a standard normal")
{
  Matrix Y(1, 1, std::vector<double>{0.0});
  const auto f = testing::depth0_forest(1, Y);
  const double x[1] = {0.0};
  const auto grid = Grid::uniform(-3.0, 3.0, 13);
  const auto d = predict_density(f, x, grid, std::vector<double>{1.0});
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(d.values[i] == doctest::Approx(testing::normal_pdf(grid.axes[0][i], 1.0)).epsilon(1e-14));
  }
}

TEST_CASE("depth-0 forest density equals the direct KDE oracle")
{
  Rng rng(21);
  Matrix Y1(300, 1);
  Matrix Y2(300, 2);
  for (std::size_t i = 0; i < 300; ++i) {
    Y1(i, 0) = rng.normal(1.0, 2.0);
    Y2(i, 0) = rng.normal(0.0, 1.0);
    Y2(i, 1) = rng.uniform(-3.0, 3.0);
  }
  const std::vector<double> uniform(300, 1.0);
  const double x[1] = {0.0};
  {
    const auto f = testing::depth0_forest(1, Y1, 3);
    const auto grid = Grid::uniform(-6.0, 8.0, 57);
    const auto d = predict_density(f, x, grid);
    const double h = testing::silverman(std::vector<double>(Y1.data()), uniform);
    CHECK(d.bandwidth[0] == doctest::Approx(h).epsilon(1e-13));
    double worst = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double y[1] = {grid.axes[0][i]};
      const double hh[1] = {h};
      worst = std::max(worst, std::fabs(d.values[i] - testing::kde_oracle(Y1, uniform, y, hh)));
    }
    CHECK(worst < 1e-12);
  }
  {
    const auto f = testing::depth0_forest(1, Y2);
    const auto grid = Grid::lattice(Grid::uniform(-3, 3, 13).axes[0], Grid::uniform(-4, 4, 17).axes[0]);
    const std::vector<double> hh{0.4, 0.7};
    const auto d = predict_density(f, x, grid, hh);
    double worst = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto p = grid.point(i);
      worst = std::max(worst, std::fabs(d.values[i] - testing::kde_oracle(Y2, uniform, p, hh)));
    }
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("normalized densities sum to one and 2D marginals are distributions")
{
  auto s = simulate(200, 2, 0.5, 31);
  Matrix Y2(200, 2);
  for (std::size_t i = 0; i < 200; ++i) {
    Y2(i, 0) = s.Y(i, 0);
    Y2(i, 1) = s.X(i, 1) * 2.0;
  }
  ForestConfig c;
  c.n_trees = 10;
  c.n_basis = 6;
  const auto f = train(s.X, Y2, c);
  const auto xs = Grid::uniform(-4, 4, 21).axes[0];
  const auto ys = Grid::uniform(-5, 5, 11).axes[0];
  const auto d = predict_density(f, s.X.row(0), Grid::lattice(xs, ys), std::nullopt, true);
  CHECK(std::accumulate(d.values.begin(), d.values.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
  std::vector<double> marginal(xs.size(), 0.0);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = 0; j < ys.size(); ++j) {
      marginal[i] += d.values[i * ys.size() + j];
    }
  }
  CHECK(std::all_of(d.values.begin(), d.values.end(), [](double v) { return v >= 0.0; }));
  CHECK(std::accumulate(marginal.begin(), marginal.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("density mean and mode")
{
  DensityGrid sym;
  sym.grid = Grid::line({-2, -1, 0, 1, 2});
  sym.values = {0.1, 0.2, 0.4, 0.2, 0.1};
  CHECK(density_mean(sym)[0] == doctest::Approx(0.0));
  for (std::size_t k = 0; k < 5; ++k) {
    DensityGrid pm;
    pm.grid = sym.grid;
    pm.values.assign(5, 0.0);
    pm.values[k] = 1.0;
    CHECK(density_mean(pm)[0] == pm.grid.axes[0][k]);
    CHECK(density_mode(pm)[0] == pm.grid.axes[0][k]);
  }
  DensityGrid bi;
  bi.grid = Grid::uniform(0, 10, 11);
  bi.values = {0.0, 0.1, 0.2, 0.1, 0.0, 0.0, 0.05, 0.25, 0.25, 0.05, 0.0};
  std::size_t best = 0;
  for (std::size_t i = 1; i < bi.values.size(); ++i) {
    if (bi.values[i] > bi.values[best]) {
      best = i;
    }
  }
  CHECK(density_mode(bi)[0] == bi.grid.axes[0][best]);
  CHECK(density_mode(bi)[0] == 7.0);
}

TEST_CASE("all-zero weights report no_support")
{
  Matrix Y(3, 1, std::vector<double>{0, 1, 2});
  SparseWeights w;
  w.rows = {0, 1};
  w.weights = {0.0, 0.0};
  CHECK_THROWS_WITH(weighted_kde(Y, w, Grid::line({0.0, 1.0}), {1.0}), doctest::Contains("no_support"));
}

TEST_CASE("cde loss matches a direct oracle and prefers the right density")
{
  Rng rng(41);
  Matrix right(400, 1);
  Matrix wrong(400, 1);
  Matrix test_y(100, 1);
  for (std::size_t i = 0; i < 400; ++i) {
    right(i, 0) = rng.normal();
    wrong(i, 0) = rng.normal(2.0, 1.0);
  }
  for (std::size_t i = 0; i < 100; ++i) {
    test_y(i, 0) = rng.normal();
  }
  Matrix test_x(100, 1, 0.0);
  const auto f_right = testing::depth0_forest(1, right);
  const auto f_wrong = testing::depth0_forest(1, wrong);
  const auto grid = Grid::uniform(-8.0, 10.0, 361);
  const double loss_right = cde_loss(f_right, test_x, test_y, grid);
  const double loss_wrong = cde_loss(f_wrong, test_x, test_y, grid);
  CHECK(loss_right < loss_wrong);

  // oracle: trapezoid of f^2 minus twice the mean density at the test points
  const std::vector<double> uniform(400, 1.0);
  const double h[1] = {testing::silverman(std::vector<double>(right.data()), uniform)};
  const auto& g = grid.axes[0];
  double integral = 0.0;
  for (std::size_t i = 1; i < g.size(); ++i) {
    const double a[1] = {g[i - 1]};
    const double b[1] = {g[i]};
    const double fa = testing::kde_oracle(right, uniform, a, h);
    const double fb = testing::kde_oracle(right, uniform, b, h);
    integral += 0.5 * (g[i] - g[i - 1]) * (fa * fa + fb * fb);
  }
  double at_obs = 0.0;
  for (std::size_t i = 0; i < 100; ++i) {
    const double y[1] = {test_y(i, 0)};
    at_obs += testing::kde_oracle(right, uniform, y, h);
  }
  CHECK(loss_right == doctest::Approx(integral - 2.0 * at_obs / 100.0).epsilon(1e-10));

  const double finer = cde_loss(f_right, test_x, test_y, Grid::uniform(-8.0, 10.0, 721));
  CHECK(std::fabs(finer - loss_right) < 1e-3);
  CHECK(cde_loss(f_right, test_x, test_y, grid) == loss_right);
}

// Reported, not enforced: on pure noise the forest pays a variance cost of
// roughly two fold standard errors, so this sits on the boundary.
TEST_CASE("noise-only responses: trained loss within two SEs of the depth-0 loss" * doctest::may_fail())
{
  const auto s = simulate(2000, 5, 1.0, 51, false);
  ForestConfig c;
  c.seed = 8;
  const auto grid = Grid::uniform(-5.0, 5.0, 201);
  std::vector<double> trained_loss;
  std::vector<double> base_loss;
  for (std::size_t k = 0; k < 5; ++k) {
    std::vector<std::size_t> tr;
    std::vector<std::size_t> te;
    for (std::size_t i = 0; i < 2000; ++i) {
      (i % 5 == k ? te : tr).push_back(i);
    }
    const auto Y = s.Y.select_rows(tr);
    const auto trained = train(s.X.select_rows(tr), Y, c);
    trained_loss.push_back(cde_loss(trained, s.X.select_rows(te), s.Y.select_rows(te), grid));
    base_loss.push_back(cde_loss(testing::depth0_forest(6, Y), s.X.select_rows(te), s.Y.select_rows(te), grid));
  }
  auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / 5.0; };
  const double mb = mean(base_loss);
  double v = 0.0;
  for (double d : base_loss) {
    v += (d - mb) * (d - mb);
  }
  const double se = std::sqrt(v / 4.0) / std::sqrt(5.0);
  MESSAGE("trained ", mean(trained_loss), " depth-0 ", mb, " fold SE ", se);
  CHECK(std::fabs(mean(trained_loss) - mb) <= 2.0 * se);
}

TEST_CASE("signal responses: trained loss below the marginal KDE loss")
{
  const auto s = simulate(1200, 5, 0.25, 52);
  ForestConfig c;
  c.n_trees = 40;
  c.seed = 9;
  const auto tr = range(0, 900);
  const auto te = range(900, 1200);
  const auto Y = s.Y.select_rows(tr);
  const auto trained = train(s.X.select_rows(tr), Y, c);
  const auto grid = Grid::uniform(-4.0, 4.0, 161);
  CHECK(cde_loss(trained, s.X.select_rows(te), s.Y.select_rows(te), grid)
        < cde_loss(testing::depth0_forest(6, Y), s.X.select_rows(te), s.Y.select_rows(te), grid));
}

TEST_CASE("training is deterministic and independent of worker count")
{
  const auto s = simulate(300, 3, 0.5, 61);
  ForestConfig c;
  c.n_trees = 16;
  c.seed = 4;
  c.workers = 1;
  const auto a = train(s.X, s.Y, c);
  c.workers = 3;
  const auto b = train(s.X, s.Y, c);
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(leaf_weights(a, s.X.row(i)).w == leaf_weights(b, s.X.row(i)).w);
  }
  CHECK(a.to_json() == b.to_json());
}

TEST_CASE("save and load reproduce predictions bit for bit")
{
  const auto s = simulate(200, 2, 0.5, 71);
  ForestConfig c;
  c.n_trees = 8;
  c.seed = 2;
  const auto f = train(s.X, s.Y, c);
  std::stringstream io;
  f.save(io);
  const auto g = Forest::load(io);
  const auto grid = Grid::uniform(-4, 4, 41);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(predict_density(f, s.X.row(i), grid).values == predict_density(g, s.X.row(i), grid).values);
  }
  std::stringstream bad("GCDEFRSX");
  CHECK_THROWS(Forest::load(bad));
}

TEST_CASE("permuting training rows permutes the weights")
{
  Matrix Y(5, 1, std::vector<double>{0, 1, 2, 3, 4});
  const std::vector<std::uint32_t> perm{3, 0, 4, 1, 2}; // row i moves to perm[i]
  Matrix Yp(5, 1);
  for (std::size_t i = 0; i < 5; ++i) {
    Yp(perm[i], 0) = Y(i, 0);
  }
  ForestConfig c;
  c.bootstrap = false;
  c.n_trees = 1;
  auto f = Forest::from_parts(c, 1, Y, {two_leaf_tree(0.0, {0, 1}, {2, 3, 4})});
  auto g = Forest::from_parts(c, 1, Yp, {two_leaf_tree(0.0, {perm[0], perm[1]}, {perm[2], perm[3], perm[4]})});
  for (double xv : {-1.0, 1.0}) {
    const double x[1] = {xv};
    const auto w = leaf_weights(f, x).w;
    const auto wp = leaf_weights(g, x).w;
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(wp[perm[i]] == w[i]);
    }
  }
}

TEST_CASE("trapezoid integrates a line exactly")
{
  const auto g = Grid::uniform(0.0, 2.0, 5);
  const std::vector<double> v{0.0, 0.5, 1.0, 1.5, 2.0};
  CHECK(trapezoid(g, v) == doctest::Approx(2.0));
}
