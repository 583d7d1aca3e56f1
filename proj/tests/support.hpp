#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "ghostcde/rfcde.hpp"
#include "ghostcde/synth.hpp"
#include "ghostcde/tracking.hpp"

namespace testing {

inline double normal_pdf(double u, double h)
{
  return std::exp(-0.5 * (u / h) * (u / h)) / (std::sqrt(2.0 * std::numbers::pi) * h);
}

//! Direct weighted KDE: sum_i w_i prod_d K_h(Y_id - y_d) / sum_i w_i.
inline double kde_oracle(const ghostcde::rfcde::Matrix& Y, std::span<const double> w,
                         std::span<const double> y, std::span<const double> h)
{
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < Y.rows(); ++i) {
    if (w[i] == 0.0) {
      continue;
    }
    double k = 1.0;
    for (std::size_t d = 0; d < y.size(); ++d) {
      k *= normal_pdf(Y(i, d) - y[d], h[d]);
    }
    num += w[i] * k;
    den += w[i];
  }
  return num / den;
}

//! 1.06 * weighted sd * n_eff^(-1/5) for one response column.
inline double silverman(std::span<const double> y, std::span<const double> w)
{
  double sw = 0.0, sw2 = 0.0, m = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sw += w[i];
    sw2 += w[i] * w[i];
    m += w[i] * y[i];
  }
  m /= sw;
  double v = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    v += w[i] * (y[i] - m) * (y[i] - m);
  }
  v /= sw;
  return 1.06 * std::sqrt(v) * std::pow(sw * sw / sw2, -0.2);
}

//! Single-leaf forest over all rows, no bootstrap.
inline ghostcde::rfcde::Forest depth0_forest(std::size_t n_features, ghostcde::rfcde::Matrix Y,
                                             std::size_t n_trees = 1)
{
  using namespace ghostcde::rfcde;
  std::vector<Tree> trees(n_trees);
  for (auto& t : trees) {
    Node leaf;
    leaf.leaf_begin = 0;
    leaf.leaf_end = static_cast<std::uint32_t>(Y.rows());
    t.nodes.push_back(leaf);
    for (std::uint32_t i = 0; i < Y.rows(); ++i) {
      t.leaf_rows.push_back(i);
    }
  }
  ForestConfig c;
  c.bootstrap = false;
  c.max_depth = 0;
  c.n_trees = n_trees;
  return Forest::from_parts(c, n_features, std::move(Y), std::move(trees));
}

inline ghostcde::synth::SynthData small_synth(std::size_t n, int weeks = 3, std::uint64_t seed = 7)
{
  ghostcde::synth::SynthConfig c;
  c.n_plays = n;
  c.weeks = weeks;
  c.seed = seed;
  return ghostcde::synth::generate(c);
}

} // namespace testing
