#include "ghostcde/epv.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "ghostcde/csv.hpp"

namespace ghostcde {

YacGrid build_yac_grid(double catch_x_adj)
{
  if (!(catch_x_adj > 0.0) || !std::isfinite(catch_x_adj)) {
    throw std::invalid_argument("catch in the endzone: YAC grid needs catch_x_adj > 0");
  }
  YacGrid g;
  g.catch_x_adj = catch_x_adj;
  const int hi = static_cast<int>(std::floor(catch_x_adj)) + static_cast<int>(kYacPadding);
  for (int y = static_cast<int>(kMinYac); y <= hi; ++y) {
    g.yac.push_back(y);
    g.touchdown.push_back(y >= catch_x_adj);
  }
  return g;
}

std::vector<double> grid_utilities(const YacGrid& grid, const PlayContext& context,
                                   const UtilityTable& table)
{
  std::vector<double> g(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    g[i] = grid.touchdown[i] ? kTouchdownValue
                             : play_value(grid.catch_x_adj - grid.yac[i], context, table);
  }
  return g;
}

double expected_value(std::span<const double> density, std::span<const double> utilities)
{
  if (density.size() != utilities.size()) {
    throw std::invalid_argument("density and utilities differ in length");
  }
  double total = 0.0;
  for (double p : density) {
    total += p;
  }
  if (!(total > 0.0)) {
    throw std::runtime_error("no_support");
  }
  double v = 0.0;
  for (std::size_t i = 0; i < density.size(); ++i) {
    v += density[i] / total * utilities[i];
  }
  return v;
}

double epv_at_catch(const rfcde::DensityGrid& density, const YacGrid& grid,
                    const PlayContext& context, const UtilityTable& table)
{
  if (density.grid.dim() != 1 || density.grid.axes[0] != grid.yac) {
    throw std::invalid_argument("density is not defined on the play's YAC grid");
  }
  return expected_value(density.values, grid_utilities(grid, context, table));
}

double clamp_yac(double yac, double catch_x_adj)
{
  return std::clamp(yac, kMinYac, std::floor(catch_x_adj) + kYacPadding);
}

YacTrainingSet yac_training_set(std::span<const CatchSnapshot> snapshots, const RoleSet& roles)
{
  check_roles(roles);
  YacTrainingSet out;
  out.feature_names = feature_names(roles);
  const std::size_t p = out.feature_names.size();
  std::vector<double> x;
  std::vector<double> y;
  x.reserve(snapshots.size() * p);
  for (const auto& s : snapshots) {
    const auto fv = build_feature_vector(s, roles);
    x.insert(x.end(), fv.values.begin(), fv.values.end());
    const double c = clamp_yac(s.observed_yac, s.receiver.pos.x_adj);
    out.clamped += c != s.observed_yac;
    y.push_back(c);
  }
  out.X = rfcde::Matrix(snapshots.size(), p, std::move(x));
  out.Y = rfcde::Matrix(snapshots.size(), 1, std::move(y));
  return out;
}

CatchValuer::CatchValuer(const rfcde::Forest& yac_forest, const CatchSnapshot& snapshot,
                         const UtilityTable& table)
  : forest_(yac_forest)
  , grid_(build_yac_grid(snapshot.receiver.pos.x_adj))
  , lattice_(grid_.grid())
  , utilities_(grid_utilities(grid_, snapshot.context, table))
{
  if (yac_forest.response_dim() != 1) {
    throw std::invalid_argument("YAC forest must have a 1D response");
  }
}

std::vector<double> CatchValuer::density(std::span<const double> features) const
{
  auto d = rfcde::predict_density(forest_, features, lattice_, std::nullopt, true);
  return std::move(d.values);
}

double CatchValuer::operator()(std::span<const double> features) const
{
  const auto d = rfcde::predict_density(forest_, features, lattice_);
  return expected_value(d.values, utilities_);
}

void write_epv_rows(std::ostream& out, std::span<const PlayEpv> rows)
{
  csv::write_row(out, {"game_id", "play_id", "epv_catch", "density"});
  for (const auto& r : rows) {
    std::string dens;
    for (std::size_t i = 0; i < r.density.size(); ++i) {
      if (i) {
        dens += ';';
      }
      dens += csv::format_double(r.density[i]);
    }
    csv::write_row(out, {std::to_string(r.key.game_id), std::to_string(r.key.play_id),
                         csv::format_double(r.epv_catch), dens});
  }
}

} // namespace ghostcde
