#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "ghostcde/rfcde.hpp"
#include "ghostcde/tracking.hpp"
#include "ghostcde/utility.hpp"

namespace ghostcde {

inline constexpr double kMinYac = -10.0;
inline constexpr double kYacPadding = 2.0;

//! Integer yards-after-catch values from -10 to floor(catch_x_adj) + 2.
struct YacGrid
{
  double catch_x_adj = 0.0;
  std::vector<double> yac;
  std::vector<bool> touchdown; // yac >= catch_x_adj

  std::size_t size() const { return yac.size(); }
  rfcde::Grid grid() const { return rfcde::Grid::line(yac); }
};

//! Throws std::invalid_argument for catches at or behind the goal line.
YacGrid build_yac_grid(double catch_x_adj);

//! g at every grid point; touchdown points are worth exactly 7.
std::vector<double> grid_utilities(const YacGrid& grid, const PlayContext& context,
                                   const UtilityTable& table);

//! Normalizes `density` and returns sum p * g. Throws "no_support" when the
//! density has no mass.
double expected_value(std::span<const double> density, std::span<const double> utilities);

double epv_at_catch(const rfcde::DensityGrid& density, const YacGrid& grid,
                    const PlayContext& context, const UtilityTable& table);

//! Clamps a YAC response into the grid range of its play.
double clamp_yac(double yac, double catch_x_adj);

struct YacTrainingSet
{
  rfcde::Matrix X;
  rfcde::Matrix Y;
  std::vector<std::string> feature_names;
  std::size_t clamped = 0;
};

//! Features for `roles` and clamped observed YAC for each snapshot.
YacTrainingSet yac_training_set(std::span<const CatchSnapshot> snapshots, const RoleSet& roles);

//! EPV of one play for arbitrary feature vectors; caches the grid and its
//! utilities so repeated (ghost) evaluations only pay for the density.
class CatchValuer
{
public:
  CatchValuer(const rfcde::Forest& yac_forest, const CatchSnapshot& snapshot,
              const UtilityTable& table);

  double operator()(std::span<const double> features) const;
  //! Normalized YAC density for `features` on the play's grid.
  std::vector<double> density(std::span<const double> features) const;

  const YacGrid& grid() const { return grid_; }
  const std::vector<double>& utilities() const { return utilities_; }

private:
  const rfcde::Forest& forest_;
  YacGrid grid_;
  rfcde::Grid lattice_;
  std::vector<double> utilities_;
};

struct PlayEpv
{
  PlayKey key;
  double epv_catch = 0.0;
  std::vector<double> density; // optional, on the play's YacGrid
};

//! game_id, play_id, epv_catch and, when present, the density as a
//! semicolon-separated column.
void write_epv_rows(std::ostream& out, std::span<const PlayEpv> rows);

} // namespace ghostcde
