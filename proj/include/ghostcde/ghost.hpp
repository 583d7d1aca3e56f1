#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "ghostcde/epv.hpp"
#include "ghostcde/rfcde.hpp"
#include "ghostcde/rng.hpp"
#include "ghostcde/tracking.hpp"
#include "ghostcde/utility.hpp"

namespace ghostcde {

//! Adjusted-coordinate bounds a ghost may occupy.
inline constexpr double kGhostMinX = -10.0;
inline constexpr double kGhostMaxX = 110.0;
inline constexpr double kGhostMaxAbsY = kFieldCenterY;

struct GhostGridConfig
{
  double extent_x = 15.0; // yards either side of the receiver
  double extent_y = 15.0;
  double spacing = 1.0;
};

//! Candidate ghost locations: the lattice xs x ys in adjusted coordinates,
//! flattened x-major, with the location probabilities h.
struct GhostGrid
{
  rfcde::Grid lattice;
  std::vector<double> h;

  std::size_t size() const { return lattice.size(); }
  AdjustedPoint location(std::size_t i) const
  {
    const auto p = lattice.point(i);
    return {p[0], p[1]};
  }
};

//! Lattice centered on the receiver, clipped to the field.
GhostGrid make_ghost_grid(const AdjustedPoint& receiver, const GhostGridConfig& config = {});

//! Lattice over explicit axes (sorted ascending, inside the field).
GhostGrid make_ghost_grid(std::vector<double> xs, std::vector<double> ys);

//! Fills grid.h with the normalized 2D location density.
void ghost_location_density(const rfcde::Forest& forest2d, std::span<const double> ghost_features,
                            GhostGrid& grid);

//! One defender's speed, direction and orientation at the catch, with the
//! direction of the play it was observed in.
struct TrajectorySample
{
  double s = 0.0;
  double dir = 0.0;
  double o = 0.0;
  PlayDirection direction = PlayDirection::left;

  auto operator<=>(const TrajectorySample&) const = default;
};

//! Nearest-defender trajectories and distances to the receiver of the
//! training plays.
struct TrajectoryPool
{
  std::vector<double> distance;
  std::vector<TrajectorySample> samples;

  static TrajectoryPool from_snapshots(std::span<const CatchSnapshot> snapshots);
  std::size_t size() const { return samples.size(); }
};

inline constexpr double kTrajectoryWeightEpsilon = 1e-6;

//! Normalized weights 1 / (|d_i - d_l| + eps) favouring training defenders
//! whose distance to their receiver matches the ghost's.
std::vector<double> trajectory_weights(const AdjustedPoint& location, const AdjustedPoint& receiver,
                                       std::span<const double> training_distances,
                                       double epsilon = kTrajectoryWeightEpsilon);

//! B categorical draws (with replacement) of pool row indices.
std::vector<std::size_t> sample_trajectories(std::span<const double> weights, std::size_t B, Rng& rng);

//! Ghost defender at `location` moving as `sample`. Angles are turned by 180
//! degrees when the sample comes from a play going the other way, so its
//! heading relative to the target endzone is preserved.
PlayerState ghost_state(const AdjustedPoint& location, const TrajectorySample& sample,
                        PlayDirection target);

//! Precomputed per-play state for ghost evaluations: the observed YAC feature
//! vector and where def1's block sits in it.
class GhostPlay
{
public:
  GhostPlay(const CatchSnapshot& snapshot, const rfcde::Forest& yac_forest,
            const UtilityTable& table, const RoleSet& yac_roles = ghostcde::yac_roles());

  const CatchSnapshot& snapshot() const { return snapshot_; }
  const std::vector<double>& observed_features() const { return features_; }
  const CatchValuer& valuer() const { return valuer_; }
  double observed_epv() const { return observed_epv_; }
  TrajectorySample observed_trajectory() const;

  //! YAC features with def1 replaced by the ghost.
  std::vector<double> ghost_features(const AdjustedPoint& location, const TrajectorySample& sample) const;
  double ghost_epv(const AdjustedPoint& location, const TrajectorySample& sample) const;

private:
  const CatchSnapshot& snapshot_;
  CatchValuer valuer_;
  std::vector<double> features_;
  std::size_t def1_offset_ = 0;
  double observed_epv_ = 0.0;
};

enum class TrajectoryMode
{
  resample, // weighted draws from the pool
  observed  // every sample is the observed defender's trajectory
};

struct GhostConfig
{
  std::size_t samples = 100; // B
  GhostGridConfig grid;
  RoleSet yac_roles = ghostcde::yac_roles();
  RoleSet ghost_roles = ghostcde::ghost_roles();
  TrajectoryMode mode = TrajectoryMode::resample;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  bool keep_samples = true; // retain pool rows of each draw
};

struct GhostLocation
{
  AdjustedPoint where;
  double h = 0.0; // renormalized over evaluated locations; 0 when excluded
  bool ok = true;
  std::vector<double> epv;                 // per sample
  std::vector<std::size_t> pool_rows;      // per sample, when kept
  double mean_epv = 0.0;
  double mean_delta = 0.0; // EPV_catch - mean_epv
};

struct GhostEvaluation
{
  PlayKey key;
  std::optional<std::int64_t> def1_id;
  std::string def1_name;
  std::string def1_position;
  std::string defensive_team;
  double observed_yac = 0.0;
  double epv_catch = 0.0;
  std::vector<GhostLocation> locations;
  double expected_delta = 0.0;
  //! Share of the h-weighted ghost EPVs below the observed EPV (ties count half).
  double percentile = 0.0;
  std::size_t excluded = 0;
};

//! Full counterfactual evaluation of one play. When `grid` is given its
//! locations are used as-is (h is still taken from the 2D forest).
GhostEvaluation expected_delta(const CatchSnapshot& snapshot, const rfcde::Forest& yac_forest,
                               const rfcde::Forest& ghost_forest, const UtilityTable& table,
                               const TrajectoryPool& pool, const GhostConfig& config,
                               std::optional<GhostGrid> grid = std::nullopt);

//! Same with every sample fixed to the observed trajectory.
GhostEvaluation observed_trajectory_delta(const CatchSnapshot& snapshot,
                                          const rfcde::Forest& yac_forest,
                                          const rfcde::Forest& ghost_forest,
                                          const UtilityTable& table, const GhostConfig& config,
                                          std::optional<GhostGrid> grid = std::nullopt);

//! Evaluates from precomputed location probabilities; the building block of
//! the two functions above.
GhostEvaluation evaluate_locations(const GhostPlay& play, const GhostGrid& grid,
                                   const TrajectoryPool& pool, const GhostConfig& config);

//! Evaluates many plays; parallel over plays, identical for any worker count.
std::vector<GhostEvaluation> evaluate_plays(std::span<const CatchSnapshot> snapshots,
                                            const rfcde::Forest& yac_forest,
                                            const rfcde::Forest& ghost_forest,
                                            const UtilityTable& table, const TrajectoryPool& pool,
                                            const GhostConfig& config);

//! x_adj, y_adj, h, mean_epv, mean_delta, ok
void write_ghost_grid(std::ostream& out, const GhostEvaluation& e);
//! x_adj, y_adj, h, sample, pool_row, epv
void write_ghost_samples(std::ostream& out, const GhostEvaluation& e);
//! One header line plus one row per evaluation.
void write_ghost_summary(std::ostream& out, std::span<const GhostEvaluation> evals);
//! Reads summary rows back (without per-location detail).
std::vector<GhostEvaluation> read_ghost_summary(std::istream& in);

} // namespace ghostcde
