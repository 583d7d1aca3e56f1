#include "ghostcde/ghost.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "ghostcde/csv.hpp"
#include "ghostcde/parallel.hpp"

namespace ghostcde {

namespace {

std::vector<double> clipped_axis(double center, double extent, double spacing, double lo, double hi)
{
  if (!(spacing > 0.0) || !(extent >= 0.0)) {
    throw std::invalid_argument("ghost grid needs spacing > 0 and extent >= 0");
  }
  const auto steps = static_cast<long>(std::floor(extent / spacing + 1e-9));
  std::vector<double> axis;
  for (long k = -steps; k <= steps; ++k) {
    const double v = center + static_cast<double>(k) * spacing;
    if (v >= lo && v <= hi) {
      axis.push_back(v);
    }
  }
  return axis;
}

double turn(double angle, bool flip)
{
  return flip ? std::fmod(angle + 180.0, 360.0) : angle;
}

} // namespace

GhostGrid make_ghost_grid(const AdjustedPoint& receiver, const GhostGridConfig& config)
{
  auto xs = clipped_axis(receiver.x_adj, config.extent_x, config.spacing, kGhostMinX, kGhostMaxX);
  auto ys = clipped_axis(receiver.y_adj, config.extent_y, config.spacing, -kGhostMaxAbsY, kGhostMaxAbsY);
  if (xs.empty() || ys.empty()) {
    throw std::invalid_argument("ghost grid is empty after clipping to the field");
  }
  return make_ghost_grid(std::move(xs), std::move(ys));
}

GhostGrid make_ghost_grid(std::vector<double> xs, std::vector<double> ys)
{
  for (double x : xs) {
    if (x < kGhostMinX || x > kGhostMaxX) {
      throw std::invalid_argument("ghost location outside the field");
    }
  }
  for (double y : ys) {
    if (std::fabs(y) > kGhostMaxAbsY) {
      throw std::invalid_argument("ghost location outside the field");
    }
  }
  GhostGrid g;
  g.lattice = rfcde::Grid::lattice(std::move(xs), std::move(ys));
  g.h.assign(g.lattice.size(), 1.0 / static_cast<double>(g.lattice.size()));
  return g;
}

void ghost_location_density(const rfcde::Forest& forest2d, std::span<const double> ghost_features,
                            GhostGrid& grid)
{
  if (forest2d.response_dim() != 2) {
    throw std::invalid_argument("ghost forest must have a 2D response");
  }
  auto d = rfcde::predict_density(forest2d, ghost_features, grid.lattice, std::nullopt, true);
  grid.h = std::move(d.values);
}

TrajectoryPool TrajectoryPool::from_snapshots(std::span<const CatchSnapshot> snapshots)
{
  TrajectoryPool pool;
  for (const auto& s : snapshots) {
    if (s.defense.empty()) {
      continue;
    }
    const auto& d = s.defense.front();
    pool.distance.push_back(s.distance_to_receiver(d));
    pool.samples.push_back({d.frame.s, d.frame.dir, d.frame.o, s.context.play_direction});
  }
  return pool;
}

std::vector<double> trajectory_weights(const AdjustedPoint& location, const AdjustedPoint& receiver,
                                       std::span<const double> training_distances, double epsilon)
{
  const double d = std::hypot(location.x_adj - receiver.x_adj, location.y_adj - receiver.y_adj);
  std::vector<double> w(training_distances.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = 1.0 / (std::fabs(training_distances[i] - d) + epsilon);
    total += w[i];
  }
  for (auto& v : w) {
    v /= total;
  }
  return w;
}

std::vector<std::size_t> sample_trajectories(std::span<const double> weights, std::size_t B, Rng& rng)
{
  if (weights.empty()) {
    throw std::invalid_argument("cannot sample from an empty trajectory pool");
  }
  std::vector<double> cum(weights.size());
  double run = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] >= 0.0)) {
      throw std::invalid_argument("trajectory weights must be nonnegative");
    }
    run += weights[i];
    cum[i] = run;
  }
  if (!(run > 0.0)) {
    throw std::invalid_argument("trajectory weights sum to zero");
  }
  std::vector<std::size_t> out(B);
  for (auto& r : out) {
    const double u = rng.uniform() * run;
    auto it = std::upper_bound(cum.begin(), cum.end(), u);
    if (it == cum.end()) {
      // u * run rounded up to the total; take the last row with weight
      it = std::lower_bound(cum.begin(), cum.end(), run);
    }
    r = static_cast<std::size_t>(it - cum.begin());
  }
  return out;
}

PlayerState ghost_state(const AdjustedPoint& location, const TrajectorySample& sample,
                        PlayDirection target)
{
  const bool flip = sample.direction != target;
  PlayerState p;
  p.pos = location;
  p.frame.s = sample.s;
  p.frame.dir = turn(sample.dir, flip);
  p.frame.o = turn(sample.o, flip);
  p.frame.play_direction = target;
  return p;
}

// ---------------------------------------------------------------------------

GhostPlay::GhostPlay(const CatchSnapshot& snapshot, const rfcde::Forest& yac_forest,
                     const UtilityTable& table, const RoleSet& yac_roles)
  : snapshot_(snapshot)
  , valuer_(yac_forest, snapshot, table)
{
  check_roles(yac_roles);
  std::size_t offset = 10;
  bool found = false;
  for (const auto& r : yac_roles) {
    if (r == "rec" || r == "qb") {
      continue;
    }
    if (r == "def1") {
      def1_offset_ = offset;
      found = true;
      break;
    }
    offset += kPlayerBlockSize;
  }
  if (!found) {
    throw std::invalid_argument("YAC feature set must include def1 for ghost evaluation");
  }
  features_ = build_feature_vector(snapshot, yac_roles).values;
  if (features_.size() != yac_forest.n_features()) {
    throw std::invalid_argument("YAC forest was trained on a different feature set");
  }
  observed_epv_ = valuer_(features_);
}

TrajectorySample GhostPlay::observed_trajectory() const
{
  const auto& d = role_state(snapshot_, "def1");
  return {d.frame.s, d.frame.dir, d.frame.o, snapshot_.context.play_direction};
}

std::vector<double> GhostPlay::ghost_features(const AdjustedPoint& location,
                                              const TrajectorySample& sample) const
{
  std::vector<double> f = features_;
  const auto dir = snapshot_.context.play_direction;
  player_block(ghost_state(location, sample, dir), snapshot_.receiver, dir, snapshot_.convention,
               std::span(f).subspan(def1_offset_, kPlayerBlockSize));
  return f;
}

double GhostPlay::ghost_epv(const AdjustedPoint& location, const TrajectorySample& sample) const
{
  return valuer_(ghost_features(location, sample));
}

GhostEvaluation evaluate_locations(const GhostPlay& play, const GhostGrid& grid,
                                   const TrajectoryPool& pool, const GhostConfig& config)
{
  if (config.samples == 0) {
    throw std::invalid_argument("ghost evaluation needs at least one sample per location");
  }
  if (grid.h.size() != grid.size()) {
    throw std::invalid_argument("ghost grid probabilities do not match its locations");
  }
  if (config.mode == TrajectoryMode::resample && pool.size() == 0) {
    throw std::invalid_argument("trajectory pool is empty");
  }
  const auto& snap = play.snapshot();
  GhostEvaluation e;
  e.key = snap.key();
  if (!snap.defense.empty()) {
    const auto& d = snap.defense.front().frame;
    e.def1_id = d.player_id;
    e.def1_name = d.display_name;
    e.def1_position = d.position;
  }
  e.defensive_team = snap.context.defensive_team;
  e.observed_yac = snap.observed_yac;
  e.epv_catch = play.observed_epv();

  const std::size_t B = config.samples;
  const auto observed = play.observed_trajectory();
  e.locations.resize(grid.size());
  parallel_for(grid.size(), config.workers, [&](std::size_t i) {
    auto& loc = e.locations[i];
    loc.where = grid.location(i);
    try {
      if (config.mode == TrajectoryMode::observed) {
        loc.epv.assign(B, play.ghost_epv(loc.where, observed));
      } else {
        const auto w = trajectory_weights(loc.where, snap.receiver.pos, pool.distance);
        Rng rng(derive_seed(config.seed, {static_cast<std::uint64_t>(snap.context.game_id),
                                          static_cast<std::uint64_t>(snap.context.play_id), i}));
        const auto rows = sample_trajectories(w, B, rng);
        std::map<std::size_t, double> seen;
        loc.epv.reserve(B);
        for (auto r : rows) {
          auto it = seen.find(r);
          if (it == seen.end()) {
            it = seen.emplace(r, play.ghost_epv(loc.where, pool.samples[r])).first;
          }
          loc.epv.push_back(it->second);
        }
        if (config.keep_samples) {
          loc.pool_rows = rows;
        }
      }
      double sum = 0.0;
      for (double v : loc.epv) {
        sum += v;
      }
      loc.mean_epv = sum / static_cast<double>(B);
      loc.mean_delta = e.epv_catch - loc.mean_epv;
    } catch (const std::exception& ex) {
      loc.ok = false;
      loc.epv.clear();
      loc.pool_rows.clear();
      spdlog::debug("ghost location ({}, {}) failed: {}", loc.where.x_adj, loc.where.y_adj, ex.what());
    }
  });

  double total = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (e.locations[i].ok) {
      total += grid.h[i];
    } else {
      ++e.excluded;
    }
  }
  if (!(total > 0.0)) {
    throw std::runtime_error("no_support: no ghost location could be evaluated");
  }
  if (e.excluded > 0) {
    spdlog::warn("play {}/{}: {} ghost location(s) excluded", e.key.game_id, e.key.play_id, e.excluded);
  }
  double delta = 0.0;
  double below = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    auto& loc = e.locations[i];
    loc.h = loc.ok ? grid.h[i] / total : 0.0;
    if (!loc.ok) {
      continue;
    }
    delta += loc.h * (e.epv_catch - loc.mean_epv);
    double share = 0.0;
    for (double v : loc.epv) {
      share += v < e.epv_catch ? 1.0 : (v == e.epv_catch ? 0.5 : 0.0);
    }
    below += loc.h * share / static_cast<double>(B);
  }
  e.expected_delta = delta;
  e.percentile = std::clamp(below, 0.0, 1.0);
  return e;
}

namespace {

GhostEvaluation evaluate_with_mode(const CatchSnapshot& snapshot, const rfcde::Forest& yac_forest,
                                   const rfcde::Forest& ghost_forest, const UtilityTable& table,
                                   const TrajectoryPool& pool, const GhostConfig& config,
                                   std::optional<GhostGrid> grid)
{
  GhostPlay play(snapshot, yac_forest, table, config.yac_roles);
  const auto gf = build_feature_vector(snapshot, config.ghost_roles);
  GhostGrid g = grid ? std::move(*grid) : make_ghost_grid(snapshot.receiver.pos, config.grid);
  ghost_location_density(ghost_forest, gf.values, g);
  return evaluate_locations(play, g, pool, config);
}

} // namespace

GhostEvaluation expected_delta(const CatchSnapshot& snapshot, const rfcde::Forest& yac_forest,
                               const rfcde::Forest& ghost_forest, const UtilityTable& table,
                               const TrajectoryPool& pool, const GhostConfig& config,
                               std::optional<GhostGrid> grid)
{
  return evaluate_with_mode(snapshot, yac_forest, ghost_forest, table, pool, config, std::move(grid));
}

GhostEvaluation observed_trajectory_delta(const CatchSnapshot& snapshot,
                                          const rfcde::Forest& yac_forest,
                                          const rfcde::Forest& ghost_forest,
                                          const UtilityTable& table, const GhostConfig& config,
                                          std::optional<GhostGrid> grid)
{
  GhostConfig c = config;
  c.mode = TrajectoryMode::observed;
  return evaluate_with_mode(snapshot, yac_forest, ghost_forest, table, TrajectoryPool{}, c,
                            std::move(grid));
}

std::vector<GhostEvaluation> evaluate_plays(std::span<const CatchSnapshot> snapshots,
                                            const rfcde::Forest& yac_forest,
                                            const rfcde::Forest& ghost_forest,
                                            const UtilityTable& table, const TrajectoryPool& pool,
                                            const GhostConfig& config)
{
  std::vector<std::optional<GhostEvaluation>> slots(snapshots.size());
  GhostConfig inner = config;
  inner.workers = 1;
  parallel_for(snapshots.size(), config.workers, [&](std::size_t i) {
    try {
      slots[i] = evaluate_with_mode(snapshots[i], yac_forest, ghost_forest, table, pool, inner,
                                    std::nullopt);
    } catch (const std::exception& ex) {
      spdlog::warn("play {}/{} skipped: {}", snapshots[i].context.game_id,
                   snapshots[i].context.play_id, ex.what());
    }
  });
  std::vector<GhostEvaluation> out;
  for (auto& s : slots) {
    if (s) {
      out.push_back(std::move(*s));
    }
  }
  return out;
}

void write_ghost_grid(std::ostream& out, const GhostEvaluation& e)
{
  csv::write_row(out, {"x_adj", "y_adj", "h", "mean_epv", "mean_delta", "ok"});
  for (const auto& l : e.locations) {
    csv::write_row(out, {csv::format_double(l.where.x_adj), csv::format_double(l.where.y_adj),
                         csv::format_double(l.h), l.ok ? csv::format_double(l.mean_epv) : "NA",
                         l.ok ? csv::format_double(l.mean_delta) : "NA", l.ok ? "1" : "0"});
  }
}

void write_ghost_samples(std::ostream& out, const GhostEvaluation& e)
{
  csv::write_row(out, {"x_adj", "y_adj", "h", "sample", "pool_row", "epv"});
  for (const auto& l : e.locations) {
    for (std::size_t b = 0; b < l.epv.size(); ++b) {
      csv::write_row(out, {csv::format_double(l.where.x_adj), csv::format_double(l.where.y_adj),
                           csv::format_double(l.h), std::to_string(b),
                           b < l.pool_rows.size() ? std::to_string(l.pool_rows[b]) : "NA",
                           csv::format_double(l.epv[b])});
    }
  }
}

void write_ghost_summary(std::ostream& out, std::span<const GhostEvaluation> evals)
{
  csv::write_row(out, {"game_id", "play_id", "def1_id", "def1_name", "def1_position",
                       "defensive_team", "observed_yac", "epv_catch", "expected_delta",
                       "percentile", "n_locations", "excluded"});
  for (const auto& e : evals) {
    csv::write_row(out, {std::to_string(e.key.game_id), std::to_string(e.key.play_id),
                         e.def1_id ? std::to_string(*e.def1_id) : "NA", e.def1_name,
                         e.def1_position, e.defensive_team, csv::format_double(e.observed_yac),
                         csv::format_double(e.epv_catch), csv::format_double(e.expected_delta),
                         csv::format_double(e.percentile), std::to_string(e.locations.size()),
                         std::to_string(e.excluded)});
  }
}

std::vector<GhostEvaluation> read_ghost_summary(std::istream& in)
{
  csv::Reader reader(in);
  const char* names[] = {"game_id", "play_id", "def1_id", "def1_name", "def1_position",
                         "defensive_team", "observed_yac", "epv_catch", "expected_delta", "percentile",
                         "excluded"};
  std::map<std::string, std::size_t> col;
  for (const char* n : names) {
    auto c = reader.column(n);
    if (!c) {
      throw std::runtime_error(std::string("ghost summary: missing column '") + n + "'");
    }
    col[n] = *c;
  }
  std::vector<GhostEvaluation> out;
  csv::Record rec;
  while (reader.next(rec)) {
    const auto& f = rec.fields;
    if (f.size() != reader.header().size()) {
      throw std::runtime_error("ghost summary line " + std::to_string(rec.line) + ": wrong field count");
    }
    auto num = [&](const char* n) {
      auto v = csv::parse_double(f[col[n]]);
      if (!v) {
        throw std::runtime_error("ghost summary line " + std::to_string(rec.line) + ": bad " + n);
      }
      return *v;
    };
    GhostEvaluation e;
    e.key = {csv::parse_int(f[col["game_id"]]).value_or(0), csv::parse_int(f[col["play_id"]]).value_or(0)};
    if (auto id = csv::parse_int(f[col["def1_id"]])) {
      e.def1_id = *id;
    }
    e.def1_name = f[col["def1_name"]];
    e.def1_position = f[col["def1_position"]];
    e.defensive_team = f[col["defensive_team"]];
    e.observed_yac = num("observed_yac");
    e.epv_catch = num("epv_catch");
    e.expected_delta = num("expected_delta");
    e.percentile = num("percentile");
    e.excluded = static_cast<std::size_t>(num("excluded"));
    out.push_back(std::move(e));
  }
  return out;
}

} // namespace ghostcde
