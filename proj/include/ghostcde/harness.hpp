#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ghostcde/ghost.hpp"
#include "ghostcde/rfcde.hpp"
#include "ghostcde/tracking.hpp"

namespace ghostcde::harness {

enum class ModelKind
{
  yac,
  ghost2d
};

std::string_view to_string(ModelKind k);
ModelKind parse_model_kind(std::string_view text);

struct FeatureSet
{
  std::string name;
  RoleSet roles;
};

struct HarnessConfig
{
  rfcde::ForestConfig forest;
  GhostGridConfig grid;         // lattice for the 2D distance metrics
  double loss_grid_step = 0.5;  // spacing of the common YAC grid used for the CDE loss
  unsigned workers = 1;
};

//! Training matrix for one model kind: YAC responses are clamped to the play's
//! grid, 2D responses are def1's adjusted location.
struct Dataset
{
  rfcde::Matrix X;
  rfcde::Matrix Y;
  std::vector<PlayKey> keys;
  std::vector<int> weeks;
  std::vector<double> catch_x_adj;
  std::vector<AdjustedPoint> receiver;
};

Dataset make_dataset(std::span<const CatchSnapshot> snapshots, const RoleSet& roles, ModelKind kind);

//! Metric names in report order.
std::vector<std::string> metric_names(ModelKind kind);

//! Held-out metrics of `forest` on rows `test` of `data`.
std::map<std::string, double> evaluate_metrics(const rfcde::Forest& forest, const Dataset& data,
                                               std::span<const std::size_t> test, ModelKind kind,
                                               const HarnessConfig& config);

struct FoldResult
{
  int week = 0;
  std::size_t n_train = 0;
  std::vector<PlayKey> test_keys;
  std::map<std::string, double> metrics;
};

struct FeatureSetReport
{
  std::string name;
  std::vector<FoldResult> folds;
  std::map<std::string, double> mean;
  std::map<std::string, double> se; // sample SD / sqrt(#folds)
};

struct CvReport
{
  ModelKind kind = ModelKind::yac;
  std::vector<FeatureSetReport> sets;
};

//! Leave-one-week-out cross validation. Needs at least two weeks.
CvReport lowo_cv(std::span<const CatchSnapshot> snapshots, std::span<const FeatureSet> feature_sets,
                 ModelKind kind, const HarnessConfig& config);

//! Mean and SD/sqrt(n) of one metric across folds.
std::pair<double, double> mean_and_se(std::span<const double> values);

struct SweepRow
{
  std::vector<int> train_weeks;
  int test_week = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::map<std::string, double> metrics;
};

//! Training prefixes {w1}, {w1, w2}, ... excluding the last week. Throws with
//! fewer than three distinct weeks.
std::vector<std::vector<int>> sweep_prefixes(std::vector<int> weeks);

std::vector<SweepRow> week_sweep(std::span<const CatchSnapshot> snapshots, const FeatureSet& features,
                                 ModelKind kind, const HarnessConfig& config);

// ---------------------------------------------------------------------------
// Aggregation

struct PlayerSummary
{
  std::int64_t player_id = 0;
  std::string name;
  std::string position;
  std::string team;
  std::size_t receptions = 0;
  double total_delta = 0.0;
  double avg_delta = 0.0;
  double total_yac = 0.0;
  double avg_yac = 0.0;
};

struct Leaderboard
{
  std::vector<PlayerSummary> players;  // ascending total_delta, ties by id
  std::vector<PlayerSummary> scatter;  // players with at least min_receptions
  double correlation = 0.0;            // avg delta vs avg YAC over the scatter
  std::map<std::string, double> correlation_by_position;
};

Leaderboard aggregate_players(std::span<const GhostEvaluation> evals, std::size_t min_receptions = 10);

struct TeamSummary
{
  std::string team;
  std::size_t plays = 0;
  double total_delta = 0.0;
  double avg_delta = 0.0;
  std::optional<double> epa;
};

struct TeamReport
{
  std::vector<TeamSummary> teams; // sorted by team
  double correlation = 0.0;       // avg delta vs EPA over teams with EPA
  std::vector<std::string> missing;
};

//! Columns team, epa.
std::map<std::string, double> load_team_epa(std::istream& in);

TeamReport aggregate_teams(std::span<const GhostEvaluation> evals,
                           const std::map<std::string, double>& epa);

//! Pearson correlation; NaN with fewer than two points or zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

//! Correlation of E[delta] between two evaluation runs matched by play.
double delta_correlation(std::span<const GhostEvaluation> a, std::span<const GhostEvaluation> b);

// ---------------------------------------------------------------------------
// Report files

void write_cv_folds(std::ostream& out, const CvReport& r);
void write_cv_summary(std::ostream& out, const CvReport& r);
void write_sweep(std::ostream& out, std::span<const SweepRow> rows);
void write_leaderboard(std::ostream& out, std::span<const PlayerSummary> rows);
void write_player_scatter(std::ostream& out, const Leaderboard& board);
void write_teams(std::ostream& out, const TeamReport& r);

} // namespace ghostcde::harness
