// ghostcde command-line front end.
//
// Every command reads and writes under --out; paths given on the command line
// or in the --config file take precedence over the defaults inside --out.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "ghostcde/epv.hpp"
#include "ghostcde/ghost.hpp"
#include "ghostcde/harness.hpp"
#include "ghostcde/rfcde.hpp"
#include "ghostcde/synth.hpp"
#include "ghostcde/tracking.hpp"
#include "ghostcde/utility.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace ghostcde;

namespace {

//! A failure reported as JSON on stderr. `produced_by` names the command that
//! creates a missing artifact.
struct CommandError : std::runtime_error
{
  CommandError(std::string kind, std::string message, std::string artifact = {},
               std::string produced_by = {})
    : std::runtime_error(message)
    , kind(std::move(kind))
    , artifact(std::move(artifact))
    , produced_by(std::move(produced_by))
  {}
  std::string kind;
  std::string artifact;
  std::string produced_by;
};

struct ForestOptions
{
  std::size_t trees = 500;
  std::size_t min_leaf = 5;
  std::size_t mtry = 0;
  std::size_t basis = 15;
  std::size_t max_depth = 0; // 0: unlimited

  rfcde::ForestConfig config(std::uint64_t seed, unsigned workers) const
  {
    rfcde::ForestConfig c;
    c.n_trees = trees;
    c.min_leaf_size = min_leaf;
    c.features_per_split = mtry;
    c.n_basis = basis;
    if (max_depth > 0) {
      c.max_depth = max_depth;
    }
    c.seed = seed;
    c.workers = workers;
    return c;
  }
};

struct RunConfig
{
  std::string out = "ghostcde_out";
  std::vector<std::string> tracking;
  std::string plays;
  std::string games;
  std::string ep_table;
  std::string team_epa;
  unsigned workers = 1;
  std::uint64_t seed = 2021;
  std::string log_level = "info";

  ForestOptions yac;
  ForestOptions ghost;
  std::string yac_features = "rec,qb,def1";
  std::string ghost_features = "rec,qb";
  std::vector<std::string> feature_sets;

  std::size_t samples = 100;
  double extent_x = 15.0;
  double extent_y = 15.0;
  double spacing = 1.0;

  // per-command
  std::int64_t game = 0;
  std::int64_t play = 0;
  std::size_t limit = 0;
  bool compare_observed = false;
  bool forest_json = false;
  std::string model = "yac";
  std::size_t min_receptions = 10;
  synth::SynthConfig synth;
};

RoleSet parse_roles(const std::string& text, char sep = ',')
{
  RoleSet roles;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) {
      roles.push_back(item);
    }
  }
  check_roles(roles);
  return roles;
}

std::vector<harness::FeatureSet> parse_feature_sets(const std::vector<std::string>& specs,
                                                    harness::ModelKind kind)
{
  std::vector<std::string> use = specs;
  if (use.empty()) {
    use = kind == harness::ModelKind::yac
            ? std::vector<std::string>{"base=rec+qb+def1", "with_def2=rec+qb+def1+def2",
                                       "with_offense=rec+qb+def1+off1+off2"}
            : std::vector<std::string>{"base=rec+qb", "with_offense=rec+qb+off1+off2",
                                       "with_def2=rec+qb+def2"};
  }
  std::vector<harness::FeatureSet> out;
  for (const auto& s : use) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw CommandError("bad_config", "feature set '" + s + "' must look like name=rec+qb+def1");
    }
    out.push_back({s.substr(0, eq), parse_roles(s.substr(eq + 1), '+')});
  }
  return out;
}

fs::path out_dir(const RunConfig& c)
{
  return fs::path(c.out);
}

fs::path require_file(const fs::path& p, const std::string& produced_by)
{
  if (!fs::exists(p)) {
    throw CommandError("missing_prerequisite", "required file " + p.string() + " does not exist",
                       p.string(), produced_by);
  }
  return p;
}

std::ofstream open_out(const fs::path& p)
{
  fs::create_directories(p.parent_path().empty() ? fs::path(".") : p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) {
    throw CommandError("io_error", "cannot write " + p.string());
  }
  return f;
}

std::ifstream open_in(const fs::path& p, const std::string& produced_by)
{
  require_file(p, produced_by);
  std::ifstream f(p, std::ios::binary);
  if (!f) {
    throw CommandError("io_error", "cannot read " + p.string());
  }
  return f;
}

void write_json(const fs::path& p, const json& j)
{
  auto f = open_out(p);
  f << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// ingestion

struct Ingested
{
  std::vector<CatchSnapshot> snapshots;
  json report;
};

Ingested ingest(const RunConfig& c)
{
  const auto dir = out_dir(c);
  std::vector<fs::path> tracking;
  for (const auto& t : c.tracking) {
    tracking.emplace_back(t);
  }
  if (tracking.empty()) {
    tracking.push_back(dir / "tracking.csv");
  }
  for (const auto& t : tracking) {
    require_file(t, "synth (or pass --tracking)");
  }
  const fs::path games_path = c.games.empty() ? dir / "games.csv" : fs::path(c.games);
  const fs::path plays_path = c.plays.empty() ? dir / "plays.csv" : fs::path(c.plays);
  require_file(games_path, "synth (or pass --games)");
  require_file(plays_path, "synth (or pass --plays)");

  auto load = load_tracking(tracking);
  const auto games = load_games(games_path);
  const auto plays = load_plays(plays_path, games);
  EligibilityReport elig;
  Ingested out;
  out.snapshots = select_eligible_plays(plays, load.frames, &elig);

  std::map<std::string, std::size_t> reasons;
  for (const auto& r : load.rejected) {
    ++reasons[r.reason];
  }
  json rejected = json::array();
  for (std::size_t i = 0; i < load.rejected.size() && i < 100; ++i) {
    const auto& r = load.rejected[i];
    rejected.push_back({{"source", r.source}, {"line", r.line}, {"reason", r.reason}});
  }
  out.report = {{"tracking_rows", load.frames.size()},
                {"rejected_rows", load.rejected.size()},
                {"rejected_by_reason", reasons},
                {"rejected_examples", rejected},
                {"games", games.size()},
                {"plays", plays.size()},
                {"plays_with_tracking", elig.plays_seen},
                {"eligible_plays", elig.eligible},
                {"excluded_by_reason", elig.excluded}};
  spdlog::info("ingested {} tracking rows ({} rejected), {} eligible plays of {}", load.frames.size(),
               load.rejected.size(), elig.eligible, elig.plays_seen);
  return out;
}

std::vector<CatchSnapshot> read_snapshots(const RunConfig& c)
{
  auto f = open_in(out_dir(c) / "snapshots.csv", "features");
  auto snaps = read_snapshot_table(f);
  if (snaps.empty()) {
    throw CommandError("no_data", "snapshots.csv holds no eligible plays");
  }
  return snaps;
}

UtilityTable utility_table(const RunConfig& c)
{
  if (c.ep_table.empty()) {
    return UtilityTable::fallback();
  }
  return UtilityTable::from_csv(fs::path(c.ep_table));
}

struct TrainedForest
{
  rfcde::Forest forest;
  RoleSet roles;
};

TrainedForest load_forest(const RunConfig& c, const std::string& stem, const std::string& producer)
{
  const auto dir = out_dir(c);
  auto bin = open_in(dir / (stem + ".bin"), producer);
  auto meta_in = open_in(dir / (stem + ".json"), producer);
  TrainedForest t;
  t.forest = rfcde::Forest::load(bin);
  const auto meta = json::parse(meta_in);
  t.roles = meta.at("roles").get<RoleSet>();
  return t;
}

// ---------------------------------------------------------------------------
// commands

void cmd_ingest(const RunConfig& c)
{
  auto in = ingest(c);
  write_json(out_dir(c) / "ingest_report.json", in.report);
}

void cmd_features(const RunConfig& c)
{
  auto in = ingest(c);
  const auto dir = out_dir(c);
  write_json(dir / "ingest_report.json", in.report);
  {
    auto f = open_out(dir / "snapshots.csv");
    write_snapshot_table(f, in.snapshots);
  }
  {
    auto f = open_out(dir / "features.csv");
    write_feature_table(f, in.snapshots, parse_roles(c.yac_features));
  }
  {
    auto f = open_out(dir / "ghost_features.csv");
    write_feature_table(f, in.snapshots, parse_roles(c.ghost_features));
  }
}

void save_forest(const RunConfig& c, const std::string& stem, const rfcde::Forest& forest,
                 const RoleSet& roles, json meta)
{
  const auto dir = out_dir(c);
  {
    auto f = open_out(dir / (stem + ".bin"));
    forest.save(f);
  }
  meta["roles"] = roles;
  meta["n_train"] = forest.n_train();
  meta["n_trees"] = forest.trees().size();
  meta["feature_names"] = feature_names(roles);
  write_json(dir / (stem + ".json"), meta);
  if (c.forest_json) {
    auto f = open_out(dir / (stem + "_trees.json"));
    f << forest.to_json() << '\n';
  }
}

void cmd_train_yac(const RunConfig& c)
{
  const auto snaps = read_snapshots(c);
  const auto roles = parse_roles(c.yac_features);
  const auto set = yac_training_set(snaps, roles);
  if (set.clamped > 0) {
    spdlog::info("clamped {} YAC responses into the grid range", set.clamped);
  }
  const auto forest = rfcde::train(set.X, set.Y, c.yac.config(c.seed, c.workers));
  save_forest(c, "yac_forest", forest, roles, {{"kind", "yac"}, {"clamped_responses", set.clamped}});
  spdlog::info("trained YAC forest on {} plays", forest.n_train());
}

void cmd_train_ghost(const RunConfig& c)
{
  const auto snaps = read_snapshots(c);
  const auto roles = parse_roles(c.ghost_features);
  const auto data = harness::make_dataset(snaps, roles, harness::ModelKind::ghost2d);
  const auto forest = rfcde::train(data.X, data.Y, c.ghost.config(derive_seed(c.seed, {1}), c.workers));
  save_forest(c, "ghost_forest", forest, roles, {{"kind", "ghost2d"}});
  spdlog::info("trained ghost location forest on {} plays", forest.n_train());
}

GhostConfig ghost_config(const RunConfig& c, const RoleSet& yac_roles, const RoleSet& ghost_roles)
{
  GhostConfig g;
  g.samples = c.samples;
  g.grid = {c.extent_x, c.extent_y, c.spacing};
  g.yac_roles = yac_roles;
  g.ghost_roles = ghost_roles;
  g.seed = c.seed;
  g.workers = c.workers;
  return g;
}

void cmd_eval_play(const RunConfig& c)
{
  const auto snaps = read_snapshots(c);
  const auto yac = load_forest(c, "yac_forest", "train-yac");
  const auto ghost = load_forest(c, "ghost_forest", "train-ghost");
  const CatchSnapshot* target = nullptr;
  for (const auto& s : snaps) {
    if (s.context.game_id == c.game && s.context.play_id == c.play) {
      target = &s;
    }
  }
  if (!target) {
    throw CommandError("unknown_play", "play " + std::to_string(c.game) + "/" + std::to_string(c.play)
                                         + " is not among the eligible plays");
  }
  const auto table = utility_table(c);
  const auto pool = TrajectoryPool::from_snapshots(snaps);
  const auto e = expected_delta(*target, yac.forest, ghost.forest, table, pool,
                                ghost_config(c, yac.roles, ghost.roles));
  const auto dir = out_dir(c);
  const std::string tag = std::to_string(c.game) + "_" + std::to_string(c.play);
  {
    auto f = open_out(dir / ("ghost_grid_" + tag + ".csv"));
    write_ghost_grid(f, e);
  }
  {
    auto f = open_out(dir / ("ghost_samples_" + tag + ".csv"));
    write_ghost_samples(f, e);
  }
  {
    auto f = open_out(dir / ("ghost_summary_" + tag + ".csv"));
    write_ghost_summary(f, std::span(&e, 1));
  }
  spdlog::info("play {}: EPV at catch {:.3f}, E[delta] {:.3f}, percentile {:.3f}", tag, e.epv_catch,
               e.expected_delta, e.percentile);
}

void write_reports(const RunConfig& c, const std::vector<GhostEvaluation>& evals)
{
  const auto dir = out_dir(c);
  const auto board = harness::aggregate_players(evals, c.min_receptions);
  {
    auto f = open_out(dir / "leaderboard.csv");
    harness::write_leaderboard(f, board.players);
  }
  {
    auto f = open_out(dir / "player_scatter.csv");
    harness::write_player_scatter(f, board);
  }
  json corr = {{"players_in_scatter", board.scatter.size()},
               {"player_correlation", board.correlation},
               {"player_correlation_by_position", board.correlation_by_position}};
  if (!c.team_epa.empty()) {
    std::ifstream in(c.team_epa);
    if (!in) {
      throw CommandError("missing_input", "cannot read team EPA file " + c.team_epa, c.team_epa);
    }
    const auto teams = harness::aggregate_teams(evals, harness::load_team_epa(in));
    auto f = open_out(dir / "teams.csv");
    harness::write_teams(f, teams);
    corr["team_correlation"] = teams.correlation;
    corr["teams_missing_epa"] = teams.missing;
  }
  write_json(dir / "correlations.json", corr);
}

void cmd_eval_season(const RunConfig& c)
{
  auto snaps = read_snapshots(c);
  const auto yac = load_forest(c, "yac_forest", "train-yac");
  const auto ghost = load_forest(c, "ghost_forest", "train-ghost");
  const auto table = utility_table(c);
  const auto pool = TrajectoryPool::from_snapshots(snaps);
  auto cfg = ghost_config(c, yac.roles, ghost.roles);
  cfg.keep_samples = false;
  std::span<const CatchSnapshot> use(snaps);
  if (c.limit > 0 && c.limit < snaps.size()) {
    use = use.first(c.limit);
  }
  const auto evals = evaluate_plays(use, yac.forest, ghost.forest, table, pool, cfg);
  const auto dir = out_dir(c);
  {
    auto f = open_out(dir / "evaluations.csv");
    write_ghost_summary(f, evals);
  }
  {
    std::vector<PlayEpv> rows;
    for (const auto& e : evals) {
      rows.push_back({e.key, e.epv_catch, {}});
    }
    auto f = open_out(dir / "epv.csv");
    write_epv_rows(f, rows);
  }
  write_reports(c, evals);
  if (c.compare_observed) {
    auto obs_cfg = cfg;
    obs_cfg.mode = TrajectoryMode::observed;
    const auto obs = evaluate_plays(use, yac.forest, ghost.forest, table, pool, obs_cfg);
    {
      auto f = open_out(dir / "evaluations_observed_trajectory.csv");
      write_ghost_summary(f, obs);
    }
    write_json(dir / "trajectory_comparison.json",
               {{"plays", obs.size()}, {"correlation", harness::delta_correlation(evals, obs)}});
  }
  spdlog::info("evaluated {} of {} plays", evals.size(), use.size());
}

void cmd_report(const RunConfig& c)
{
  auto f = open_in(out_dir(c) / "evaluations.csv", "eval-season");
  write_reports(c, read_ghost_summary(f));
}

harness::HarnessConfig harness_config(const RunConfig& c, harness::ModelKind kind)
{
  harness::HarnessConfig h;
  h.forest = (kind == harness::ModelKind::yac ? c.yac : c.ghost).config(c.seed, 1);
  h.grid = {c.extent_x, c.extent_y, c.spacing};
  h.workers = c.workers;
  return h;
}

void cmd_cv(const RunConfig& c)
{
  const auto snaps = read_snapshots(c);
  const auto kind = harness::parse_model_kind(c.model);
  const auto sets = parse_feature_sets(c.feature_sets, kind);
  const auto report = harness::lowo_cv(snaps, sets, kind, harness_config(c, kind));
  const auto dir = out_dir(c);
  const std::string tag(harness::to_string(kind));
  {
    auto f = open_out(dir / ("cv_folds_" + tag + ".csv"));
    harness::write_cv_folds(f, report);
  }
  {
    auto f = open_out(dir / ("cv_summary_" + tag + ".csv"));
    harness::write_cv_summary(f, report);
  }
}

void cmd_sweep(const RunConfig& c)
{
  const auto snaps = read_snapshots(c);
  const auto kind = harness::parse_model_kind(c.model);
  const auto sets = parse_feature_sets(c.feature_sets, kind);
  const auto rows = harness::week_sweep(snaps, sets.front(), kind, harness_config(c, kind));
  auto f = open_out(out_dir(c) / ("sweep_" + std::string(harness::to_string(kind)) + ".csv"));
  harness::write_sweep(f, rows);
}

void cmd_synth(const RunConfig& c)
{
  auto cfg = c.synth;
  cfg.seed = c.seed;
  const auto data = synth::generate(cfg);
  synth::write_dataset(out_dir(c), data);
  spdlog::info("wrote {} synthetic plays over {} weeks to {}", data.plays.size(), cfg.weeks, c.out);
}

void add_forest_options(CLI::App& app, ForestOptions& f, const std::string& prefix, const std::string& what)
{
  app.add_option("--" + prefix + "-trees", f.trees, "trees in the " + what + " forest")
    ->check(CLI::PositiveNumber)
    ->capture_default_str();
  app.add_option("--" + prefix + "-min-leaf", f.min_leaf, "minimum leaf size")
    ->check(CLI::PositiveNumber)
    ->capture_default_str();
  app.add_option("--" + prefix + "-mtry", f.mtry, "features tried per split (0: ceil(sqrt(p)))")
    ->capture_default_str();
  app.add_option("--" + prefix + "-basis", f.basis, "cosine basis size per response dimension")
    ->check(CLI::PositiveNumber)
    ->capture_default_str();
  app.add_option("--" + prefix + "-max-depth", f.max_depth, "maximum depth (0: unlimited)")
    ->capture_default_str();
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Counterfactual ghost-defender evaluation of completed passes"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML/INI file with option values (keys are long option names)");

  RunConfig c;
  app.add_option("--out", c.out, "output directory")->envname("GHOSTCDE_OUT")->capture_default_str();
  app.add_option("--tracking", c.tracking, "tracking CSV files")->envname("GHOSTCDE_TRACKING")->delimiter(',');
  app.add_option("--plays", c.plays, "plays CSV")->envname("GHOSTCDE_PLAYS");
  app.add_option("--games", c.games, "games CSV")->envname("GHOSTCDE_GAMES");
  app.add_option("--ep-table", c.ep_table, "expected points table (default: built-in curve)")
    ->envname("GHOSTCDE_EP_TABLE");
  app.add_option("--team-epa", c.team_epa, "team defensive EPA file (team,epa)")->envname("GHOSTCDE_TEAM_EPA");
  app.add_option("--workers", c.workers, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--seed", c.seed, "root random seed")->capture_default_str();
  app.add_option("--log-level", c.log_level, "trace|debug|info|warn|error|off")->capture_default_str();
  add_forest_options(app, c.yac, "yac", "YAC");
  add_forest_options(app, c.ghost, "ghost", "ghost location");
  app.add_option("--yac-features", c.yac_features, "roles of the YAC model")->capture_default_str();
  app.add_option("--ghost-features", c.ghost_features, "roles of the ghost location model")
    ->capture_default_str();
  app.add_option("--feature-sets", c.feature_sets, "candidate sets for cv/sweep, name=rec+qb+def1");
  app.add_option("--samples", c.samples, "trajectory samples per ghost location")
    ->check(CLI::PositiveNumber)
    ->capture_default_str();
  app.add_option("--grid-extent-x", c.extent_x, "ghost grid half-width along the field (yards)")
    ->capture_default_str();
  app.add_option("--grid-extent-y", c.extent_y, "ghost grid half-width across the field (yards)")
    ->capture_default_str();
  app.add_option("--grid-spacing", c.spacing, "ghost grid spacing (yards)")->capture_default_str();
  app.add_option("--min-receptions", c.min_receptions, "receptions needed for the player scatter")
    ->capture_default_str();

  auto* ingest_cmd = app.add_subcommand("ingest", "validate tracking, plays and games files");
  auto* features_cmd = app.add_subcommand("features", "select eligible plays and write feature tables");
  auto* train_yac_cmd = app.add_subcommand("train-yac", "train the YAC density forest");
  auto* train_ghost_cmd = app.add_subcommand("train-ghost", "train the 2D ghost location forest");
  for (auto* sub : {train_yac_cmd, train_ghost_cmd}) {
    sub->add_flag("--json", c.forest_json, "also write the trees as JSON");
  }
  auto* eval_play_cmd = app.add_subcommand("eval-play", "ghost evaluation of a single play");
  eval_play_cmd->add_option("--game", c.game, "game id")->required();
  eval_play_cmd->add_option("--play", c.play, "play id")->required();
  auto* eval_season_cmd = app.add_subcommand("eval-season", "ghost evaluation of every eligible play");
  eval_season_cmd->add_option("--limit", c.limit, "evaluate only the first N plays (0: all)");
  eval_season_cmd->add_flag("--compare-observed", c.compare_observed,
                            "also evaluate with the observed trajectory and correlate");
  auto* cv_cmd = app.add_subcommand("cv", "leave-one-week-out cross validation of feature sets");
  auto* sweep_cmd = app.add_subcommand("sweep", "metrics against the number of training weeks");
  for (auto* sub : {cv_cmd, sweep_cmd}) {
    sub->add_option("--model", c.model, "yac or ghost2d")->capture_default_str();
  }
  auto* report_cmd = app.add_subcommand("report", "player and team tables from evaluations.csv");
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic dataset in tracking-file layout");
  synth_cmd->add_option("--n-plays", c.synth.n_plays, "number of plays")->capture_default_str();
  synth_cmd->add_option("--weeks", c.synth.weeks, "number of weeks")->capture_default_str();
  synth_cmd->add_option("--teams", c.synth.teams, "number of teams (even)")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  spdlog::set_default_logger(spdlog::stderr_logger_mt("ghostcde"));
  spdlog::set_level(spdlog::level::from_str(c.log_level));

  const std::map<CLI::App*, void (*)(const RunConfig&)> handlers{
    {ingest_cmd, cmd_ingest},         {features_cmd, cmd_features},   {train_yac_cmd, cmd_train_yac},
    {train_ghost_cmd, cmd_train_ghost}, {eval_play_cmd, cmd_eval_play}, {eval_season_cmd, cmd_eval_season},
    {cv_cmd, cmd_cv},                 {sweep_cmd, cmd_sweep},         {report_cmd, cmd_report},
    {synth_cmd, cmd_synth}};
  auto* chosen = app.get_subcommands().front();
  const std::string name = chosen->get_name();
  try {
    fs::create_directories(out_dir(c));
    {
      auto f = open_out(out_dir(c) / ("run_config_" + name + ".toml"));
      f << app.config_to_str(true, false);
    }
    handlers.at(chosen)(c);
  } catch (const CommandError& e) {
    json err = {{"status", "error"}, {"command", name}, {"error", e.kind}, {"message", e.what()}};
    if (!e.artifact.empty()) {
      err["artifact"] = e.artifact;
    }
    if (!e.produced_by.empty()) {
      err["produced_by"] = e.produced_by;
    }
    std::cerr << err.dump() << '\n';
    return e.kind == "missing_prerequisite" ? 3 : 2;
  } catch (const std::exception& e) {
    std::cerr << json{{"status", "error"}, {"command", name}, {"error", "failed"}, {"message", e.what()}}.dump()
              << '\n';
    return 1;
  }
  return 0;
}
