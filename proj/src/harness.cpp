#include "ghostcde/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>
#include <stdexcept>

#include "ghostcde/csv.hpp"
#include "ghostcde/epv.hpp"
#include "ghostcde/parallel.hpp"

namespace ghostcde::harness {

namespace {

// log density floor for the cross-entropy when a location lies far outside the
// kernel support
constexpr double kMinDensity = 1e-300;

std::vector<int> distinct_weeks(const std::vector<int>& weeks)
{
  std::set<int> s(weeks.begin(), weeks.end());
  return {s.begin(), s.end()};
}

rfcde::Forest fit(const Dataset& data, std::span<const std::size_t> rows, const HarnessConfig& config)
{
  auto c = config.forest;
  c.workers = 1;
  return rfcde::train(data.X.select_rows(rows), data.Y.select_rows(rows), c);
}

} // namespace

std::string_view to_string(ModelKind k)
{
  return k == ModelKind::yac ? "yac" : "ghost2d";
}

ModelKind parse_model_kind(std::string_view text)
{
  if (text == "yac") {
    return ModelKind::yac;
  }
  if (text == "ghost2d" || text == "ghost") {
    return ModelKind::ghost2d;
  }
  throw std::invalid_argument("unknown model kind '" + std::string(text) + "'");
}

Dataset make_dataset(std::span<const CatchSnapshot> snapshots, const RoleSet& roles, ModelKind kind)
{
  check_roles(roles);
  Dataset d;
  const std::size_t p = feature_names(roles).size();
  const std::size_t q = kind == ModelKind::yac ? 1 : 2;
  std::vector<double> x;
  std::vector<double> y;
  x.reserve(snapshots.size() * p);
  for (const auto& s : snapshots) {
    const auto fv = build_feature_vector(s, roles);
    x.insert(x.end(), fv.values.begin(), fv.values.end());
    if (kind == ModelKind::yac) {
      y.push_back(clamp_yac(s.observed_yac, s.receiver.pos.x_adj));
    } else {
      const auto& d1 = role_state(s, "def1");
      y.push_back(d1.pos.x_adj);
      y.push_back(d1.pos.y_adj);
    }
    d.keys.push_back(s.key());
    d.weeks.push_back(s.context.week);
    d.catch_x_adj.push_back(s.receiver.pos.x_adj);
    d.receiver.push_back(s.receiver.pos);
  }
  d.X = rfcde::Matrix(snapshots.size(), p, std::move(x));
  d.Y = rfcde::Matrix(snapshots.size(), q, std::move(y));
  return d;
}

std::vector<std::string> metric_names(ModelKind kind)
{
  if (kind == ModelKind::yac) {
    return {"cde_loss", "rmse_mean", "rmse_mode"};
  }
  return {"cross_entropy", "dist_mean", "dist_mode"};
}

std::map<std::string, double> evaluate_metrics(const rfcde::Forest& forest, const Dataset& data,
                                               std::span<const std::size_t> test, ModelKind kind,
                                               const HarnessConfig& config)
{
  if (test.empty()) {
    throw std::invalid_argument("empty test set");
  }
  const std::size_t m = test.size();
  std::map<std::string, double> out;
  std::vector<double> a(m);
  std::vector<double> b(m);
  std::vector<double> c(m);
  if (kind == ModelKind::yac) {
    double hi = kMinYac + 1.0;
    for (double cx : data.catch_x_adj) {
      hi = std::max(hi, std::floor(cx) + kYacPadding);
    }
    const auto n = static_cast<std::size_t>(std::floor((hi - kMinYac) / config.loss_grid_step)) + 1;
    const auto loss_grid = rfcde::Grid::uniform(kMinYac, kMinYac + (n - 1) * config.loss_grid_step, n);
    out["cde_loss"] = rfcde::cde_loss(forest, data.X.select_rows(test), data.Y.select_rows(test),
                                      loss_grid, config.workers);
    parallel_for(m, config.workers, [&](std::size_t i) {
      const std::size_t r = test[i];
      const auto g = build_yac_grid(data.catch_x_adj[r]);
      const auto d = rfcde::predict_density(forest, data.X.row(r), g.grid(), std::nullopt, true);
      const double y = data.Y(r, 0);
      a[i] = std::pow(rfcde::density_mean(d)[0] - y, 2);
      b[i] = std::pow(rfcde::density_mode(d)[0] - y, 2);
    });
    out["rmse_mean"] = std::sqrt(std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(m));
    out["rmse_mode"] = std::sqrt(std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(m));
    return out;
  }
  parallel_for(m, config.workers, [&](std::size_t i) {
    const std::size_t r = test[i];
    const double obs[2] = {data.Y(r, 0), data.Y(r, 1)};
    a[i] = -std::log(std::max(forest.density_at(data.X.row(r), obs), kMinDensity));
    auto grid = make_ghost_grid(data.receiver[r], config.grid);
    const auto d = rfcde::predict_density(forest, data.X.row(r), grid.lattice, std::nullopt, true);
    const auto mean = rfcde::density_mean(d);
    const auto mode = rfcde::density_mode(d);
    b[i] = std::hypot(mean[0] - obs[0], mean[1] - obs[1]);
    c[i] = std::hypot(mode[0] - obs[0], mode[1] - obs[1]);
  });
  const double dm = static_cast<double>(m);
  out["cross_entropy"] = std::accumulate(a.begin(), a.end(), 0.0) / dm;
  out["dist_mean"] = std::accumulate(b.begin(), b.end(), 0.0) / dm;
  out["dist_mode"] = std::accumulate(c.begin(), c.end(), 0.0) / dm;
  return out;
}

std::pair<double, double> mean_and_se(std::span<const double> values)
{
  const auto n = static_cast<double>(values.size());
  if (values.empty()) {
    return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  }
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) {
    return {mean, std::numeric_limits<double>::quiet_NaN()};
  }
  double ss = 0.0;
  for (double v : values) {
    ss += (v - mean) * (v - mean);
  }
  return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

CvReport lowo_cv(std::span<const CatchSnapshot> snapshots, std::span<const FeatureSet> feature_sets,
                 ModelKind kind, const HarnessConfig& config)
{
  CvReport report;
  report.kind = kind;
  for (const auto& fs : feature_sets) {
    const auto data = make_dataset(snapshots, fs.roles, kind);
    const auto weeks = distinct_weeks(data.weeks);
    if (weeks.size() < 2) {
      throw std::invalid_argument("LOWO cross validation needs at least two weeks");
    }
    FeatureSetReport fr;
    fr.name = fs.name;
    fr.folds.resize(weeks.size());
    HarnessConfig inner = config;
    inner.workers = 1;
    parallel_for(weeks.size(), config.workers, [&](std::size_t k) {
      std::vector<std::size_t> train;
      std::vector<std::size_t> test;
      for (std::size_t i = 0; i < data.weeks.size(); ++i) {
        (data.weeks[i] == weeks[k] ? test : train).push_back(i);
      }
      const auto forest = fit(data, train, inner);
      auto& fold = fr.folds[k];
      fold.week = weeks[k];
      fold.n_train = train.size();
      for (auto i : test) {
        fold.test_keys.push_back(data.keys[i]);
      }
      fold.metrics = evaluate_metrics(forest, data, test, kind, inner);
    });
    for (const auto& name : metric_names(kind)) {
      std::vector<double> v;
      for (const auto& f : fr.folds) {
        v.push_back(f.metrics.at(name));
      }
      auto [mean, se] = mean_and_se(v);
      fr.mean[name] = mean;
      fr.se[name] = se;
    }
    report.sets.push_back(std::move(fr));
  }
  return report;
}

std::vector<std::vector<int>> sweep_prefixes(std::vector<int> weeks)
{
  std::sort(weeks.begin(), weeks.end());
  weeks.erase(std::unique(weeks.begin(), weeks.end()), weeks.end());
  if (weeks.size() < 3) {
    throw std::invalid_argument("week sweep needs at least three weeks");
  }
  std::vector<std::vector<int>> out;
  for (std::size_t k = 1; k < weeks.size(); ++k) {
    out.emplace_back(weeks.begin(), weeks.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return out;
}

std::vector<SweepRow> week_sweep(std::span<const CatchSnapshot> snapshots, const FeatureSet& features,
                                 ModelKind kind, const HarnessConfig& config)
{
  const auto data = make_dataset(snapshots, features.roles, kind);
  const auto prefixes = sweep_prefixes(data.weeks);
  const int test_week = distinct_weeks(data.weeks).back();
  std::vector<std::size_t> test;
  for (std::size_t i = 0; i < data.weeks.size(); ++i) {
    if (data.weeks[i] == test_week) {
      test.push_back(i);
    }
  }
  std::vector<SweepRow> rows(prefixes.size());
  HarnessConfig inner = config;
  inner.workers = 1;
  parallel_for(prefixes.size(), config.workers, [&](std::size_t k) {
    const std::set<int> use(prefixes[k].begin(), prefixes[k].end());
    std::vector<std::size_t> train;
    for (std::size_t i = 0; i < data.weeks.size(); ++i) {
      if (use.count(data.weeks[i])) {
        train.push_back(i);
      }
    }
    auto& row = rows[k];
    row.train_weeks = prefixes[k];
    row.test_week = test_week;
    row.n_train = train.size();
    row.n_test = test.size();
    row.metrics = evaluate_metrics(fit(data, train, inner), data, test, kind, inner);
  });
  return rows;
}

// ---------------------------------------------------------------------------

double pearson(std::span<const double> x, std::span<const double> y)
{
  const std::size_t n = std::min(x.size(), y.size());
  if (n < 2) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  return sxy / std::sqrt(sxx * syy);
}

Leaderboard aggregate_players(std::span<const GhostEvaluation> evals, std::size_t min_receptions)
{
  std::map<std::int64_t, PlayerSummary> by_id;
  for (const auto& e : evals) {
    if (!e.def1_id) {
      continue;
    }
    auto& p = by_id[*e.def1_id];
    p.player_id = *e.def1_id;
    if (p.name.empty()) {
      p.name = e.def1_name;
      p.position = e.def1_position;
      p.team = e.defensive_team;
    }
    ++p.receptions;
    p.total_delta += e.expected_delta;
    p.total_yac += e.observed_yac;
  }
  Leaderboard board;
  for (auto& [id, p] : by_id) {
    p.avg_delta = p.total_delta / static_cast<double>(p.receptions);
    p.avg_yac = p.total_yac / static_cast<double>(p.receptions);
    board.players.push_back(p);
  }
  std::stable_sort(board.players.begin(), board.players.end(),
                   [](const PlayerSummary& a, const PlayerSummary& b) {
                     if (a.total_delta != b.total_delta) {
                       return a.total_delta < b.total_delta;
                     }
                     return a.player_id < b.player_id;
                   });
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_pos;
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& p : board.players) {
    if (p.receptions >= min_receptions) {
      board.scatter.push_back(p);
      xs.push_back(p.avg_delta);
      ys.push_back(p.avg_yac);
      by_pos[p.position].first.push_back(p.avg_delta);
      by_pos[p.position].second.push_back(p.avg_yac);
    }
  }
  board.correlation = pearson(xs, ys);
  for (const auto& [pos, v] : by_pos) {
    board.correlation_by_position[pos] = pearson(v.first, v.second);
  }
  return board;
}

std::map<std::string, double> load_team_epa(std::istream& in)
{
  csv::Reader reader(in);
  const auto c_team = reader.column("team");
  const auto c_epa = reader.column("epa");
  if (!c_team || !c_epa) {
    throw std::runtime_error("team EPA file needs columns 'team' and 'epa'");
  }
  std::map<std::string, double> out;
  csv::Record rec;
  while (reader.next(rec)) {
    if (rec.fields.size() != reader.header().size()) {
      throw std::runtime_error("team EPA file line " + std::to_string(rec.line) + ": wrong field count");
    }
    auto v = csv::parse_double(rec.fields[*c_epa]);
    if (!v) {
      throw std::runtime_error("team EPA file line " + std::to_string(rec.line) + ": bad epa");
    }
    out[rec.fields[*c_team]] = *v;
  }
  return out;
}

TeamReport aggregate_teams(std::span<const GhostEvaluation> evals,
                           const std::map<std::string, double>& epa)
{
  std::map<std::string, TeamSummary> by_team;
  for (const auto& e : evals) {
    auto& t = by_team[e.defensive_team];
    t.team = e.defensive_team;
    ++t.plays;
    t.total_delta += e.expected_delta;
  }
  TeamReport r;
  std::vector<double> xs;
  std::vector<double> ys;
  for (auto& [name, t] : by_team) {
    t.avg_delta = t.total_delta / static_cast<double>(t.plays);
    if (auto it = epa.find(name); it != epa.end()) {
      t.epa = it->second;
      xs.push_back(t.avg_delta);
      ys.push_back(it->second);
    } else {
      r.missing.push_back(name);
    }
    r.teams.push_back(t);
  }
  r.correlation = pearson(xs, ys);
  return r;
}

double delta_correlation(std::span<const GhostEvaluation> a, std::span<const GhostEvaluation> b)
{
  std::map<PlayKey, double> lookup;
  for (const auto& e : b) {
    lookup[e.key] = e.expected_delta;
  }
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& e : a) {
    if (auto it = lookup.find(e.key); it != lookup.end()) {
      xs.push_back(e.expected_delta);
      ys.push_back(it->second);
    }
  }
  return pearson(xs, ys);
}

// ---------------------------------------------------------------------------

void write_cv_folds(std::ostream& out, const CvReport& r)
{
  csv::write_row(out, {"model", "feature_set", "week", "n_train", "n_test", "metric", "value"});
  for (const auto& s : r.sets) {
    for (const auto& f : s.folds) {
      for (const auto& [name, v] : f.metrics) {
        csv::write_row(out, {std::string(to_string(r.kind)), s.name, std::to_string(f.week),
                             std::to_string(f.n_train), std::to_string(f.test_keys.size()), name,
                             csv::format_double(v)});
      }
    }
  }
}

void write_cv_summary(std::ostream& out, const CvReport& r)
{
  csv::write_row(out, {"model", "feature_set", "metric", "mean", "se", "folds"});
  for (const auto& s : r.sets) {
    for (const auto& name : metric_names(r.kind)) {
      csv::write_row(out, {std::string(to_string(r.kind)), s.name, name,
                           csv::format_double(s.mean.at(name)), csv::format_double(s.se.at(name)),
                           std::to_string(s.folds.size())});
    }
  }
}

void write_sweep(std::ostream& out, std::span<const SweepRow> rows)
{
  csv::write_row(out, {"train_weeks", "last_train_week", "test_week", "n_train", "n_test", "metric", "value"});
  for (const auto& row : rows) {
    for (const auto& [name, v] : row.metrics) {
      csv::write_row(out, {std::to_string(row.train_weeks.size()), std::to_string(row.train_weeks.back()),
                           std::to_string(row.test_week), std::to_string(row.n_train),
                           std::to_string(row.n_test), name, csv::format_double(v)});
    }
  }
}

void write_leaderboard(std::ostream& out, std::span<const PlayerSummary> rows)
{
  csv::write_row(out, {"rank", "player_id", "name", "position", "team", "receptions", "total_delta",
                       "avg_delta", "total_yac", "avg_yac"});
  std::size_t rank = 0;
  for (const auto& p : rows) {
    csv::write_row(out, {std::to_string(++rank), std::to_string(p.player_id), p.name, p.position, p.team,
                         std::to_string(p.receptions), csv::format_double(p.total_delta),
                         csv::format_double(p.avg_delta), csv::format_double(p.total_yac),
                         csv::format_double(p.avg_yac)});
  }
}

void write_player_scatter(std::ostream& out, const Leaderboard& board)
{
  csv::write_row(out, {"player_id", "position", "receptions", "avg_delta", "avg_yac"});
  for (const auto& p : board.scatter) {
    csv::write_row(out, {std::to_string(p.player_id), p.position, std::to_string(p.receptions),
                         csv::format_double(p.avg_delta), csv::format_double(p.avg_yac)});
  }
}

void write_teams(std::ostream& out, const TeamReport& r)
{
  csv::write_row(out, {"team", "plays", "total_delta", "avg_delta", "epa"});
  for (const auto& t : r.teams) {
    csv::write_row(out, {t.team, std::to_string(t.plays), csv::format_double(t.total_delta),
                         csv::format_double(t.avg_delta), t.epa ? csv::format_double(*t.epa) : "NA"});
  }
}

} // namespace ghostcde::harness
