#include "ghostcde/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

#include "ghostcde/csv.hpp"
#include "ghostcde/rng.hpp"

namespace ghostcde::synth {

namespace {

constexpr int kThrowFrame = 10;
constexpr int kCatchFrame = 20;
constexpr int kEndFrame = 30;
constexpr std::int64_t kFirstGameId = 2018000000;
constexpr const char* kDefensePositions[] = {"CB", "CB", "CB", "SS", "FS", "OLB", "ILB", "OLB"};
constexpr const char* kReceiverPositions[] = {"WR", "WR", "WR", "TE", "RB"};
constexpr std::size_t kOtherDefenders = 6;

double round2(double v)
{
  return std::round(v * 100.0) / 100.0;
}

double round_angle(double v)
{
  v = round2(std::fmod(std::fmod(v, 360.0) + 360.0, 360.0));
  return v >= 360.0 ? 0.0 : v;
}

std::string team_code(int t)
{
  return fmt::format("T{:02d}", t + 1);
}

//! Raw field position of an adjusted point.
std::array<double, 2> raw_point(const AdjustedPoint& p, PlayDirection d)
{
  if (d == PlayDirection::left) {
    return {p.x_adj + 10.0, kFieldCenterY - p.y_adj};
  }
  return {110.0 - p.x_adj, kFieldCenterY + p.y_adj};
}

bool inside(const AdjustedPoint& p)
{
  return p.x_adj > -9.9 && p.x_adj < 109.9 && std::fabs(p.y_adj) < 26.5;
}

//! Round-robin pairings (circle method) for one week.
std::vector<std::pair<int, int>> pairings(int teams, int week)
{
  std::vector<int> ring(static_cast<std::size_t>(teams - 1));
  for (int i = 0; i < teams - 1; ++i) {
    ring[static_cast<std::size_t>(i)] = 1 + (i + week) % (teams - 1);
  }
  std::vector<int> order{0};
  order.insert(order.end(), ring.begin(), ring.end());
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < teams / 2; ++i) {
    out.emplace_back(order[static_cast<std::size_t>(i)],
                     order[static_cast<std::size_t>(teams - 1 - i)]);
  }
  return out;
}

struct Actor
{
  std::int64_t id = 0;
  std::string position;
  std::string side; // "home" / "away"
  AdjustedPoint at_throw;
  AdjustedPoint at_catch;
  AdjustedPoint at_end;
  double s = 0.0;
  double a = 0.0;
  double dir = 0.0;
  double o = 0.0;
};

AdjustedPoint snap_to_tracking(const AdjustedPoint& p, PlayDirection d)
{
  auto r = raw_point(p, d);
  return adjusted_coordinates(round2(r[0]), round2(r[1]), d);
}

//! Position one second earlier along a raw compass heading.
AdjustedPoint back_along(const AdjustedPoint& p, double s, double dir, PlayDirection d)
{
  auto r = raw_point(p, d);
  const double rad = dir * std::numbers::pi / 180.0;
  const double x = std::clamp(r[0] - s * std::sin(rad), 0.5, kFieldLength - 0.5);
  const double y = std::clamp(r[1] - s * std::cos(rad), 0.5, kFieldWidth - 0.5);
  return adjusted_coordinates(x, y, d);
}

} // namespace

void SynthConfig::validate() const
{
  if (weeks < 1) {
    throw std::invalid_argument("synth: weeks must be >= 1");
  }
  if (teams < 2 || teams % 2 != 0) {
    throw std::invalid_argument("synth: teams must be an even number >= 2");
  }
  if (!(catch_x_min > 0.0) || !(catch_x_max > catch_x_min) || catch_x_max > 90.0) {
    throw std::invalid_argument("synth: catch range must satisfy 0 < min < max <= 90");
  }
  if (!(rec_y_max >= 0.0) || rec_y_max > 20.0) {
    throw std::invalid_argument("synth: rec_y_max must be in [0, 20]");
  }
  if (!(rec_speed_min >= 0.0) || !(rec_speed_max > rec_speed_min)) {
    throw std::invalid_argument("synth: receiver speed range is degenerate");
  }
  if (!(yac_sd > 0.0) || yac_sd_per_yard < 0.0 || !(def1_sd > 0.0)) {
    throw std::invalid_argument("synth: standard deviations must be positive");
  }
  if (!(others_min_distance > 0.0) || others_min_distance > 20.0) {
    throw std::invalid_argument("synth: others_min_distance must be in (0, 20]");
  }
}

SynthData generate(const SynthConfig& config)
{
  config.validate();
  SynthData data;
  const int per_week = config.teams / 2;
  for (int w = 1; w <= config.weeks; ++w) {
    const auto pairs = pairings(config.teams, w);
    for (int g = 0; g < per_week; ++g) {
      GameInfo gi;
      gi.game_id = kFirstGameId + w * 100 + g;
      gi.home_team = team_code(pairs[static_cast<std::size_t>(g)].first);
      gi.visitor_team = team_code(pairs[static_cast<std::size_t>(g)].second);
      gi.week = w;
      data.games.push_back(gi);
    }
  }

  for (std::size_t i = 0; i < config.n_plays; ++i) {
    Rng rng(derive_seed(config.seed, {i}));
    const int week = 1 + static_cast<int>(i * static_cast<std::size_t>(config.weeks) / config.n_plays);
    const int game_index = static_cast<int>(i % static_cast<std::size_t>(per_week));
    const auto& game = data.games[static_cast<std::size_t>((week - 1) * per_week + game_index)];
    const bool home_offense = rng.uniform() < 0.5;
    const auto dir = rng.uniform() < 0.5 ? PlayDirection::left : PlayDirection::right;
    const int off_team = std::stoi(home_offense ? game.home_team.substr(1) : game.visitor_team.substr(1)) - 1;
    const int def_team = std::stoi(home_offense ? game.visitor_team.substr(1) : game.home_team.substr(1)) - 1;
    const std::string off_side = home_offense ? "home" : "away";
    const std::string def_side = home_offense ? "away" : "home";

    PlayContext ctx;
    ctx.game_id = game.game_id;
    ctx.play_id = 1000 + static_cast<std::int64_t>(i);
    ctx.week = week;
    ctx.play_direction = dir;
    ctx.possession_team = team_code(off_team);
    ctx.defensive_team = team_code(def_team);
    ctx.home_team = game.home_team;
    ctx.visitor_team = game.visitor_team;
    ctx.quarter = 1 + static_cast<int>(rng.index(4));
    ctx.game_clock = fmt::format("{:02d}:{:02d}", rng.index(15), rng.index(60));
    ctx.pass_result = "C";

    // receiver at the catch
    const double catch_x = rng.uniform(config.catch_x_min, config.catch_x_max);
    const double rec_y = rng.uniform(-config.rec_y_max, config.rec_y_max);
    const double los = std::min(99.0, std::round(catch_x + rng.uniform(0.0, 12.0)));
    ctx.down = 1 + static_cast<int>(rng.index(4));
    ctx.yards_to_go = std::clamp(static_cast<double>(1 + rng.index(15)), 1.0, los);
    ctx.absolute_yardline = raw_point({los, 0.0}, dir)[0];

    std::vector<Actor> actors;
    const auto off_base = 10000 * static_cast<std::int64_t>(off_team + 1);
    const auto def_base = 10000 * static_cast<std::int64_t>(def_team + 1);

    Actor rec;
    const std::size_t rec_slot = rng.index(5);
    rec.id = off_base + 10 + static_cast<std::int64_t>(rec_slot);
    rec.position = kReceiverPositions[rec_slot];
    rec.side = off_side;
    rec.at_catch = snap_to_tracking({catch_x, rec_y}, dir);
    rec.s = round2(rng.uniform(config.rec_speed_min, config.rec_speed_max));
    rec.a = round2(rng.uniform(0.0, 3.0));
    rec.dir = round_angle(endzone_bearing(dir) + rng.normal(0.0, 30.0));
    rec.o = round_angle(rec.dir + rng.normal(0.0, 20.0));
    ctx.target_id = rec.id;

    Actor qb;
    qb.id = off_base + 1;
    qb.position = "QB";
    qb.side = off_side;
    qb.at_throw = snap_to_tracking({std::min(105.0, los + rng.uniform(5.0, 8.0)), rng.uniform(-3.0, 3.0)}, dir);
    qb.at_catch = qb.at_throw;
    qb.s = round2(rng.uniform(0.0, 2.0));
    qb.dir = round_angle(rng.uniform(0.0, 360.0));
    qb.o = round_angle(endzone_bearing(dir) + rng.normal(0.0, 15.0));

    // nearest defender
    Actor d1;
    const std::size_t d1_slot = rng.index(5);
    d1.id = def_base + 50 + static_cast<std::int64_t>(d1_slot);
    d1.position = kDefensePositions[d1_slot];
    d1.side = def_side;
    AdjustedPoint d1_pos;
    do {
      d1_pos = {rec.at_catch.x_adj + rng.normal(config.def1_mean_x, config.def1_sd),
                rec.at_catch.y_adj + rng.normal(config.def1_mean_y, config.def1_sd)};
    } while (!inside(d1_pos));
    d1.at_catch = snap_to_tracking(d1_pos, dir);
    d1.s = round2(rng.uniform(0.0, 8.0));
    d1.a = round2(rng.uniform(0.0, 3.0));
    d1.dir = round_angle(rng.uniform(0.0, 360.0));
    d1.o = round_angle(rng.uniform(0.0, 360.0));
    const double d1_dist = std::hypot(d1.at_catch.x_adj - rec.at_catch.x_adj,
                                      d1.at_catch.y_adj - rec.at_catch.y_adj);

    // remaining defenders, all farther away than def1
    std::vector<std::size_t> slots;
    for (std::size_t k = 0; k < std::size(kDefensePositions); ++k) {
      if (k != d1_slot) {
        slots.push_back(k);
      }
    }
    for (std::size_t k = 0; k < kOtherDefenders; ++k) {
      const std::size_t j = k + rng.index(slots.size() - k);
      std::swap(slots[k], slots[j]);
      Actor d;
      d.id = def_base + 50 + static_cast<std::int64_t>(slots[k]);
      d.position = kDefensePositions[slots[k]];
      d.side = def_side;
      const double lo = std::max(config.others_min_distance, d1_dist + 1.0);
      AdjustedPoint p;
      do {
        const double r = rng.uniform(lo, lo + 13.0);
        const double t = rng.uniform(0.0, 2.0 * std::numbers::pi);
        p = {rec.at_catch.x_adj + r * std::cos(t), rec.at_catch.y_adj + r * std::sin(t)};
      } while (!inside(p));
      d.at_catch = snap_to_tracking(p, dir);
      d.s = round2(rng.uniform(0.0, 8.0));
      d.a = round2(rng.uniform(0.0, 3.0));
      d.dir = round_angle(rng.uniform(0.0, 360.0));
      d.o = round_angle(rng.uniform(0.0, 360.0));
      actors.push_back(d);
    }

    // two more offensive players away from the catch
    std::vector<std::size_t> off_slots;
    for (std::size_t k = 0; k < std::size(kReceiverPositions); ++k) {
      if (k != rec_slot) {
        off_slots.push_back(k);
      }
    }
    for (std::size_t k = 0; k < 2; ++k) {
      Actor o;
      o.id = off_base + 10 + static_cast<std::int64_t>(off_slots[k]);
      o.position = kReceiverPositions[off_slots[k]];
      o.side = off_side;
      AdjustedPoint p;
      do {
        p = {rec.at_catch.x_adj + rng.uniform(-15.0, 15.0), rng.uniform(-25.0, 25.0)};
      } while (!inside(p));
      o.at_catch = snap_to_tracking(p, dir);
      o.s = round2(rng.uniform(0.0, 8.0));
      o.dir = round_angle(rng.uniform(0.0, 360.0));
      o.o = round_angle(rng.uniform(0.0, 360.0));
      actors.push_back(o);
    }

    // outcome
    PlayTruth truth;
    truth.key = ctx.key();
    truth.week = week;
    truth.catch_x_adj = rec.at_catch.x_adj;
    truth.def1_distance = d1_dist;
    truth.rec_speed = rec.s;
    truth.yac_mean = config.yac_intercept + config.yac_per_yard * d1_dist + config.yac_per_speed * rec.s;
    truth.yac_sd = config.yac_sd + config.yac_sd_per_yard * d1_dist;
    const double raw_yac = rng.normal(truth.yac_mean, truth.yac_sd);
    truth.yac = std::clamp(raw_yac, -10.0, truth.catch_x_adj);
    truth.clamped = truth.yac != raw_yac;
    truth.def1_id = d1.id;
    rec.at_end = snap_to_tracking({truth.catch_x_adj - truth.yac, rec.at_catch.y_adj}, dir);
    const bool touchdown = rec.at_end.x_adj <= 0.0;

    actors.push_back(rec);
    actors.push_back(qb);
    actors.push_back(d1);
    for (auto& a : actors) {
      if (a.id != qb.id) {
        a.at_throw = back_along(a.at_catch, a.s, a.dir, dir);
      }
      if (a.id != rec.id) {
        a.at_end = a.at_catch;
      }
    }
    std::sort(actors.begin(), actors.end(), [](const Actor& l, const Actor& r) { return l.id < r.id; });

    auto event_at = [&](int f) -> std::string {
      switch (f) {
      case 1:
        return std::string(events::ball_snap);
      case kThrowFrame:
        return std::string(events::pass_forward);
      case kCatchFrame:
        return std::string(events::pass_caught);
      case kEndFrame:
        return std::string(touchdown ? events::touchdown : events::tackle);
      default:
        return {};
      }
    };
    auto position_at = [&](const Actor& a, int f) {
      if (f <= kThrowFrame) {
        return a.at_throw;
      }
      if (f == kCatchFrame) {
        return a.at_catch;
      }
      if (f == kEndFrame) {
        return a.at_end;
      }
      const auto& from = f < kCatchFrame ? a.at_throw : a.at_catch;
      const auto& to = f < kCatchFrame ? a.at_catch : a.at_end;
      const double t = (f < kCatchFrame ? f - kThrowFrame : f - kCatchFrame) / 10.0;
      return AdjustedPoint{from.x_adj + t * (to.x_adj - from.x_adj),
                           from.y_adj + t * (to.y_adj - from.y_adj)};
    };

    for (int f = 1; f <= kEndFrame; ++f) {
      for (const auto& a : actors) {
        TrackingFrame fr;
        fr.game_id = ctx.game_id;
        fr.play_id = ctx.play_id;
        fr.player_id = a.id;
        fr.frame_id = f;
        const auto raw = raw_point(position_at(a, f), dir);
        fr.x = round2(raw[0]);
        fr.y = round2(raw[1]);
        fr.s = a.s;
        fr.a = a.a;
        fr.dis = round2(a.s / 10.0);
        fr.o = a.o;
        fr.dir = a.dir;
        fr.event = event_at(f);
        fr.team = a.side;
        fr.position = a.position;
        fr.display_name = fmt::format("Player {}", a.id);
        fr.play_direction = dir;
        data.frames.push_back(std::move(fr));
      }
      // the ball travels from the quarterback to the receiver
      TrackingFrame ball;
      ball.game_id = ctx.game_id;
      ball.play_id = ctx.play_id;
      ball.frame_id = f;
      const Actor& carrier = f < kCatchFrame ? qb : rec;
      const auto raw = raw_point(f < kCatchFrame ? position_at(qb, std::min(f, kThrowFrame))
                                                 : position_at(carrier, f),
                                 dir);
      ball.x = round2(raw[0]);
      ball.y = round2(raw[1]);
      ball.event = event_at(f);
      ball.team = "football";
      ball.display_name = "Football";
      ball.play_direction = dir;
      data.frames.push_back(std::move(ball));
    }
    data.plays.push_back(std::move(ctx));
    data.truth.push_back(truth);
  }
  return data;
}

double true_yac_density(const PlayTruth& truth, double yac)
{
  const double z = (yac - truth.yac_mean) / truth.yac_sd;
  return std::exp(-0.5 * z * z) / (std::sqrt(2.0 * std::numbers::pi) * truth.yac_sd);
}

std::vector<double> true_yac_density(const PlayTruth& truth, const rfcde::Grid& grid)
{
  if (grid.dim() != 1) {
    throw std::invalid_argument("YAC density needs a 1D grid");
  }
  std::vector<double> out;
  out.reserve(grid.size());
  for (double y : grid.axes[0]) {
    out.push_back(true_yac_density(truth, y));
  }
  return out;
}

void write_games(std::ostream& out, std::span<const GameInfo> games)
{
  csv::write_row(out, {"gameId", "gameDate", "gameTimeEastern", "homeTeamAbbr", "visitorTeamAbbr", "week"});
  for (const auto& g : games) {
    csv::write_row(out, {std::to_string(g.game_id), fmt::format("09/{:02d}/2018", 1 + g.week),
                         "13:00:00", g.home_team, g.visitor_team, std::to_string(g.week)});
  }
}

void write_plays(std::ostream& out, std::span<const PlayContext> plays)
{
  csv::write_row(out, {"gameId", "playId", "playDescription", "quarter", "down", "yardsToGo",
                       "possessionTeam", "absoluteYardlineNumber", "gameClock", "preSnapHomeScore",
                       "preSnapVisitorScore", "passResult", "targetNflId"});
  for (const auto& p : plays) {
    csv::write_row(out, {std::to_string(p.game_id), std::to_string(p.play_id), "synthetic pass",
                         std::to_string(p.quarter), std::to_string(p.down),
                         csv::format_double(p.yards_to_go), p.possession_team,
                         csv::format_double(p.absolute_yardline), p.game_clock, "0", "0",
                         p.pass_result, p.target_id ? std::to_string(*p.target_id) : "NA"});
  }
}

void write_tracking(std::ostream& out, std::span<const TrackingFrame> frames)
{
  csv::write_row(out, {"x", "y", "s", "a", "dis", "o", "dir", "event", "nflId", "displayName",
                       "position", "frameId", "team", "gameId", "playId", "playDirection"});
  for (const auto& f : frames) {
    const bool ball = f.is_ball();
    csv::write_row(out, {csv::format_double(f.x), csv::format_double(f.y), csv::format_double(f.s),
                         csv::format_double(f.a), csv::format_double(f.dis),
                         ball ? "NA" : csv::format_double(f.o), ball ? "NA" : csv::format_double(f.dir),
                         f.event.empty() ? "None" : f.event,
                         ball ? "NA" : std::to_string(*f.player_id), f.display_name,
                         ball ? "NA" : f.position, std::to_string(f.frame_id), f.team,
                         std::to_string(f.game_id), std::to_string(f.play_id),
                         f.play_direction ? std::string(to_string(*f.play_direction)) : "NA"});
  }
}

void write_truth(std::ostream& out, std::span<const PlayTruth> truth)
{
  csv::write_row(out, {"game_id", "play_id", "week", "catch_x_adj", "def1_id", "def1_distance",
                       "rec_speed", "yac_mean", "yac_sd", "yac", "clamped"});
  for (const auto& t : truth) {
    csv::write_row(out, {std::to_string(t.key.game_id), std::to_string(t.key.play_id),
                         std::to_string(t.week), csv::format_double(t.catch_x_adj),
                         std::to_string(t.def1_id), csv::format_double(t.def1_distance),
                         csv::format_double(t.rec_speed), csv::format_double(t.yac_mean),
                         csv::format_double(t.yac_sd), csv::format_double(t.yac),
                         t.clamped ? "1" : "0"});
  }
}

void write_dataset(const std::filesystem::path& dir, const SynthData& data)
{
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) {
      throw std::runtime_error("cannot write " + (dir / name).string());
    }
    return f;
  };
  {
    auto f = open("games.csv");
    write_games(f, data.games);
  }
  {
    auto f = open("plays.csv");
    write_plays(f, data.plays);
  }
  {
    auto f = open("tracking.csv");
    write_tracking(f, data.frames);
  }
  {
    auto f = open("truth.csv");
    write_truth(f, data.truth);
  }
}

std::vector<CatchSnapshot> snapshots(const SynthData& data, EligibilityReport* report)
{
  std::map<PlayKey, PlayContext> plays;
  for (const auto& p : data.plays) {
    PlayContext c = p;
    plays[c.key()] = c;
  }
  return select_eligible_plays(plays, data.frames, report);
}

} // namespace ghostcde::synth
