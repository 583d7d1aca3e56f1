#include "ghostcde/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <set>
#include <stdexcept>
#include <tuple>

#include "ghostcde/csv.hpp"

namespace ghostcde {

std::string_view to_string(PlayDirection d)
{
  return d == PlayDirection::left ? "left" : "right";
}

PlayDirection parse_direction(std::string_view text)
{
  if (text == "left") {
    return PlayDirection::left;
  }
  if (text == "right") {
    return PlayDirection::right;
  }
  throw std::invalid_argument("unknown play direction '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// Loading

namespace {

std::size_t require_column(const csv::Reader& reader, const std::string& name,
                           std::string_view what)
{
  auto col = reader.column(name);
  if (!col) {
    throw std::runtime_error(std::string(what) + ": missing required column '" + name + "'");
  }
  return *col;
}

std::string normalize_event(std::string_view e)
{
  if (e.empty() || e == "None" || e == "NA") {
    return {};
  }
  return std::string(e);
}

// Wraps 360 onto 0; anything else outside [0, 360) is invalid.
std::optional<double> check_angle(double deg)
{
  if (deg == 360.0) {
    return 0.0;
  }
  if (deg < 0.0 || deg > 360.0) {
    return std::nullopt;
  }
  return deg;
}

std::ifstream open_input(const std::filesystem::path& file)
{
  std::ifstream in(file);
  if (!in) {
    throw std::runtime_error("cannot open '" + file.string() + "'");
  }
  return in;
}

} // namespace

TrackingLoad load_tracking(std::istream& in, const TrackingColumns& columns,
                           std::string_view source)
{
  csv::Reader reader(in);
  const auto c_game = require_column(reader, columns.game_id, "tracking");
  const auto c_play = require_column(reader, columns.play_id, "tracking");
  const auto c_player = require_column(reader, columns.player_id, "tracking");
  const auto c_frame = require_column(reader, columns.frame_id, "tracking");
  const auto c_x = require_column(reader, columns.x, "tracking");
  const auto c_y = require_column(reader, columns.y, "tracking");
  const auto c_s = require_column(reader, columns.s, "tracking");
  const auto c_a = require_column(reader, columns.a, "tracking");
  const auto c_dis = require_column(reader, columns.dis, "tracking");
  const auto c_o = require_column(reader, columns.o, "tracking");
  const auto c_dir = require_column(reader, columns.dir, "tracking");
  const auto c_event = require_column(reader, columns.event, "tracking");
  const auto c_team = reader.column(columns.team);
  const auto c_pos = reader.column(columns.position);
  const auto c_name = reader.column(columns.display_name);
  const auto c_pdir = reader.column(columns.play_direction);
  const std::size_t width = reader.header().size();

  TrackingLoad out;
  // last frame id per (game, play, player); the ball uses player -1
  std::map<std::tuple<std::int64_t, std::int64_t, std::int64_t>, int> last_frame;

  csv::Record rec;
  while (reader.next(rec)) {
    auto reject = [&](std::string reason) {
      out.rejected.push_back({std::string(source), rec.line, std::move(reason)});
    };
    if (rec.fields.size() != width) {
      reject("field_count");
      continue;
    }
    const auto& f = rec.fields;
    TrackingFrame fr;
    auto game = csv::parse_int(f[c_game]);
    auto play = csv::parse_int(f[c_play]);
    auto frame = csv::parse_int(f[c_frame]);
    if (!game || !play || !frame || *frame <= 0) {
      reject("bad_id");
      continue;
    }
    fr.game_id = *game;
    fr.play_id = *play;
    fr.frame_id = static_cast<int>(*frame);
    const std::string& pid = f[c_player];
    if (!(pid.empty() || pid == "NA")) {
      auto id = csv::parse_int(pid);
      if (!id) {
        reject("bad_id");
        continue;
      }
      fr.player_id = *id;
    }
    if (c_team) {
      fr.team = f[*c_team];
    }
    const bool ball = !fr.player_id || fr.team == "football";
    if (ball) {
      fr.player_id.reset();
    }

    auto x = csv::parse_double(f[c_x]);
    auto y = csv::parse_double(f[c_y]);
    if (!x || !y) {
      reject("bad_number");
      continue;
    }
    fr.x = *x;
    fr.y = *y;
    // the ball has no orientation; motion columns may be NA
    auto num = [&](std::size_t col, double& dst) {
      auto v = csv::parse_double(f[col]);
      if (!v) {
        if (ball) {
          dst = 0.0;
          return true;
        }
        return false;
      }
      dst = *v;
      return true;
    };
    if (!num(c_s, fr.s) || !num(c_a, fr.a) || !num(c_dis, fr.dis) || !num(c_o, fr.o)
        || !num(c_dir, fr.dir)) {
      reject("bad_number");
      continue;
    }
    if (fr.x < 0.0 || fr.x > kFieldLength || fr.y < 0.0 || fr.y > kFieldWidth) {
      reject("out_of_bounds");
      continue;
    }
    if (fr.s < 0.0 || fr.a < 0.0 || fr.dis < 0.0) {
      reject("negative_motion");
      continue;
    }
    auto o = check_angle(fr.o);
    auto d = check_angle(fr.dir);
    if (!o || !d) {
      reject("bad_angle");
      continue;
    }
    fr.o = *o;
    fr.dir = *d;
    fr.event = normalize_event(f[c_event]);
    if (c_pos) {
      fr.position = f[*c_pos] == "NA" ? std::string() : f[*c_pos];
    }
    if (c_name) {
      fr.display_name = f[*c_name];
    }
    if (c_pdir && !f[*c_pdir].empty()) {
      try {
        fr.play_direction = parse_direction(f[*c_pdir]);
      } catch (const std::invalid_argument&) {
        reject("bad_direction");
        continue;
      }
    }

    auto [it, inserted] = last_frame.try_emplace(
      std::make_tuple(fr.game_id, fr.play_id, fr.player_id.value_or(-1)), fr.frame_id);
    if (!inserted) {
      if (fr.frame_id <= it->second) {
        reject("frame_order");
        continue;
      }
      it->second = fr.frame_id;
    }
    out.frames.push_back(std::move(fr));
  }
  return out;
}

TrackingLoad load_tracking(std::span<const std::filesystem::path> files,
                           const TrackingColumns& columns)
{
  TrackingLoad all;
  for (const auto& file : files) {
    auto in = open_input(file);
    auto part = load_tracking(in, columns, file.string());
    all.frames.insert(all.frames.end(), std::make_move_iterator(part.frames.begin()),
                      std::make_move_iterator(part.frames.end()));
    all.rejected.insert(all.rejected.end(), part.rejected.begin(), part.rejected.end());
  }
  return all;
}

std::map<std::int64_t, GameInfo> load_games(std::istream& in)
{
  csv::Reader reader(in);
  const auto c_game = require_column(reader, "gameId", "games");
  const auto c_home = require_column(reader, "homeTeamAbbr", "games");
  const auto c_away = require_column(reader, "visitorTeamAbbr", "games");
  const auto c_week = require_column(reader, "week", "games");
  std::map<std::int64_t, GameInfo> games;
  csv::Record rec;
  while (reader.next(rec)) {
    if (rec.fields.size() != reader.header().size()) {
      continue;
    }
    auto id = csv::parse_int(rec.fields[c_game]);
    auto week = csv::parse_int(rec.fields[c_week]);
    if (!id || !week) {
      continue;
    }
    games[*id] = GameInfo{*id, rec.fields[c_home], rec.fields[c_away], static_cast<int>(*week)};
  }
  return games;
}

std::map<std::int64_t, GameInfo> load_games(const std::filesystem::path& file)
{
  auto in = open_input(file);
  return load_games(in);
}

std::map<PlayKey, PlayContext> load_plays(std::istream& in,
                                          const std::map<std::int64_t, GameInfo>& games)
{
  csv::Reader reader(in);
  const auto c_game = require_column(reader, "gameId", "plays");
  const auto c_play = require_column(reader, "playId", "plays");
  const auto c_down = require_column(reader, "down", "plays");
  const auto c_ytg = require_column(reader, "yardsToGo", "plays");
  const auto c_team = require_column(reader, "possessionTeam", "plays");
  const auto c_yardline = require_column(reader, "absoluteYardlineNumber", "plays");
  const auto c_quarter = reader.column("quarter");
  const auto c_clock = reader.column("gameClock");
  const auto c_home_score = reader.column("preSnapHomeScore");
  const auto c_away_score = reader.column("preSnapVisitorScore");
  const auto c_result = reader.column("passResult");
  const auto c_target = reader.column("targetNflId");

  std::map<PlayKey, PlayContext> plays;
  csv::Record rec;
  while (reader.next(rec)) {
    const auto& f = rec.fields;
    if (f.size() != reader.header().size()) {
      continue;
    }
    auto game = csv::parse_int(f[c_game]);
    auto play = csv::parse_int(f[c_play]);
    auto down = csv::parse_int(f[c_down]);
    auto ytg = csv::parse_double(f[c_ytg]);
    auto yardline = csv::parse_double(f[c_yardline]);
    if (!game || !play || !down || !ytg || !yardline || *down < 1 || *down > 4 || *ytg <= 0.0) {
      continue;
    }
    auto g = games.find(*game);
    if (g == games.end()) {
      continue;
    }
    PlayContext ctx;
    ctx.game_id = *game;
    ctx.play_id = *play;
    ctx.week = g->second.week;
    ctx.down = static_cast<int>(*down);
    ctx.yards_to_go = *ytg;
    ctx.absolute_yardline = *yardline;
    ctx.possession_team = f[c_team];
    ctx.home_team = g->second.home_team;
    ctx.visitor_team = g->second.visitor_team;
    ctx.defensive_team = ctx.possession_team == ctx.home_team ? ctx.visitor_team : ctx.home_team;
    if (c_quarter) {
      ctx.quarter = static_cast<int>(csv::parse_int(f[*c_quarter]).value_or(0));
    }
    if (c_clock) {
      ctx.game_clock = f[*c_clock];
    }
    if (c_home_score && c_away_score) {
      const double home = csv::parse_double(f[*c_home_score]).value_or(0.0);
      const double away = csv::parse_double(f[*c_away_score]).value_or(0.0);
      ctx.score_differential = ctx.possession_team == ctx.home_team ? home - away : away - home;
    }
    if (c_result) {
      ctx.pass_result = f[*c_result];
    }
    if (c_target) {
      if (auto t = csv::parse_int(f[*c_target])) {
        ctx.target_id = *t;
      }
    }
    plays[ctx.key()] = std::move(ctx);
  }
  return plays;
}

std::map<PlayKey, PlayContext> load_plays(const std::filesystem::path& file,
                                          const std::map<std::int64_t, GameInfo>& games)
{
  auto in = open_input(file);
  return load_plays(in, games);
}

// ---------------------------------------------------------------------------
// Geometry

AdjustedPoint adjusted_coordinates(double x, double y, PlayDirection direction,
                                   const CoordinateConvention& conv)
{
  if (direction == PlayDirection::left) {
    return {x - 10.0, conv.y_sign * (kFieldCenterY - y)};
  }
  return {110.0 - x, conv.y_sign * (y - kFieldCenterY)};
}

AdjustedPoint adjusted_coordinates(const TrackingFrame& frame, PlayDirection direction,
                                   const CoordinateConvention& conv)
{
  return adjusted_coordinates(frame.x, frame.y, direction, conv);
}

double PlayContext::line_of_scrimmage_x_adj() const
{
  return adjusted_coordinates(absolute_yardline, kFieldCenterY, play_direction).x_adj;
}

double PlayContext::first_down_x_adj() const
{
  return std::max(0.0, line_of_scrimmage_x_adj() - yards_to_go);
}

double angular_difference(double a, double b)
{
  const double d = std::fmod(std::fabs(a - b), 360.0);
  return std::min(d, 360.0 - d);
}

double compass_bearing(double dx, double dy)
{
  if (dx == 0.0 && dy == 0.0) {
    return 0.0;
  }
  double deg = std::atan2(dx, dy) * 180.0 / std::numbers::pi;
  if (deg < 0.0) {
    deg += 360.0;
  }
  return deg >= 360.0 ? 0.0 : deg;
}

double endzone_bearing(PlayDirection direction)
{
  return direction == PlayDirection::left ? 270.0 : 90.0;
}

double bearing_between(const AdjustedPoint& from, const AdjustedPoint& to, PlayDirection direction,
                       const CoordinateConvention& conv)
{
  const double dx_adj = to.x_adj - from.x_adj;
  const double dy_adj = to.y_adj - from.y_adj;
  // invert the adjusted transform; only sign flips, so this is exact
  const double dx = direction == PlayDirection::left ? dx_adj : -dx_adj;
  const double dy = direction == PlayDirection::left ? -conv.y_sign * dy_adj : conv.y_sign * dy_adj;
  return compass_bearing(dx, dy);
}

double CatchSnapshot::distance_to_receiver(const PlayerState& p) const
{
  return std::hypot(p.pos.x_adj - receiver.pos.x_adj, p.pos.y_adj - receiver.pos.y_adj);
}

// ---------------------------------------------------------------------------
// Eligibility

namespace {

const TrackingFrame* nearest_to(const std::vector<const TrackingFrame*>& candidates, double x,
                                double y)
{
  const TrackingFrame* best = nullptr;
  double best_d = 0.0;
  for (const auto* c : candidates) {
    const double d = std::hypot(c->x - x, c->y - y);
    if (!best || d < best_d || (d == best_d && *c->player_id < *best->player_id)) {
      best = c;
      best_d = d;
    }
  }
  return best;
}

bool is_end_of_play(std::string_view e)
{
  return e == events::tackle || e == events::out_of_bounds || e == events::touchdown
         || e == "fumble" || e == "fumble_offense_recovered" || e == "fumble_defense_recovered"
         || e == "qb_slide" || e == "safety";
}

} // namespace

std::vector<CatchSnapshot> select_eligible_plays(const std::map<PlayKey, PlayContext>& plays,
                                                 std::span<const TrackingFrame> frames,
                                                 EligibilityReport* report,
                                                 const CoordinateConvention& conv)
{
  EligibilityReport local;
  EligibilityReport& rep = report ? *report : local;
  rep = EligibilityReport{};

  std::map<PlayKey, std::vector<const TrackingFrame*>> by_play;
  for (const auto& f : frames) {
    by_play[f.key()].push_back(&f);
  }
  std::set<PlayKey> keys;
  for (const auto& [k, _] : plays) {
    keys.insert(k);
  }
  for (const auto& [k, _] : by_play) {
    keys.insert(k);
  }
  rep.plays_seen = keys.size();

  std::vector<CatchSnapshot> out;
  for (const auto& key : keys) {
    auto exclude = [&](const char* reason) { ++rep.excluded[reason]; };
    auto ctx_it = plays.find(key);
    if (ctx_it == plays.end()) {
      exclude("missing_context");
      continue;
    }
    auto fr_it = by_play.find(key);
    if (fr_it == by_play.end()) {
      exclude("no_tracking");
      continue;
    }
    const auto& rows = fr_it->second;
    PlayContext ctx = ctx_it->second;

    std::optional<PlayDirection> direction;
    std::optional<int> catch_frame;
    std::optional<int> throw_frame;
    for (const auto* r : rows) {
      if (!direction && r->play_direction) {
        direction = r->play_direction;
      }
      if (r->event == events::pass_caught && (!catch_frame || r->frame_id < *catch_frame)) {
        catch_frame = r->frame_id;
      }
      if ((r->event == events::pass_forward || r->event == "pass_shovel")
          && (!throw_frame || r->frame_id < *throw_frame)) {
        throw_frame = r->frame_id;
      }
    }
    if (!catch_frame) {
      exclude("no_catch_event");
      continue;
    }
    if (!throw_frame) {
      exclude("no_throw_event");
      continue;
    }
    if (!direction) {
      exclude("missing_direction");
      continue;
    }
    ctx.play_direction = *direction;

    auto on_offense = [&](const TrackingFrame& f) {
      if (f.team == ctx.possession_team) {
        return true;
      }
      if (f.team == "home") {
        return ctx.home_team == ctx.possession_team;
      }
      if (f.team == "away") {
        return ctx.visitor_team == ctx.possession_team;
      }
      return false;
    };

    const TrackingFrame* ball_catch = nullptr;
    const TrackingFrame* ball_throw = nullptr;
    std::vector<const TrackingFrame*> offense_catch;
    std::vector<const TrackingFrame*> defense_catch;
    std::vector<const TrackingFrame*> offense_throw;
    for (const auto* r : rows) {
      if (r->frame_id == *catch_frame) {
        if (r->is_ball()) {
          ball_catch = r;
        } else if (on_offense(*r)) {
          offense_catch.push_back(r);
        } else {
          defense_catch.push_back(r);
        }
      } else if (r->frame_id == *throw_frame) {
        if (r->is_ball()) {
          ball_throw = r;
        } else if (on_offense(*r)) {
          offense_throw.push_back(r);
        }
      }
    }
    if (*throw_frame == *catch_frame) {
      exclude("no_throw_event");
      continue;
    }

    // receiver: the target when the plays file names one, else the offensive
    // non-quarterback nearest the ball at the catch
    const TrackingFrame* receiver = nullptr;
    if (ctx.target_id) {
      for (const auto* r : offense_catch) {
        if (*r->player_id == *ctx.target_id) {
          receiver = r;
        }
      }
    }
    if (!receiver && ball_catch) {
      std::vector<const TrackingFrame*> cands;
      for (const auto* r : offense_catch) {
        if (r->position != "QB") {
          cands.push_back(r);
        }
      }
      receiver = nearest_to(cands, ball_catch->x, ball_catch->y);
    }
    if (!receiver) {
      exclude("missing_receiver");
      continue;
    }

    const TrackingFrame* qb = nullptr;
    {
      std::vector<const TrackingFrame*> qbs;
      bool any_position = false;
      for (const auto* r : offense_throw) {
        any_position = any_position || !r->position.empty();
        if (r->position == "QB") {
          qbs.push_back(r);
        }
      }
      if (!any_position) {
        for (const auto* r : offense_throw) {
          if (*r->player_id != *receiver->player_id) {
            qbs.push_back(r);
          }
        }
      }
      if (qbs.size() == 1) {
        qb = qbs.front();
      } else if (!qbs.empty() && ball_throw) {
        qb = nearest_to(qbs, ball_throw->x, ball_throw->y);
      }
    }
    if (!qb) {
      exclude("no_quarterback");
      continue;
    }
    if (defense_catch.empty()) {
      exclude("missing_defender");
      continue;
    }

    CatchSnapshot snap;
    snap.context = ctx;
    snap.convention = conv;
    snap.catch_frame = *catch_frame;
    snap.throw_frame = *throw_frame;
    snap.receiver = {*receiver, adjusted_coordinates(*receiver, *direction, conv)};
    snap.quarterback = {*qb, adjusted_coordinates(*qb, *direction, conv)};
    if (snap.receiver.pos.x_adj <= 0.0) {
      exclude("catch_in_endzone");
      continue;
    }

    auto order = [&](std::vector<PlayerState>& players) {
      std::vector<std::pair<double, PlayerState>> keyed;
      for (auto& p : players) {
        keyed.emplace_back(snap.distance_to_receiver(p), std::move(p));
      }
      std::sort(keyed.begin(), keyed.end(), [](const auto& l, const auto& r) {
        if (l.first != r.first) {
          return l.first < r.first;
        }
        return *l.second.frame.player_id < *r.second.frame.player_id;
      });
      players.clear();
      for (auto& [_, p] : keyed) {
        players.push_back(std::move(p));
      }
    };
    for (const auto* r : offense_catch) {
      if (*r->player_id == *receiver->player_id || *r->player_id == *qb->player_id) {
        continue;
      }
      snap.offense.push_back({*r, adjusted_coordinates(*r, *direction, conv)});
    }
    for (const auto* r : defense_catch) {
      snap.defense.push_back({*r, adjusted_coordinates(*r, *direction, conv)});
    }
    order(snap.offense);
    order(snap.defense);

    // ending spot: receiver at the first end-of-play event after the catch,
    // else the receiver's last frame
    const TrackingFrame* end = nullptr;
    int end_event_frame = -1;
    for (const auto* r : rows) {
      if (r->frame_id > *catch_frame && is_end_of_play(r->event)
          && (end_event_frame < 0 || r->frame_id < end_event_frame)) {
        end_event_frame = r->frame_id;
      }
    }
    for (const auto* r : rows) {
      if (r->player_id != receiver->player_id) {
        continue;
      }
      if (end_event_frame >= 0) {
        if (r->frame_id == end_event_frame) {
          end = r;
        }
      } else if (r->frame_id >= *catch_frame && (!end || r->frame_id > end->frame_id)) {
        end = r;
      }
    }
    if (!end) {
      exclude("missing_end_of_play");
      continue;
    }
    snap.observed_yac = snap.receiver.pos.x_adj - adjusted_coordinates(*end, *direction, conv).x_adj;
    out.push_back(std::move(snap));
  }
  rep.eligible = out.size();
  return out;
}

// ---------------------------------------------------------------------------
// Features

namespace {

constexpr std::string_view kRecNames[] = {"x_adj", "y_adj", "dir_endzone", "o_endzone",
                                          "x_adj_from_first_down", "s"};
constexpr std::string_view kQbNames[] = {"s", "x_adj_change", "y_adj_change", "dist_to_rec"};
constexpr std::string_view kPlayerNames[] = {"x_adj",        "y_adj",        "dir_endzone",
                                             "o_endzone",    "s",            "x_adj_change",
                                             "y_adj_change", "dist_to_rec",  "dir_wrt_rec_diff",
                                             "o_wrt_rec_diff"};

struct RoleRef
{
  char side = 0; // 'o' or 'd'
  std::size_t rank = 0;
};

std::optional<RoleRef> parse_other_role(std::string_view role)
{
  RoleRef ref;
  if (role.starts_with("off")) {
    ref.side = 'o';
    role.remove_prefix(3);
  } else if (role.starts_with("def")) {
    ref.side = 'd';
    role.remove_prefix(3);
  } else {
    return std::nullopt;
  }
  auto n = csv::parse_int(role);
  if (!n || *n < 1 || role.empty() || role.front() == '0') {
    return std::nullopt;
  }
  ref.rank = static_cast<std::size_t>(*n);
  return ref;
}

} // namespace

void check_roles(const RoleSet& roles)
{
  std::set<std::string> seen;
  bool rec = false;
  bool qb = false;
  for (const auto& r : roles) {
    if (!seen.insert(r).second) {
      throw std::invalid_argument("duplicate role '" + r + "'");
    }
    if (r == "rec") {
      rec = true;
    } else if (r == "qb") {
      qb = true;
    } else if (!parse_other_role(r)) {
      throw std::invalid_argument("unknown role '" + r + "'");
    }
  }
  if (!rec || !qb) {
    throw std::invalid_argument("role set must include rec and qb");
  }
}

std::vector<std::string> feature_names(const RoleSet& roles)
{
  check_roles(roles);
  std::vector<std::string> names;
  for (auto n : kRecNames) {
    names.push_back("rec_" + std::string(n));
  }
  for (auto n : kQbNames) {
    names.push_back("qb_" + std::string(n));
  }
  for (const auto& r : roles) {
    if (r == "rec" || r == "qb") {
      continue;
    }
    for (auto n : kPlayerNames) {
      names.push_back(r + "_" + std::string(n));
    }
  }
  return names;
}

double FeatureVector::at(std::string_view name) const
{
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) {
      return values[i];
    }
  }
  throw std::out_of_range("no feature named '" + std::string(name) + "'");
}

FeatureVector FeatureVector::project(std::span<const std::string> keep) const
{
  FeatureVector out;
  for (const auto& k : keep) {
    out.names.push_back(k);
    out.values.push_back(at(k));
  }
  return out;
}

const PlayerState& role_state(const CatchSnapshot& snapshot, std::string_view role)
{
  if (role == "rec") {
    return snapshot.receiver;
  }
  if (role == "qb") {
    return snapshot.quarterback;
  }
  auto ref = parse_other_role(role);
  if (!ref) {
    throw std::invalid_argument("unknown role '" + std::string(role) + "'");
  }
  const auto& group = ref->side == 'o' ? snapshot.offense : snapshot.defense;
  if (ref->rank > group.size()) {
    throw std::runtime_error("missing role " + std::string(role));
  }
  return group[ref->rank - 1];
}

void player_block(const PlayerState& player, const PlayerState& receiver, PlayDirection direction,
                  const CoordinateConvention& conv, std::span<double> out)
{
  if (out.size() != kPlayerBlockSize) {
    throw std::invalid_argument("player_block: output span must hold 10 values");
  }
  const double ez = endzone_bearing(direction);
  const double to_rec = bearing_between(player.pos, receiver.pos, direction, conv);
  out[0] = player.pos.x_adj;
  out[1] = player.pos.y_adj;
  out[2] = angular_difference(player.frame.dir, ez);
  out[3] = angular_difference(player.frame.o, ez);
  out[4] = player.frame.s;
  out[5] = player.pos.x_adj - receiver.pos.x_adj;
  out[6] = std::fabs(player.pos.y_adj - receiver.pos.y_adj);
  out[7] = std::hypot(player.pos.x_adj - receiver.pos.x_adj, player.pos.y_adj - receiver.pos.y_adj);
  out[8] = angular_difference(player.frame.dir, to_rec);
  out[9] = angular_difference(player.frame.o, to_rec);
}

FeatureVector build_feature_vector(const CatchSnapshot& snapshot, const RoleSet& roles)
{
  FeatureVector fv;
  fv.names = feature_names(roles);
  fv.values.reserve(fv.names.size());
  const auto dir = snapshot.context.play_direction;
  const double ez = endzone_bearing(dir);
  const auto& rec = snapshot.receiver;
  const auto& qb = snapshot.quarterback;

  fv.values.push_back(rec.pos.x_adj);
  fv.values.push_back(rec.pos.y_adj);
  fv.values.push_back(angular_difference(rec.frame.dir, ez));
  fv.values.push_back(angular_difference(rec.frame.o, ez));
  fv.values.push_back(rec.pos.x_adj - snapshot.context.first_down_x_adj());
  fv.values.push_back(rec.frame.s);

  fv.values.push_back(qb.frame.s);
  fv.values.push_back(qb.pos.x_adj - rec.pos.x_adj);
  fv.values.push_back(std::fabs(qb.pos.y_adj - rec.pos.y_adj));
  fv.values.push_back(std::hypot(qb.pos.x_adj - rec.pos.x_adj, qb.pos.y_adj - rec.pos.y_adj));

  for (const auto& r : roles) {
    if (r == "rec" || r == "qb") {
      continue;
    }
    const auto& p = role_state(snapshot, r);
    const std::size_t at = fv.values.size();
    fv.values.resize(at + kPlayerBlockSize);
    player_block(p, rec, dir, snapshot.convention, std::span(fv.values).subspan(at, kPlayerBlockSize));
  }
  return fv;
}

// ---------------------------------------------------------------------------
// Tables

namespace {

constexpr std::string_view kTableRoles[] = {"rec", "qb", "off1", "off2", "def1", "def2"};
constexpr std::string_view kStateCols[] = {"nfl_id", "name", "position", "team", "frame", "x",
                                           "y",      "s",    "a",        "dis",  "o",     "dir"};

std::vector<std::string> snapshot_header()
{
  std::vector<std::string> h{"game_id",       "play_id",       "week",
                             "down",          "yards_to_go",   "play_direction",
                             "absolute_yardline", "quarter",   "game_clock",
                             "score_differential", "possession_team", "defensive_team",
                             "home_team",     "visitor_team",  "y_sign",
                             "catch_frame",   "throw_frame",   "observed_yac"};
  for (auto r : kTableRoles) {
    for (auto c : kStateCols) {
      h.push_back(std::string(r) + "_" + std::string(c));
    }
  }
  return h;
}

const PlayerState* optional_role(const CatchSnapshot& s, std::string_view role)
{
  try {
    return &role_state(s, role);
  } catch (const std::runtime_error&) {
    return nullptr;
  }
}

} // namespace

void write_snapshot_table(std::ostream& out, std::span<const CatchSnapshot> snapshots)
{
  using csv::format_double;
  csv::write_row(out, snapshot_header());
  for (const auto& s : snapshots) {
    const auto& c = s.context;
    std::vector<std::string> row{std::to_string(c.game_id),
                                 std::to_string(c.play_id),
                                 std::to_string(c.week),
                                 std::to_string(c.down),
                                 format_double(c.yards_to_go),
                                 std::string(to_string(c.play_direction)),
                                 format_double(c.absolute_yardline),
                                 std::to_string(c.quarter),
                                 c.game_clock,
                                 format_double(c.score_differential),
                                 c.possession_team,
                                 c.defensive_team,
                                 c.home_team,
                                 c.visitor_team,
                                 format_double(s.convention.y_sign),
                                 std::to_string(s.catch_frame),
                                 std::to_string(s.throw_frame),
                                 format_double(s.observed_yac)};
    for (auto r : kTableRoles) {
      const PlayerState* p = optional_role(s, r);
      if (!p) {
        row.insert(row.end(), std::size(kStateCols), std::string());
        continue;
      }
      const auto& f = p->frame;
      row.push_back(std::to_string(f.player_id.value_or(0)));
      row.push_back(f.display_name);
      row.push_back(f.position);
      row.push_back(f.team);
      row.push_back(std::to_string(f.frame_id));
      for (double v : {f.x, f.y, f.s, f.a, f.dis, f.o, f.dir}) {
        row.push_back(format_double(v));
      }
    }
    csv::write_row(out, row);
  }
}

std::vector<CatchSnapshot> read_snapshot_table(std::istream& in)
{
  csv::Reader reader(in);
  const auto header = snapshot_header();
  std::vector<std::size_t> col;
  for (const auto& h : header) {
    col.push_back(require_column(reader, h, "snapshot table"));
  }
  std::vector<CatchSnapshot> out;
  csv::Record rec;
  while (reader.next(rec)) {
    const auto& f = rec.fields;
    std::size_t k = 0;
    auto next = [&]() -> const std::string& { return f.at(col[k++]); };
    auto num = [&]() {
      auto v = csv::parse_double(next());
      if (!v) {
        throw std::runtime_error("snapshot table: bad number on line " + std::to_string(rec.line));
      }
      return *v;
    };
    CatchSnapshot s;
    auto& c = s.context;
    c.game_id = static_cast<std::int64_t>(num());
    c.play_id = static_cast<std::int64_t>(num());
    c.week = static_cast<int>(num());
    c.down = static_cast<int>(num());
    c.yards_to_go = num();
    c.play_direction = parse_direction(next());
    c.absolute_yardline = num();
    c.quarter = static_cast<int>(num());
    c.game_clock = next();
    c.score_differential = num();
    c.possession_team = next();
    c.defensive_team = next();
    c.home_team = next();
    c.visitor_team = next();
    s.convention.y_sign = num();
    s.catch_frame = static_cast<int>(num());
    s.throw_frame = static_cast<int>(num());
    s.observed_yac = num();
    for (auto r : kTableRoles) {
      if (f.at(col[k]).empty()) {
        k += std::size(kStateCols);
        continue;
      }
      PlayerState p;
      auto& fr = p.frame;
      fr.game_id = c.game_id;
      fr.play_id = c.play_id;
      fr.player_id = static_cast<std::int64_t>(num());
      fr.display_name = next();
      fr.position = next();
      fr.team = next();
      fr.frame_id = static_cast<int>(num());
      fr.x = num();
      fr.y = num();
      fr.s = num();
      fr.a = num();
      fr.dis = num();
      fr.o = num();
      fr.dir = num();
      fr.play_direction = c.play_direction;
      p.pos = adjusted_coordinates(fr, c.play_direction, s.convention);
      if (r == "rec") {
        s.receiver = std::move(p);
      } else if (r == "qb") {
        s.quarterback = std::move(p);
      } else if (r.starts_with("off")) {
        s.offense.push_back(std::move(p));
      } else {
        s.defense.push_back(std::move(p));
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_feature_table(std::ostream& out, std::span<const CatchSnapshot> snapshots,
                         const RoleSet& roles)
{
  std::vector<std::string> header{"game_id", "play_id", "week"};
  for (auto& n : feature_names(roles)) {
    header.push_back(std::move(n));
  }
  csv::write_row(out, header);
  for (const auto& s : snapshots) {
    const auto fv = build_feature_vector(s, roles);
    std::vector<std::string> row{std::to_string(s.context.game_id),
                                 std::to_string(s.context.play_id),
                                 std::to_string(s.context.week)};
    for (double v : fv.values) {
      row.push_back(csv::format_double(v));
    }
    csv::write_row(out, row);
  }
}

} // namespace ghostcde
