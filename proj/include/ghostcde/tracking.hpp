#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ghostcde {

// Field geometry (yards). Goal lines sit at x = 10 and x = 110.
inline constexpr double kFieldLength = 120.0;
inline constexpr double kFieldWidth = 53.3;
inline constexpr double kFieldCenterY = 26.65;

namespace events {
inline constexpr std::string_view ball_snap = "ball_snap";
inline constexpr std::string_view pass_forward = "pass_forward";
inline constexpr std::string_view pass_caught = "pass_outcome_caught";
inline constexpr std::string_view pass_intercepted = "pass_outcome_interception";
inline constexpr std::string_view tackle = "tackle";
inline constexpr std::string_view out_of_bounds = "out_of_bounds";
inline constexpr std::string_view touchdown = "touchdown";
} // namespace events

enum class PlayDirection
{
  left,
  right
};

std::string_view to_string(PlayDirection d);
PlayDirection parse_direction(std::string_view text);

struct PlayKey
{
  std::int64_t game_id = 0;
  std::int64_t play_id = 0;

  auto operator<=>(const PlayKey&) const = default;
};

//! One player (or the ball) at one 10 Hz time step.
struct TrackingFrame
{
  std::int64_t game_id = 0;
  std::int64_t play_id = 0;
  std::optional<std::int64_t> player_id; // absent for the football
  int frame_id = 0;
  double x = 0.0;
  double y = 0.0;
  double s = 0.0;
  double a = 0.0;
  double dis = 0.0;
  double o = 0.0;
  double dir = 0.0;
  std::string event; // empty when the frame carries no event
  std::string team;  // "home", "away" or "football"
  std::string position;
  std::string display_name;
  std::optional<PlayDirection> play_direction;

  PlayKey key() const { return {game_id, play_id}; }
  bool is_ball() const { return !player_id.has_value(); }
};

//! Maps canonical tracking columns onto the names used by a particular file.
struct TrackingColumns
{
  std::string game_id = "gameId";
  std::string play_id = "playId";
  std::string player_id = "nflId";
  std::string frame_id = "frameId";
  std::string x = "x";
  std::string y = "y";
  std::string s = "s";
  std::string a = "a";
  std::string dis = "dis";
  std::string o = "o";
  std::string dir = "dir";
  std::string event = "event";
  // optional columns
  std::string team = "team";
  std::string position = "position";
  std::string display_name = "displayName";
  std::string play_direction = "playDirection";
};

struct RejectedRow
{
  std::string source;
  std::size_t line = 0;
  std::string reason;
};

struct TrackingLoad
{
  std::vector<TrackingFrame> frames;
  std::vector<RejectedRow> rejected;
};

//! Reads comma-separated tracking data. A missing required column throws
//! std::runtime_error naming the column; bad rows are rejected with their line.
TrackingLoad load_tracking(std::istream& in, const TrackingColumns& columns = {},
                           std::string_view source = "<stream>");
TrackingLoad load_tracking(std::span<const std::filesystem::path> files,
                           const TrackingColumns& columns = {});

//! Play-level context at the snap.
struct PlayContext
{
  std::int64_t game_id = 0;
  std::int64_t play_id = 0;
  int week = 0;
  int down = 1;
  double yards_to_go = 10.0;
  PlayDirection play_direction = PlayDirection::left;
  double absolute_yardline = 60.0; // line of scrimmage in field x
  int quarter = 1;
  std::string game_clock;
  double score_differential = 0.0;
  std::string possession_team;
  std::string defensive_team;
  std::string home_team;
  std::string visitor_team;
  std::optional<std::int64_t> target_id;
  std::string pass_result;

  PlayKey key() const { return {game_id, play_id}; }
  double line_of_scrimmage_x_adj() const;
  //! Yards from the target endzone to the line to gain (0 when goal to go).
  double first_down_x_adj() const;
};

struct GameInfo
{
  std::int64_t game_id = 0;
  std::string home_team;
  std::string visitor_team;
  int week = 0;
};

std::map<std::int64_t, GameInfo> load_games(std::istream& in);
std::map<std::int64_t, GameInfo> load_games(const std::filesystem::path& file);

//! Reads the plays file and joins week/defense from `games`. Play direction is
//! filled in later from the tracking rows.
std::map<PlayKey, PlayContext> load_plays(std::istream& in,
                                          const std::map<std::int64_t, GameInfo>& games);
std::map<PlayKey, PlayContext> load_plays(const std::filesystem::path& file,
                                          const std::map<std::int64_t, GameInfo>& games);

//! Sign convention for y_adj: +1 means the offense's left is positive.
struct CoordinateConvention
{
  double y_sign = 1.0;
};

struct AdjustedPoint
{
  double x_adj = 0.0;
  double y_adj = 0.0;
};

AdjustedPoint adjusted_coordinates(double x, double y, PlayDirection direction,
                                   const CoordinateConvention& conv = {});
AdjustedPoint adjusted_coordinates(const TrackingFrame& frame, PlayDirection direction,
                                   const CoordinateConvention& conv = {});

//! Minimal absolute difference between two angles in degrees, in [0, 180].
double angular_difference(double a, double b);

//! Compass bearing (clockwise from +y) of the raw displacement (dx, dy).
//! A zero displacement has bearing 0.
double compass_bearing(double dx, double dy);

//! Bearing of the target endzone: 270 when moving left, 90 when moving right.
double endzone_bearing(PlayDirection direction);

//! Raw-field compass bearing from `from` to `to`, both in adjusted coordinates.
double bearing_between(const AdjustedPoint& from, const AdjustedPoint& to, PlayDirection direction,
                       const CoordinateConvention& conv = {});

//! A player's frame together with its adjusted position.
struct PlayerState
{
  TrackingFrame frame;
  AdjustedPoint pos;
};

struct CatchSnapshot
{
  PlayContext context;
  CoordinateConvention convention;
  int catch_frame = 0;
  int throw_frame = 0;
  PlayerState receiver;
  PlayerState quarterback; // at the throw
  std::vector<PlayerState> offense; // excluding receiver and quarterback, nearest first
  std::vector<PlayerState> defense; // nearest first
  double observed_yac = 0.0;

  PlayKey key() const { return context.key(); }
  double distance_to_receiver(const PlayerState& p) const;
};

struct EligibilityReport
{
  std::size_t plays_seen = 0;
  std::size_t eligible = 0;
  std::map<std::string, std::size_t> excluded; // reason -> count
};

//! Builds catch snapshots for completed passes thrown by a quarterback and
//! caught outside the target endzone. Frames may arrive in any order.
std::vector<CatchSnapshot> select_eligible_plays(const std::map<PlayKey, PlayContext>& plays,
                                                 std::span<const TrackingFrame> frames,
                                                 EligibilityReport* report = nullptr,
                                                 const CoordinateConvention& conv = {});

// ---------------------------------------------------------------------------
// Feature vectors

//! Role names: "rec", "qb", "offN", "defN" (N >= 1).
using RoleSet = std::vector<std::string>;

inline const RoleSet& ghost_roles()
{
  static const RoleSet roles{"rec", "qb"};
  return roles;
}
inline const RoleSet& yac_roles()
{
  static const RoleSet roles{"rec", "qb", "def1"};
  return roles;
}

//! Column names in fixed order: rec block, qb block, then the other roles in
//! the order given.
std::vector<std::string> feature_names(const RoleSet& roles);

struct FeatureVector
{
  std::vector<std::string> names;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double at(std::string_view name) const;
  //! Subset in the order of `keep`.
  FeatureVector project(std::span<const std::string> keep) const;
};

//! Number of features contributed by a non-rec, non-qb role.
inline constexpr std::size_t kPlayerBlockSize = 10;

//! Writes the ten features of a (possibly hypothetical) player relative to the
//! receiver into `out`.
void player_block(const PlayerState& player, const PlayerState& receiver, PlayDirection direction,
                  const CoordinateConvention& conv, std::span<double> out);

FeatureVector build_feature_vector(const CatchSnapshot& snapshot, const RoleSet& roles);

//! Validates a role set: rec and qb present, no duplicates, known names.
void check_roles(const RoleSet& roles);

//! Looks up the state for a role; throws naming the role when missing.
const PlayerState& role_state(const CatchSnapshot& snapshot, std::string_view role);

// ---------------------------------------------------------------------------
// Tables

//! Snapshot table: one row per play with context and raw role states for
//! rec, qb, off1, off2, def1, def2. Reading it reconstructs the snapshots.
void write_snapshot_table(std::ostream& out, std::span<const CatchSnapshot> snapshots);
std::vector<CatchSnapshot> read_snapshot_table(std::istream& in);

//! Feature table keyed by (game_id, play_id) with the columns of
//! feature_names(roles).
void write_feature_table(std::ostream& out, std::span<const CatchSnapshot> snapshots,
                         const RoleSet& roles);

} // namespace ghostcde
