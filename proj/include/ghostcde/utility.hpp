#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <vector>

#include "ghostcde/tracking.hpp"

namespace ghostcde {

//! Down-and-distance state with the yardline measured from the target endzone.
struct GameState
{
  int down = 1;
  double yards_to_go = 10.0;
  double yardline = 75.0;
  bool offense_has_ball = true; // false: the other team now has the ball, state seen from its side
};

struct NextState
{
  enum class Kind
  {
    touchdown,
    safety,
    play
  };
  Kind kind = Kind::play;
  GameState state; // valid for Kind::play
};

//! State after the receiver is stopped at `ending_x_adj`, given the context
//! at the snap.
NextState next_state(const PlayContext& context, double ending_x_adj);

inline constexpr double kTouchdownValue = 7.0;
inline constexpr double kSafetyValue = -2.0;

//! Parameters of the built-in logistic expected-points curve.
struct FallbackCurve
{
  double lower = -2.0;  // value deep in own territory
  double upper = 6.6;   // value at the goal line
  double midpoint = 45.0;
  double scale = 20.0;
  double down_offset[4] = {0.0, -0.35, -0.9, -1.6};
  double per_yard_to_go = -0.05; // applied to min(ytg, 30) - 10

  double operator()(int down, double yards_to_go, double yardline) const;
};

//! Expected points by (down, yards-to-go bucket, yardline). Either backed by a
//! table read from CSV or by the fallback curve.
class UtilityTable
{
public:
  static UtilityTable fallback(FallbackCurve curve = {});
  //! Columns down, ytg_min, ytg_max, yardline, ep. Throws on out-of-range
  //! values or when some (down, yardline 1..99) has no entry.
  static UtilityTable from_csv(std::istream& in);
  static UtilityTable from_csv(const std::filesystem::path& file);

  //! Samples the fallback curve (or copies the table) into CSV rows with
  //! one-yard buckets up to 20 yards to go and a 21..99 bucket.
  void write_csv(std::ostream& out) const;

  bool is_fallback() const { return curve_.has_value(); }

  //! Expected points for the team in possession, clamped to [-7, 7].
  double lookup(int down, double yards_to_go, double yardline) const;

  //! Possession-aware value: negated when the other team has the ball.
  double value(const GameState& s) const;

  double value(const NextState& s) const;

private:
  struct Bucket
  {
    double ytg_min = 1.0;
    double ytg_max = 1.0;
    std::vector<std::optional<double>> ep; // index = integer yardline 0..100
  };

  std::optional<FallbackCurve> curve_;
  std::map<int, std::vector<Bucket>> buckets_; // down -> buckets sorted by ytg_min
};

//! g(Y): value of the play ending at `ending_x_adj`.
double play_value(double ending_x_adj, const PlayContext& context, const UtilityTable& table);

} // namespace ghostcde
