#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "ghostcde/rfcde.hpp"
#include "ghostcde/tracking.hpp"

namespace ghostcde::synth {

//! Generative settings. YAC given the nearest defender's distance d and the
//! receiver's speed s is Normal(yac_intercept + yac_per_yard * d +
//! yac_per_speed * s, yac_sd + yac_sd_per_yard * d), clamped to
//! [-10, catch_x_adj]. The nearest defender sits at receiver +
//! Normal((def1_mean_x, def1_mean_y), def1_sd) in adjusted coordinates.
struct SynthConfig
{
  std::size_t n_plays = 200;
  int weeks = 5;
  int teams = 8;
  std::uint64_t seed = 1;
  double catch_x_min = 25.0;
  double catch_x_max = 85.0;
  double rec_y_max = 15.0; // |y_adj| of the receiver
  double rec_speed_min = 2.0;
  double rec_speed_max = 9.0;
  double yac_intercept = 0.5;
  double yac_per_yard = 0.8;
  double yac_per_speed = 0.2;
  double yac_sd = 1.0;
  double yac_sd_per_yard = 0.2;
  double def1_mean_x = -1.5;
  double def1_mean_y = 0.0;
  double def1_sd = 3.0;
  double others_min_distance = 12.0; // remaining defenders stay at least this far away

  void validate() const;
};

//! Generative quantities of one play, as seen through the 2-decimal tracking.
struct PlayTruth
{
  PlayKey key;
  int week = 0;
  double catch_x_adj = 0.0;
  double def1_distance = 0.0;
  double rec_speed = 0.0;
  double yac_mean = 0.0;
  double yac_sd = 0.0;
  double yac = 0.0; // drawn and clamped
  bool clamped = false;
  std::int64_t def1_id = 0;
};

struct SynthData
{
  std::vector<GameInfo> games;
  std::vector<PlayContext> plays;
  std::vector<TrackingFrame> frames;
  std::vector<PlayTruth> truth;
};

SynthData generate(const SynthConfig& config);

//! Normal density of the YAC law for one play (before clamping).
double true_yac_density(const PlayTruth& truth, double yac);
std::vector<double> true_yac_density(const PlayTruth& truth, const rfcde::Grid& grid);

//! Tracking, plays and games files in the layout the loaders read.
void write_games(std::ostream& out, std::span<const GameInfo> games);
void write_plays(std::ostream& out, std::span<const PlayContext> plays);
void write_tracking(std::ostream& out, std::span<const TrackingFrame> frames);
void write_truth(std::ostream& out, std::span<const PlayTruth> truth);

//! Writes games.csv, plays.csv, tracking.csv and truth.csv into `dir`.
void write_dataset(const std::filesystem::path& dir, const SynthData& data);

//! Runs the regular ingestion path on generated data.
std::vector<CatchSnapshot> snapshots(const SynthData& data, EligibilityReport* report = nullptr);

} // namespace ghostcde::synth
