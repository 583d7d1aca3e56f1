#include <doctest.h>

#include <cmath>
#include <sstream>

#include "ghostcde/synth.hpp"
#include "support.hpp"

using namespace ghostcde;

namespace {

std::string dump(const synth::SynthData& d)
{
  std::ostringstream out;
  synth::write_games(out, d.games);
  synth::write_plays(out, d.plays);
  synth::write_tracking(out, d.frames);
  synth::write_truth(out, d.truth);
  return out.str();
}

} // namespace

TEST_CASE("zero plays gives an empty dataset")
{
  const auto d = testing::small_synth(0);
  CHECK(d.plays.empty());
  CHECK(d.frames.empty());
  CHECK(d.truth.empty());
}

TEST_CASE("same seed gives byte-identical output, a new seed does not")
{
  CHECK(dump(testing::small_synth(25, 3, 5)) == dump(testing::small_synth(25, 3, 5)));
  CHECK(dump(testing::small_synth(25, 3, 5)) != dump(testing::small_synth(25, 3, 6)));
}

TEST_CASE("degenerate configurations are rejected")
{
  synth::SynthConfig c;
  c.catch_x_min = 50;
  c.catch_x_max = 40;
  CHECK_THROWS(c.validate());
  c = {};
  c.weeks = 0;
  CHECK_THROWS(synth::generate(c));
  c = {};
  c.yac_sd = 0.0;
  CHECK_THROWS(c.validate());
}

TEST_CASE("YAC draws follow the generative law")
{
  const auto d = testing::small_synth(2000, 5, 31);
  double z = 0.0;
  for (const auto& t : d.truth) {
    CHECK(t.yac_mean == doctest::Approx(0.5 + 0.8 * t.def1_distance + 0.2 * t.rec_speed).epsilon(1e-12));
    CHECK(t.yac_sd == doctest::Approx(1.0 + 0.2 * t.def1_distance).epsilon(1e-12));
    z += (t.yac - t.yac_mean) / t.yac_sd;
  }
  const double n = static_cast<double>(d.truth.size());
  CHECK(std::fabs(z / n) < 3.0 / std::sqrt(n));
}

TEST_CASE("true densities integrate to one")
{
  const auto d = testing::small_synth(20);
  const auto grid = rfcde::Grid::uniform(-60.0, 120.0, 18001);
  for (const auto& t : d.truth) {
    const auto v = synth::true_yac_density(t, grid);
    CHECK(rfcde::trapezoid(grid, v) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(synth::true_yac_density(t, t.yac_mean) == doctest::Approx(testing::normal_pdf(0.0, t.yac_sd)));
  }
}

TEST_CASE("synthetic plays run through ingestion with matching ground truth")
{
  const auto d = testing::small_synth(50);
  EligibilityReport rep;
  const auto snaps = synth::snapshots(d, &rep);
  CHECK(rep.eligible == 50);
  std::map<PlayKey, const synth::PlayTruth*> truth;
  for (const auto& t : d.truth) {
    truth[t.key] = &t;
  }
  for (const auto& s : snaps) {
    const auto* t = truth.at(s.key());
    CHECK(s.receiver.pos.x_adj == doctest::Approx(t->catch_x_adj).epsilon(1e-9));
    CHECK(*s.defense[0].frame.player_id == t->def1_id);
    CHECK(s.distance_to_receiver(s.defense[0]) == doctest::Approx(t->def1_distance).epsilon(1e-9));
    // positions are written with two decimals
    CHECK(std::fabs(s.observed_yac - t->yac) <= 0.0101);
  }
}

TEST_CASE("written CSV files load back through the tracking readers")
{
  const auto d = testing::small_synth(10);
  std::stringstream io;
  synth::write_tracking(io, d.frames);
  const auto back = load_tracking(io);
  CHECK(back.rejected.empty());
  CHECK(back.frames.size() == d.frames.size());
  std::stringstream gio;
  synth::write_games(gio, d.games);
  const auto games = load_games(gio);
  CHECK(games.size() == d.games.size());
  std::stringstream pio;
  synth::write_plays(pio, d.plays);
  CHECK(load_plays(pio, games).size() == d.plays.size());
}
