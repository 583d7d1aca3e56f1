#include "ghostcde/utility.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "ghostcde/csv.hpp"

namespace ghostcde {

namespace {

constexpr double kMaxPoints = 7.0;
constexpr int kMinYardline = 1;
constexpr int kMaxYardline = 99;

std::atomic<std::size_t> g_fallback_warnings{0};

void warn_out_of_domain(int down, double ytg, double yardline)
{
  const auto n = g_fallback_warnings.fetch_add(1) + 1;
  if (n <= 10 || n % 1000 == 0) {
    spdlog::warn("EP lookup outside table domain (down {}, ytg {:.2f}, yardline {:.2f}); "
                 "using nearest bucket ({} such lookups so far)",
                 down, ytg, yardline, n);
  }
}

} // namespace

NextState next_state(const PlayContext& context, double ending_x_adj)
{
  NextState out;
  if (ending_x_adj <= 0.0) {
    out.kind = NextState::Kind::touchdown;
    return out;
  }
  if (ending_x_adj >= 100.0) {
    out.kind = NextState::Kind::safety;
    return out;
  }
  const double first_down = context.first_down_x_adj();
  if (ending_x_adj <= first_down) {
    out.state = {1, std::min(10.0, ending_x_adj), ending_x_adj, true};
  } else if (context.down < 4) {
    out.state = {context.down + 1, std::max(1.0, ending_x_adj - first_down), ending_x_adj, true};
  } else {
    const double theirs = 100.0 - ending_x_adj;
    out.state = {1, std::min(10.0, theirs), theirs, false};
  }
  return out;
}

double FallbackCurve::operator()(int down, double yards_to_go, double yardline) const
{
  const int d = std::clamp(down, 1, 4);
  const double base = lower + (upper - lower) / (1.0 + std::exp((yardline - midpoint) / scale));
  const double ytg_term = per_yard_to_go * (std::min(yards_to_go, 30.0) - 10.0);
  return std::clamp(base + down_offset[d - 1] + ytg_term, -kMaxPoints, kMaxPoints);
}

UtilityTable UtilityTable::fallback(FallbackCurve curve)
{
  UtilityTable t;
  t.curve_ = curve;
  return t;
}

UtilityTable UtilityTable::from_csv(std::istream& in)
{
  csv::Reader reader(in);
  std::size_t col[5];
  const char* names[5] = {"down", "ytg_min", "ytg_max", "yardline", "ep"};
  for (int i = 0; i < 5; ++i) {
    auto c = reader.column(names[i]);
    if (!c) {
      throw std::runtime_error(std::string("EP table: missing column '") + names[i] + "'");
    }
    col[i] = *c;
  }
  UtilityTable t;
  csv::Record rec;
  while (reader.next(rec)) {
    auto fail = [&](const std::string& what) {
      throw std::runtime_error("EP table line " + std::to_string(rec.line) + ": " + what);
    };
    std::optional<double> v[5];
    for (int i = 0; i < 5; ++i) {
      if (col[i] >= rec.fields.size()) {
        fail("too few fields");
      }
      v[i] = csv::parse_double(rec.fields[col[i]]);
      if (!v[i]) {
        fail(std::string("bad ") + names[i]);
      }
    }
    const double down = *v[0];
    const double lo = *v[1];
    const double hi = *v[2];
    const double yl = *v[3];
    const double ep = *v[4];
    if (down != std::floor(down) || down < 1 || down > 4) {
      fail("down must be 1..4");
    }
    if (lo < 1 || hi < lo) {
      fail("bad yards-to-go bucket");
    }
    if (yl != std::floor(yl) || yl < 0 || yl > 100) {
      fail("yardline must be an integer in 0..100");
    }
    if (!(ep >= -kMaxPoints && ep <= kMaxPoints)) {
      fail("ep outside [-7, 7]");
    }
    auto& buckets = t.buckets_[static_cast<int>(down)];
    auto it = std::find_if(buckets.begin(), buckets.end(),
                           [&](const Bucket& b) { return b.ytg_min == lo && b.ytg_max == hi; });
    if (it == buckets.end()) {
      for (const auto& b : buckets) {
        if (lo <= b.ytg_max && b.ytg_min <= hi) {
          fail("overlapping yards-to-go buckets");
        }
      }
      buckets.push_back({lo, hi, std::vector<std::optional<double>>(101)});
      it = buckets.end() - 1;
    }
    auto& slot = it->ep[static_cast<std::size_t>(yl)];
    if (slot) {
      fail("duplicate entry");
    }
    slot = ep;
  }
  for (int down = 1; down <= 4; ++down) {
    auto found = t.buckets_.find(down);
    if (found == t.buckets_.end()) {
      throw std::runtime_error("EP table: no entries for down " + std::to_string(down));
    }
    std::sort(found->second.begin(), found->second.end(),
              [](const Bucket& a, const Bucket& b) { return a.ytg_min < b.ytg_min; });
    for (int yl = kMinYardline; yl <= kMaxYardline; ++yl) {
      const bool covered = std::any_of(found->second.begin(), found->second.end(),
                                       [&](const Bucket& b) { return b.ep[yl].has_value(); });
      if (!covered) {
        throw std::runtime_error("EP table: down " + std::to_string(down) + " has no entry at yardline "
                                 + std::to_string(yl));
      }
    }
  }
  return t;
}

UtilityTable UtilityTable::from_csv(const std::filesystem::path& file)
{
  std::ifstream in(file);
  if (!in) {
    throw std::runtime_error("cannot open EP table " + file.string());
  }
  return from_csv(in);
}

void UtilityTable::write_csv(std::ostream& out) const
{
  csv::write_row(out, {"down", "ytg_min", "ytg_max", "yardline", "ep"});
  if (curve_) {
    for (int down = 1; down <= 4; ++down) {
      for (int ytg = 1; ytg <= 21; ++ytg) {
        const int hi = ytg == 21 ? 99 : ytg;
        for (int yl = kMinYardline; yl <= kMaxYardline; ++yl) {
          csv::write_row(out, {std::to_string(down), std::to_string(ytg), std::to_string(hi),
                               std::to_string(yl), csv::format_double((*curve_)(down, ytg, yl))});
        }
      }
    }
    return;
  }
  for (const auto& [down, buckets] : buckets_) {
    for (const auto& b : buckets) {
      for (std::size_t yl = 0; yl < b.ep.size(); ++yl) {
        if (b.ep[yl]) {
          csv::write_row(out, {std::to_string(down), csv::format_double(b.ytg_min),
                               csv::format_double(b.ytg_max), std::to_string(yl),
                               csv::format_double(*b.ep[yl])});
        }
      }
    }
  }
}

double UtilityTable::lookup(int down, double yards_to_go, double yardline) const
{
  if (curve_) {
    return (*curve_)(down, yards_to_go, yardline);
  }
  bool outside = down < 1 || down > 4 || yardline < kMinYardline || yardline > kMaxYardline;
  const int d = std::clamp(down, 1, 4);
  const auto& buckets = buckets_.at(d);
  const double ytg = std::max(1.0, std::round(yards_to_go));

  // value at an integer yardline from the bucket nearest in yards to go
  auto at = [&](int yl) {
    const Bucket* best = nullptr;
    double best_gap = std::numeric_limits<double>::infinity();
    for (const auto& b : buckets) {
      if (!b.ep[static_cast<std::size_t>(yl)]) {
        continue;
      }
      const double gap = ytg < b.ytg_min ? b.ytg_min - ytg : (ytg > b.ytg_max ? ytg - b.ytg_max : 0.0);
      if (gap < best_gap) {
        best_gap = gap;
        best = &b;
      }
    }
    if (best_gap > 0.0) {
      outside = true;
    }
    return *best->ep[static_cast<std::size_t>(yl)];
  };

  const double yl = std::clamp(yardline, static_cast<double>(kMinYardline),
                               static_cast<double>(kMaxYardline));
  const int y0 = static_cast<int>(std::floor(yl));
  const double frac = yl - y0;
  double v = at(y0);
  if (frac > 0.0) {
    v += frac * (at(y0 + 1) - v);
  }
  if (outside) {
    warn_out_of_domain(down, yards_to_go, yardline);
  }
  return std::clamp(v, -kMaxPoints, kMaxPoints);
}

double UtilityTable::value(const GameState& s) const
{
  const double v = lookup(s.down, s.yards_to_go, s.yardline);
  return s.offense_has_ball ? v : -v;
}

double UtilityTable::value(const NextState& s) const
{
  switch (s.kind) {
  case NextState::Kind::touchdown:
    return kTouchdownValue;
  case NextState::Kind::safety:
    return kSafetyValue;
  case NextState::Kind::play:
    break;
  }
  return value(s.state);
}

double play_value(double ending_x_adj, const PlayContext& context, const UtilityTable& table)
{
  return table.value(next_state(context, ending_x_adj));
}

} // namespace ghostcde
