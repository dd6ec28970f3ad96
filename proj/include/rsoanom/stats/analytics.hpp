#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "rsoanom/catalog.hpp"
#include "rsoanom/elements.hpp"
#include "rsoanom/ephemeris.hpp"
#include "rsoanom/error.hpp"
#include "rsoanom/stats/metrics.hpp"
#include "rsoanom/time.hpp"

namespace rsoanom::stats {

// One scored observation joined to its object's mission class.
struct ScoredObservation {
  int norad_id = 0;
  Timestamp epoch{};
  MissionClass mission = MissionClass::kUnidentified;
  ElementFlags flags{};

  bool any_flag() const noexcept { return std::any_of(flags.begin(), flags.end(), [](bool b) { return b; }); }
};

// Flagged observations over all observations inside the window.
inline double anomaly_rate(std::span<const ScoredObservation> obs, const PeriodWindow& window) {
  std::size_t n = 0;
  std::size_t flagged = 0;
  for (const auto& o : obs) {
    if (!window.contains(o.epoch)) continue;
    ++n;
    flagged += o.any_flag() ? 1 : 0;
  }
  if (n == 0) throw DataError(fmt::format("no observations in window '{}'", window.name));
  return static_cast<double>(flagged) / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Monthly counts

struct MonthlyRow {
  std::string group;  // mission class name, or "all"
  std::string month;  // YYYY-MM (UTC)
  std::int64_t count = 0;
  std::optional<std::int64_t> change;  // vs previous month; none for the first
  std::optional<double> pct_change;    // percent; none when the previous count is 0
  bool exceeds_mean = false;           // change above the group's mean change
};

inline std::optional<double> percent_change(double old_value, double new_value) {
  if (old_value == 0.0) return std::nullopt;
  return (new_value - old_value) / old_value * 100.0;
}

namespace detail {

inline int month_index(Timestamp t) {
  const std::chrono::year_month_day ymd{std::chrono::floor<std::chrono::days>(t)};
  return int(ymd.year()) * 12 + static_cast<int>(unsigned(ymd.month())) - 1;
}

inline std::string month_name(int index) { return fmt::format("{:04d}-{:02d}", index / 12, index % 12 + 1); }

}  // namespace detail

// Flagged-observation counts per calendar month, over the contiguous month
// span covered by the flagged observations. Groups are mission classes, or a
// single "all" group.
inline std::vector<MonthlyRow> monthly_counts(std::span<const ScoredObservation> obs, bool by_mission) {
  std::map<std::string, std::map<int, std::int64_t>> counts;
  std::optional<int> first, last;
  for (const auto& o : obs) {
    if (!o.any_flag()) continue;
    const int m = detail::month_index(o.epoch);
    const std::string group = by_mission ? std::string(to_string(o.mission)) : "all";
    ++counts[group][m];
    first = first ? std::min(*first, m) : m;
    last = last ? std::max(*last, m) : m;
  }
  std::vector<MonthlyRow> out;
  for (const auto& [group, by_month] : counts) {
    const auto begin = out.size();
    std::optional<std::int64_t> prev;
    double change_sum = 0.0;
    std::size_t change_n = 0;
    for (int m = *first; m <= *last; ++m) {
      MonthlyRow row;
      row.group = group;
      row.month = detail::month_name(m);
      auto it = by_month.find(m);
      row.count = it == by_month.end() ? 0 : it->second;
      if (prev) {
        row.change = row.count - *prev;
        row.pct_change = percent_change(double(*prev), double(row.count));
        change_sum += double(*row.change);
        ++change_n;
      }
      prev = row.count;
      out.push_back(row);
    }
    if (change_n > 0) {
      const double mean = change_sum / double(change_n);
      for (auto i = begin; i < out.size(); ++i) out[i].exceeds_mean = out[i].change && double(*out[i].change) > mean;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Differences between consecutive observations

// Shortest signed angular step from `from` to `to`, in (-180, 180].
inline double wrap_difference(double from, double to) {
  double d = std::fmod(to - from, 360.0);
  if (d > 180.0) d -= 360.0;
  if (d <= -180.0) d += 360.0;
  return d;
}

inline std::vector<double> differences(std::span<const double> v) {
  if (v.size() < 2) throw DataError(fmt::format("differencing needs at least 2 values, got {}", v.size()));
  std::vector<double> out(v.size() - 1);
  for (std::size_t i = 1; i < v.size(); ++i) out[i - 1] = v[i] - v[i - 1];
  return out;
}

struct DiffSeries {
  int norad_id = 0;
  std::vector<Timestamp> epochs;  // epoch of X_T for each delta
  std::array<std::vector<double>, kNumElements> raw;
  // Equal to raw for non-angular elements.
  std::array<std::vector<double>, kNumElements> wrapped;
};

inline DiffSeries diff_series(const EphemerisSeries& s) {
  if (s.size() < 2) throw DataError(fmt::format("{}: differencing needs at least 2 observations", s.norad_id));
  DiffSeries d;
  d.norad_id = s.norad_id;
  for (std::size_t i = 1; i < s.size(); ++i) d.epochs.push_back(s.observations[i].epoch);
  for (Element e : kAllElements) {
    const auto idx = index_of(e);
    std::vector<double> v;
    for (const auto& r : s.observations) v.push_back(r.elements[e]);
    d.raw[idx] = differences(v);
    d.wrapped[idx] = d.raw[idx];
    if (is_wrapping_angle(e)) {
      for (std::size_t i = 1; i < v.size(); ++i) d.wrapped[idx][i - 1] = wrap_difference(v[i - 1], v[i]);
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// Orbital regime

enum class Regime { kLeo, kMeo, kGeo };

inline std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::kLeo: return "LEO";
    case Regime::kMeo: return "MEO";
    case Regime::kGeo: return "GEO";
  }
  return "MEO";
}

struct RegimeThresholds {
  double geo_mean_motion = 1.0027;
  double geo_tolerance = 0.01;
  double leo_min_mean_motion = 11.25;
};

inline Regime regime_of(double mean_motion, const RegimeThresholds& t = {}) {
  if (!(mean_motion > 0.0)) throw DataError(fmt::format("mean motion {} must be positive", mean_motion));
  if (std::abs(mean_motion - t.geo_mean_motion) <= t.geo_tolerance) return Regime::kGeo;
  if (mean_motion >= t.leo_min_mean_motion) return Regime::kLeo;
  return Regime::kMeo;
}

// Regime of a series from its median mean motion.
inline Regime regime_of(const EphemerisSeries& s, const RegimeThresholds& t = {}) {
  if (s.empty()) throw DataError(fmt::format("{}: empty series has no regime", s.norad_id));
  std::vector<double> n;
  for (const auto& r : s.observations) n.push_back(r.elements.mean_motion);
  std::nth_element(n.begin(), n.begin() + static_cast<std::ptrdiff_t>(n.size() / 2), n.end());
  return regime_of(n[n.size() / 2], t);
}

// ---------------------------------------------------------------------------
// Correlations

using CorrelationMatrix = std::array<std::array<std::optional<double>, kNumElements>, kNumElements>;

// Pearson correlations between the six columns. Cells are empty with fewer
// than three rows or when a column has zero variance.
inline CorrelationMatrix pearson_matrix(std::span<const std::array<double, kNumElements>> rows) {
  CorrelationMatrix m{};
  if (rows.size() < 3) return m;
  const auto n = static_cast<double>(rows.size());
  std::array<double, kNumElements> mean{};
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < kNumElements; ++c) mean[c] += r[c];
  }
  for (double& v : mean) v /= n;
  std::array<std::array<double, kNumElements>, kNumElements> cov{};
  for (const auto& r : rows) {
    for (std::size_t a = 0; a < kNumElements; ++a) {
      for (std::size_t b = a; b < kNumElements; ++b) cov[a][b] += (r[a] - mean[a]) * (r[b] - mean[b]);
    }
  }
  for (std::size_t a = 0; a < kNumElements; ++a) {
    if (!(cov[a][a] > 0.0)) continue;
    m[a][a] = 1.0;
    for (std::size_t b = a + 1; b < kNumElements; ++b) {
      if (!(cov[b][b] > 0.0)) continue;
      const double r = std::clamp(cov[a][b] / std::sqrt(cov[a][a] * cov[b][b]), -1.0, 1.0);
      m[a][b] = r;
      m[b][a] = r;
    }
  }
  return m;
}

struct CorrelationGroup {
  std::string mission;
  Regime regime = Regime::kLeo;
  std::size_t samples = 0;
  CorrelationMatrix r{};
};

// Correlations of wrap-adjusted consecutive differences, grouped by mission
// class and orbital regime. When `only_at` is given, only deltas ending at
// those (norad_id, epoch) observations are used.
inline std::vector<CorrelationGroup> element_correlations(
    const SeriesMap& series, const std::map<int, MissionClass>& missions,
    const std::set<std::pair<int, Timestamp>>* only_at = nullptr, const RegimeThresholds& thresholds = {}) {
  std::map<std::pair<std::string, Regime>, std::vector<std::array<double, kNumElements>>> groups;
  for (const auto& [id, s] : series) {
    if (s.size() < 2) continue;
    auto mit = missions.find(id);
    const auto mission = mit == missions.end() ? MissionClass::kUnidentified : mit->second;
    const auto d = diff_series(s);
    auto& rows = groups[{std::string(to_string(mission)), regime_of(s, thresholds)}];
    for (std::size_t i = 0; i < d.epochs.size(); ++i) {
      if (only_at && !only_at->contains({id, d.epochs[i]})) continue;
      std::array<double, kNumElements> row{};
      for (std::size_t e = 0; e < kNumElements; ++e) row[e] = d.wrapped[e][i];
      rows.push_back(row);
    }
  }
  std::vector<CorrelationGroup> out;
  for (const auto& [key, rows] : groups) {
    out.push_back({key.first, key.second, rows.size(), pearson_matrix(rows)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Baseline vs lead-up element means

struct PercentChangeRow {
  std::string mission;
  std::array<std::optional<double>, kNumElements> baseline_mean{};
  std::array<std::optional<double>, kNumElements> leadup_mean{};
  std::array<std::optional<double>, kNumElements> pct_change{};
};

// Per mission class, the mean of each element over all observations in each
// window and the percent change between them.
inline std::vector<PercentChangeRow> percent_change_table(const SeriesMap& series,
                                                          const std::map<int, MissionClass>& missions,
                                                          const PeriodWindow& baseline, const PeriodWindow& leadup) {
  struct Acc {
    std::array<double, kNumElements> sum{};
    std::size_t n = 0;
  };
  std::map<std::string, std::pair<Acc, Acc>> acc;
  for (const auto& [id, s] : series) {
    auto mit = missions.find(id);
    const auto mission = std::string(to_string(mit == missions.end() ? MissionClass::kUnidentified : mit->second));
    for (const auto& r : s.observations) {
      Acc* a = baseline.contains(r.epoch) ? &acc[mission].first : leadup.contains(r.epoch) ? &acc[mission].second : nullptr;
      if (!a) continue;
      for (std::size_t e = 0; e < kNumElements; ++e) a->sum[e] += r.elements[static_cast<Element>(e)];
      ++a->n;
    }
  }
  std::vector<PercentChangeRow> out;
  for (const auto& [mission, pair] : acc) {
    PercentChangeRow row;
    row.mission = mission;
    for (std::size_t e = 0; e < kNumElements; ++e) {
      if (pair.first.n > 0) row.baseline_mean[e] = pair.first.sum[e] / double(pair.first.n);
      if (pair.second.n > 0) row.leadup_mean[e] = pair.second.sum[e] / double(pair.second.n);
      if (row.baseline_mean[e] && row.leadup_mean[e]) row.pct_change[e] = percent_change(*row.baseline_mean[e], *row.leadup_mean[e]);
    }
    out.push_back(row);
  }
  return out;
}

}  // namespace rsoanom::stats
