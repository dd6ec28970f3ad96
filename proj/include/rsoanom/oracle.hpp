#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "rsoanom/elements.hpp"
#include "rsoanom/ephemeris.hpp"
#include "rsoanom/error.hpp"

namespace rsoanom {

struct Quartiles {
  double q1 = 0.0;
  double q3 = 0.0;
  double iqr() const noexcept { return q3 - q1; }
};

// Linear-interpolation ("type 7") quantile of an already sorted sequence.
inline double sorted_quantile(std::span<const double> sorted, double p) {
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const double frac = h - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) return sorted[lo];
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline Quartiles quartiles(std::span<const double> values) {
  if (values.size() < 4) throw DataError(fmt::format("quartiles need at least 4 values, got {}", values.size()));
  for (double v : values) {
    if (!std::isfinite(v)) throw DataError("quartiles: non-finite value");
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return {sorted_quantile(sorted, 0.25), sorted_quantile(sorted, 0.75)};
}

struct Fences {
  double lower = 0.0;
  double upper = 0.0;
};

inline Fences iqr_fences(const Quartiles& q) {
  const double iqr = q.iqr();
  return {q.q1 - 1.5 * iqr, q.q3 + 1.5 * iqr};
}

// True where a value falls outside [Q1 - 1.5 IQR, Q3 + 1.5 IQR].
inline std::vector<bool> iqr_outliers(std::span<const double> values) {
  const auto f = iqr_fences(quartiles(values));
  std::vector<bool> mask(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) mask[i] = values[i] < f.lower || values[i] > f.upper;
  return mask;
}

// Angles within this many degrees of the 0/360 seam are reported as near-wrap.
inline constexpr double kNearWrapDegrees = 5.0;

struct LabelTable {
  int norad_id = 0;
  Element element = Element::kMeanMotion;
  std::vector<Timestamp> epochs;
  std::vector<double> values;
  std::vector<bool> labels;
  double q1 = 0.0;
  double q3 = 0.0;
  double iqr = 0.0;

  std::size_t outlier_count() const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));
  }
};

inline std::vector<double> element_values(const EphemerisSeries& s, Element e) {
  std::vector<double> v;
  v.reserve(s.size());
  for (const auto& r : s.observations) v.push_back(r.elements[e]);
  return v;
}

inline LabelTable label_series(const EphemerisSeries& s, Element e) {
  LabelTable t;
  t.norad_id = s.norad_id;
  t.element = e;
  t.values = element_values(s, e);
  for (const auto& r : s.observations) t.epochs.push_back(r.epoch);
  const auto q = quartiles(t.values);
  const auto f = iqr_fences(q);
  t.q1 = q.q1;
  t.q3 = q.q3;
  t.iqr = q.iqr();
  t.labels.resize(t.values.size());
  for (std::size_t i = 0; i < t.values.size(); ++i) t.labels[i] = t.values[i] < f.lower || t.values[i] > f.upper;
  return t;
}

struct LabelingResult {
  std::vector<LabelTable> tables;
  std::vector<std::string> warnings;
};

// One table per (object, element), with fences computed over the observations
// inside `window` only. Objects with fewer than four observations there are
// skipped with a warning.
inline LabelingResult label_population(const SeriesMap& series, std::span<const int> ids,
                                       std::span<const Element> elements, const PeriodWindow& window) {
  LabelingResult out;
  for (int id : ids) {
    auto it = series.find(id);
    if (it == series.end()) {
      out.warnings.push_back(fmt::format("{}: no series", id));
      continue;
    }
    const auto windowed = it->second.slice(window);
    if (windowed.size() < 4) {
      out.warnings.push_back(
          fmt::format("{}: {} observations in window '{}', need 4", id, windowed.size(), window.name));
      continue;
    }
    for (Element e : elements) out.tables.push_back(label_series(windowed, e));
  }
  return out;
}

inline bool near_wrap(Element e, double value) {
  return is_wrapping_angle(e) && (value < kNearWrapDegrees || value > 360.0 - kNearWrapDegrees);
}

// norad_id,element,epoch,value,is_outlier,near_wrap
inline std::string export_labels(std::span<const LabelTable> tables) {
  std::string out = "norad_id,element,epoch,value,is_outlier,near_wrap\n";
  for (const auto& t : tables) {
    for (std::size_t i = 0; i < t.values.size(); ++i) {
      out += fmt::format("{},{},{},{:.10g},{},{}\n", t.norad_id, name_of(t.element), to_iso8601(t.epochs[i]),
                         t.values[i], t.labels[i] ? 1 : 0, near_wrap(t.element, t.values[i]) ? 1 : 0);
    }
  }
  return out;
}

}  // namespace rsoanom
