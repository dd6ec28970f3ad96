#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include <fmt/format.h>

#include "rsoanom/error.hpp"

namespace rsoanom::stats {

// Regularized upper incomplete gamma Q(a, x): power series for x < a + 1,
// Lentz continued fraction otherwise.
inline double gamma_q(double a, double x) {
  if (!(a > 0.0) || x < 0.0) throw DataError("gamma_q: need a > 0 and x >= 0");
  if (x == 0.0) return 1.0;
  const double log_prefix = a * std::log(x) - x - std::lgamma(a);
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  if (x < a + 1.0) {
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int i = 0; i < kMaxIter; ++i) {
      ap += 1.0;
      term *= x / ap;
      sum += term;
      if (std::abs(term) < std::abs(sum) * kEps) break;
    }
    return 1.0 - sum * std::exp(log_prefix);
  }
  constexpr double kTiny = std::numeric_limits<double>::min() / kEps;
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) break;
  }
  return std::exp(log_prefix) * h;
}

// Survival function of the chi-square distribution.
inline double chi_square_sf(double statistic, double dof) { return gamma_q(dof / 2.0, statistic / 2.0); }

// Anomalous vs total observation counts in two periods.
struct ContingencyTable2x2 {
  std::uint64_t anomalies_a = 0;
  std::uint64_t total_a = 0;
  std::uint64_t anomalies_b = 0;
  std::uint64_t total_b = 0;

  void validate() const {
    if (anomalies_a > total_a || anomalies_b > total_b) throw DataError("anomaly count exceeds period total");
  }

  // [[anomalous_a, normal_a], [anomalous_b, normal_b]]
  std::array<std::array<double, 2>, 2> observed() const {
    return {{{double(anomalies_a), double(total_a - anomalies_a)}, {double(anomalies_b), double(total_b - anomalies_b)}}};
  }
};

struct ChiSquareResult {
  double statistic = 0.0;    // Yates-corrected
  double uncorrected = 0.0;  // plain Pearson statistic, for reference
  double p_value = 1.0;

  // "< 0.001" below that bound, else three significant decimals.
  std::string p_text() const { return p_value < 0.001 ? "< 0.001" : fmt::format("{:.3f}", p_value); }
};

// Pearson chi-square on a 2x2 table with Yates' continuity correction, one
// degree of freedom. The correction never overshoots: each |O - E| shrinks by
// at most 0.5 and not below zero.
inline ChiSquareResult chi_square_2x2(const ContingencyTable2x2& t) {
  t.validate();
  const auto o = t.observed();
  const std::array<double, 2> rows{o[0][0] + o[0][1], o[1][0] + o[1][1]};
  const std::array<double, 2> cols{o[0][0] + o[1][0], o[0][1] + o[1][1]};
  const double n = rows[0] + rows[1];
  if (rows[0] == 0 || rows[1] == 0 || cols[0] == 0 || cols[1] == 0) {
    throw DataError("chi-square needs non-zero row and column totals");
  }
  ChiSquareResult r;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double e = rows[i] * cols[j] / n;
      const double dev = std::abs(o[i][j] - e);
      const double corrected = dev - std::min(0.5, dev);
      r.statistic += corrected * corrected / e;
      r.uncorrected += dev * dev / e;
    }
  }
  r.p_value = chi_square_sf(r.statistic, 1.0);
  return r;
}

}  // namespace rsoanom::stats
