#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include <fmt/format.h>

#include "rsoanom/error.hpp"

namespace rsoanom {

// UTC instant with nanosecond resolution. A TLE epoch carries eight decimal
// places of day, i.e. multiples of 864 microseconds, so this is exact.
using Timestamp = std::chrono::sys_time<std::chrono::nanoseconds>;
using Duration = std::chrono::nanoseconds;

inline constexpr std::int64_t kNanosPerDay = 86'400'000'000'000;

inline Timestamp make_timestamp(int year, unsigned month, unsigned day, int hour = 0, int minute = 0,
                                int second = 0) {
  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
  if (!ymd.ok()) throw ConfigError(fmt::format("invalid date {}-{}-{}", year, month, day));
  return Timestamp{sys_days{ymd}} + hours{hour} + minutes{minute} + seconds{second};
}

// ISO-8601 with a trailing Z. Sub-second digits are emitted only when nonzero
// so that whole-second timestamps print compactly.
inline std::string to_iso8601(Timestamp t) {
  using namespace std::chrono;
  const auto day = floor<days>(t);
  const year_month_day ymd{day};
  const hh_mm_ss<nanoseconds> hms{t - day};
  std::string out = fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}", int(ymd.year()),
                                unsigned(ymd.month()), unsigned(ymd.day()), hms.hours().count(),
                                hms.minutes().count(), hms.seconds().count());
  const auto ns = hms.subseconds().count();
  if (ns != 0) {
    std::string frac = fmt::format("{:09d}", ns);
    while (!frac.empty() && frac.back() == '0') frac.pop_back();
    out += "." + frac;
  }
  out += "Z";
  return out;
}

// Parses "YYYY-MM-DD", "YYYY-MM-DDTHH:MM:SS[.fff][Z]".
inline Timestamp parse_iso8601(std::string_view s) {
  auto bad = [&] { return ConfigError(fmt::format("invalid timestamp '{}'", s)); };
  auto num = [&](std::size_t pos, std::size_t len) {
    if (pos + len > s.size()) throw bad();
    int v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
      if (s[i] < '0' || s[i] > '9') throw bad();
      v = v * 10 + (s[i] - '0');
    }
    return v;
  };
  if (s.size() < 10 || s[4] != '-' || s[7] != '-') throw bad();
  const int y = num(0, 4);
  const int mo = num(5, 2);
  const int d = num(8, 2);
  int h = 0, mi = 0, se = 0;
  std::int64_t frac_ns = 0;
  std::size_t pos = 10;
  if (pos < s.size() && (s[pos] == 'T' || s[pos] == ' ')) {
    if (s.size() < 19 || s[13] != ':' || s[16] != ':') throw bad();
    h = num(11, 2);
    mi = num(14, 2);
    se = num(17, 2);
    pos = 19;
    if (pos < s.size() && s[pos] == '.') {
      ++pos;
      std::int64_t scale = 100'000'000;
      while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
        frac_ns += (s[pos] - '0') * scale;
        scale /= 10;
        ++pos;
      }
    }
  }
  if (pos < s.size() && s[pos] == 'Z') ++pos;
  if (pos != s.size() || mo < 1 || mo > 12 || h > 23 || mi > 59 || se > 60) throw bad();
  return make_timestamp(y, static_cast<unsigned>(mo), static_cast<unsigned>(d), h, mi, se) +
         Duration{frac_ns};
}

inline double days_between(Timestamp from, Timestamp to) {
  return static_cast<double>((to - from).count()) / static_cast<double>(kNanosPerDay);
}

inline Timestamp add_days(Timestamp t, double days) {
  return t + Duration{static_cast<std::int64_t>(std::llround(days * static_cast<double>(kNanosPerDay)))};
}

// "YYYY-MM" bucket label for a UTC instant.
inline std::string month_label(Timestamp t) {
  using namespace std::chrono;
  const year_month_day ymd{floor<days>(t)};
  return fmt::format("{:04d}-{:02d}", int(ymd.year()), unsigned(ymd.month()));
}

// Half-open [start, end) interval with a name.
struct PeriodWindow {
  std::string name;
  Timestamp start;
  Timestamp end;

  bool contains(Timestamp t) const noexcept { return t >= start && t < end; }
  void validate() const {
    if (!(start < end)) {
      throw ConfigError(fmt::format("window '{}': start {} must precede end {}", name, to_iso8601(start),
                                    to_iso8601(end)));
    }
  }
};

}  // namespace rsoanom
