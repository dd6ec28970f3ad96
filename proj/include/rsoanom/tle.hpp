#pragma once

// Two-line element set decoding.
//
// Column layout (1-indexed, inclusive; both lines are 69 characters):
//
//   line 1:  1      line number '1'
//            3-7    catalog number
//            8      classification
//            10-17  international designator
//            19-20  epoch year (two digits)
//            21-32  epoch day of year, fractional
//            34-43  first derivative of mean motion
//            45-52  second derivative of mean motion (assumed decimal point)
//            54-61  B* drag term (assumed decimal point)
//            63     ephemeris type
//            65-68  element set number
//            69     checksum
//
//   line 2:  1      line number '2'
//            3-7    catalog number
//            9-16   inclination (deg)
//            18-25  right ascension of the ascending node (deg)
//            27-33  eccentricity (assumed leading "0.")
//            35-42  argument of perigee (deg)
//            44-51  mean anomaly (deg)
//            53-63  mean motion (rev/day)
//            64-68  revolution number at epoch
//            69     checksum

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include <fmt/format.h>

#include "rsoanom/elements.hpp"
#include "rsoanom/error.hpp"
#include "rsoanom/time.hpp"

namespace rsoanom {

inline constexpr std::size_t kTleLineLength = 69;

// Mantissa/exponent field with an assumed leading decimal point, e.g.
// " 12345-4" == 0.12345e-4. The exponent sign is kept verbatim because
// catalogs write zero exponents both as "+0" and "-0".
struct PackedExponent {
  int mantissa = 0;  // signed, five digits
  char exponent_sign = '-';
  int exponent = 0;  // single digit magnitude

  double value() const noexcept {
    const int e = exponent_sign == '-' ? -exponent : exponent;
    return static_cast<double>(mantissa) * 1e-5 * std::pow(10.0, e);
  }
  friend bool operator==(const PackedExponent&, const PackedExponent&) = default;
};

struct TleRecord {
  int norad_id = 0;
  Timestamp epoch{};
  OrbitalElements elements{};
  char classification = 'U';
  std::string intl_designator;  // right-trimmed
  int element_set_number = 0;
  std::pair<bool, bool> checksum_valid{true, true};

  // Stored, not interpreted.
  double mean_motion_dot = 0.0;
  PackedExponent mean_motion_ddot{};
  PackedExponent bstar{};
  char ephemeris_type = '0';
  int revolution_number = 0;

  std::optional<std::string> name;  // from a 3-line variant header

  bool checksums_ok() const noexcept { return checksum_valid.first && checksum_valid.second; }

  friend bool operator==(const TleRecord&, const TleRecord&) = default;
};

// Sum of digit values, '-' counting as 1, everything else 0, modulo 10.
// Takes the 68 characters preceding the checksum column.
inline int checksum(std::string_view line68) {
  if (line68.size() != kTleLineLength - 1) {
    throw FormatError(fmt::format("checksum expects 68 characters, got {}", line68.size()));
  }
  int sum = 0;
  for (char c : line68) {
    if (c >= '0' && c <= '9') {
      sum += c - '0';
    } else if (c == '-') {
      sum += 1;
    }
  }
  return sum % 10;
}

// Two-digit year with the 1957 pivot and a fractional day-of-year where 1.0
// is January 1 00:00:00 UTC.
inline Timestamp epoch_decode(int two_digit_year, double day_of_year) {
  if (two_digit_year < 0 || two_digit_year > 99) {
    throw DataError(fmt::format("epoch year {} outside 0-99", two_digit_year));
  }
  if (!(day_of_year >= 1.0 && day_of_year < 367.0)) {
    throw DataError(fmt::format("epoch day {} outside [1, 367)", day_of_year));
  }
  const int year = two_digit_year >= 57 ? 1900 + two_digit_year : 2000 + two_digit_year;
  const auto jan1 = make_timestamp(year, 1, 1);
  const double offset_ns = (day_of_year - 1.0) * static_cast<double>(kNanosPerDay);
  return jan1 + Duration{static_cast<std::int64_t>(std::llround(offset_ns))};
}

namespace detail {

inline std::string_view column(std::string_view line, int first, int last) {
  return line.substr(static_cast<std::size_t>(first - 1), static_cast<std::size_t>(last - first + 1));
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline int parse_int_field(std::string_view line, int line_no, int first, int last, const char* what) {
  auto text = trim(column(line, first, last));
  bool negative = false;
  if (!text.empty() && (text.front() == '+' || text.front() == '-')) {
    negative = text.front() == '-';
    text.remove_prefix(1);
  }
  int value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc{} || ptr != end) {
    throw ParseError(line_no, first, last, fmt::format("unparseable {} '{}'", what, column(line, first, last)));
  }
  return negative ? -value : value;
}

inline double parse_double_field(std::string_view line, int line_no, int first, int last, const char* what) {
  auto text = trim(column(line, first, last));
  bool negative = false;
  if (!text.empty() && (text.front() == '+' || text.front() == '-')) {
    negative = text.front() == '-';
    text.remove_prefix(1);
  }
  double value = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value, std::chars_format::fixed);
  if (text.empty() || ec != std::errc{} || ptr != end || !std::isfinite(value)) {
    throw ParseError(line_no, first, last, fmt::format("unparseable {} '{}'", what, column(line, first, last)));
  }
  return negative ? -value : value;
}

// Integer-exact epoch decode from the 12-character "ddd.dddddddd" field.
inline Timestamp parse_epoch_field(std::string_view line) {
  const int year2 = parse_int_field(line, 1, 19, 20, "epoch year");
  const auto text = trim(column(line, 21, 32));
  const auto dot = text.find('.');
  const auto whole_text = text.substr(0, dot);
  const auto frac_text = dot == std::string_view::npos ? std::string_view{} : text.substr(dot + 1);
  std::int64_t whole = 0;
  auto [p1, e1] = std::from_chars(whole_text.data(), whole_text.data() + whole_text.size(), whole);
  bool ok = !whole_text.empty() && e1 == std::errc{} && p1 == whole_text.data() + whole_text.size();
  std::int64_t frac = 0;
  std::int64_t scale = 1;
  for (char c : frac_text) {
    if (c < '0' || c > '9' || scale > 1'000'000'000'000) {
      ok = false;
      break;
    }
    frac = frac * 10 + (c - '0');
    scale *= 10;
  }
  if (!ok || whole < 1 || whole > 366) {
    throw ParseError(1, 21, 32, fmt::format("unparseable epoch day '{}'", column(line, 21, 32)));
  }
  // Round-half-up to the nearest nanosecond.
  const auto wide = static_cast<__int128>(frac) * kNanosPerDay * 2 / scale;
  const auto frac_ns = static_cast<std::int64_t>((wide + 1) / 2);
  const Timestamp start = epoch_decode(year2, static_cast<double>(whole));
  return start + Duration{frac_ns};
}

inline PackedExponent parse_packed_exponent(std::string_view line, int first, const char* what) {
  // 8 columns: sign, 5 mantissa digits, exponent sign, exponent digit.
  const auto text = column(line, first, first + 7);
  PackedExponent out;
  const char sign = text[0];
  if (sign != ' ' && sign != '-' && sign != '+') {
    throw ParseError(1, first, first + 7, fmt::format("bad sign in {} '{}'", what, text));
  }
  int mantissa = 0;
  for (int i = 1; i <= 5; ++i) {
    const char c = text[static_cast<std::size_t>(i)];
    if (c == ' ') continue;
    if (c < '0' || c > '9') throw ParseError(1, first, first + 7, fmt::format("bad mantissa in {} '{}'", what, text));
    mantissa = mantissa * 10 + (c - '0');
  }
  out.mantissa = sign == '-' ? -mantissa : mantissa;
  out.exponent_sign = text[6];
  if (out.exponent_sign != '-' && out.exponent_sign != '+') {
    throw ParseError(1, first, first + 7, fmt::format("bad exponent sign in {} '{}'", what, text));
  }
  if (text[7] < '0' || text[7] > '9') {
    throw ParseError(1, first, first + 7, fmt::format("bad exponent in {} '{}'", what, text));
  }
  out.exponent = text[7] - '0';
  return out;
}

inline bool checksum_matches(std::string_view line) {
  const char c = line[kTleLineLength - 1];
  return c >= '0' && c <= '9' && checksum(line.substr(0, kTleLineLength - 1)) == c - '0';
}

}  // namespace detail

// Decode one line pair. A checksum mismatch is reported through
// `checksum_valid`, never thrown: historical catalogs contain checksum drift.
inline TleRecord parse_tle(std::string_view line1, std::string_view line2) {
  using detail::parse_double_field;
  using detail::parse_int_field;
  while (!line1.empty() && line1.back() == '\r') line1.remove_suffix(1);
  while (!line2.empty() && line2.back() == '\r') line2.remove_suffix(1);
  if (line1.size() != kTleLineLength) {
    throw ParseError(1, 1, static_cast<int>(line1.size()),
                     fmt::format("expected {} characters, got {}", kTleLineLength, line1.size()));
  }
  if (line2.size() != kTleLineLength) {
    throw ParseError(2, 1, static_cast<int>(line2.size()),
                     fmt::format("expected {} characters, got {}", kTleLineLength, line2.size()));
  }
  if (line1[0] != '1') throw ParseError(1, 1, 1, "line number must be '1'");
  if (line2[0] != '2') throw ParseError(2, 1, 1, "line number must be '2'");

  TleRecord r;
  r.norad_id = parse_int_field(line1, 1, 3, 7, "catalog number");
  const int id2 = parse_int_field(line2, 2, 3, 7, "catalog number");
  if (r.norad_id <= 0) throw ParseError(1, 3, 7, "catalog number must be positive");
  if (id2 != r.norad_id) {
    throw ParseError(2, 3, 7, fmt::format("catalog number {} does not match line 1 ({})", id2, r.norad_id));
  }
  r.classification = line1[7];
  r.intl_designator = std::string(detail::trim(detail::column(line1, 10, 17)));
  r.epoch = detail::parse_epoch_field(line1);
  r.mean_motion_dot = parse_double_field(line1, 1, 34, 43, "mean motion derivative");
  r.mean_motion_ddot = detail::parse_packed_exponent(line1, 45, "second derivative");
  r.bstar = detail::parse_packed_exponent(line1, 54, "B*");
  r.ephemeris_type = line1[62];
  r.element_set_number = parse_int_field(line1, 1, 65, 68, "element set number");

  auto& el = r.elements;
  el.inclination = parse_double_field(line2, 2, 9, 16, "inclination");
  el.raan = parse_double_field(line2, 2, 18, 25, "RAAN");
  {
    const auto ecc_text = detail::column(line2, 27, 33);
    int digits = 0;
    for (char c : ecc_text) {
      if (c < '0' || c > '9') throw ParseError(2, 27, 33, fmt::format("unparseable eccentricity '{}'", ecc_text));
      digits = digits * 10 + (c - '0');
    }
    el.eccentricity = static_cast<double>(digits) / 1e7;
  }
  el.arg_perigee = parse_double_field(line2, 2, 35, 42, "argument of perigee");
  el.mean_anomaly = parse_double_field(line2, 2, 44, 51, "mean anomaly");
  el.mean_motion = parse_double_field(line2, 2, 53, 63, "mean motion");
  r.revolution_number = parse_int_field(line2, 2, 64, 68, "revolution number");

  if (el.inclination < 0.0 || el.inclination > 180.0) throw ParseError(2, 9, 16, "inclination outside [0, 180]");
  if (el.raan < 0.0 || el.raan >= 360.0) throw ParseError(2, 18, 25, "RAAN outside [0, 360)");
  if (el.arg_perigee < 0.0 || el.arg_perigee >= 360.0) throw ParseError(2, 35, 42, "argument of perigee outside [0, 360)");
  if (el.mean_anomaly < 0.0 || el.mean_anomaly >= 360.0) throw ParseError(2, 44, 51, "mean anomaly outside [0, 360)");
  if (!(el.mean_motion > 0.0)) throw ParseError(2, 53, 63, "mean motion must be positive");

  r.checksum_valid = {detail::checksum_matches(line1), detail::checksum_matches(line2)};
  return r;
}

}  // namespace rsoanom
