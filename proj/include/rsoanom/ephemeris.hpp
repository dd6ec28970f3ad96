#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "rsoanom/error.hpp"
#include "rsoanom/tle.hpp"

namespace rsoanom {

// Time-ordered observations of one object. Epochs are strictly increasing.
struct EphemerisSeries {
  int norad_id = 0;
  std::vector<TleRecord> observations;

  std::size_t size() const noexcept { return observations.size(); }
  bool empty() const noexcept { return observations.empty(); }

  // Observations with epoch in [window.start, window.end).
  EphemerisSeries slice(const PeriodWindow& window) const {
    EphemerisSeries out{norad_id, {}};
    for (const auto& r : observations) {
      if (window.contains(r.epoch)) out.observations.push_back(r);
    }
    return out;
  }

  std::size_t count_in(const PeriodWindow& window) const {
    return static_cast<std::size_t>(std::count_if(observations.begin(), observations.end(),
                                                   [&](const TleRecord& r) { return window.contains(r.epoch); }));
  }
};

using SeriesMap = std::map<int, EphemerisSeries>;

struct RejectedRecord {
  std::size_t line_number = 0;  // 1-indexed line in the source
  std::string reason;
};

struct LoadReport {
  std::size_t records_parsed = 0;
  std::size_t duplicates_removed = 0;
  std::size_t checksum_warnings = 0;
  std::vector<RejectedRecord> rejected;
};

struct LoadResult {
  SeriesMap series;
  LoadReport report;
};

// Sort each series by epoch and collapse exact epoch collisions, keeping the
// record with the highest element set number (first seen on ties).
inline std::size_t normalize_series(EphemerisSeries& s) {
  std::stable_sort(s.observations.begin(), s.observations.end(), [](const TleRecord& a, const TleRecord& b) {
    if (a.epoch != b.epoch) return a.epoch < b.epoch;
    return a.element_set_number > b.element_set_number;
  });
  const auto before = s.observations.size();
  auto last = std::unique(s.observations.begin(), s.observations.end(),
                          [](const TleRecord& a, const TleRecord& b) { return a.epoch == b.epoch; });
  s.observations.erase(last, s.observations.end());
  return before - s.observations.size();
}

inline SeriesMap group_records(std::vector<TleRecord> records, std::size_t* duplicates_removed = nullptr) {
  SeriesMap out;
  for (auto& r : records) {
    auto& s = out[r.norad_id];
    s.norad_id = r.norad_id;
    s.observations.push_back(std::move(r));
  }
  std::size_t dups = 0;
  for (auto& [id, s] : out) dups += normalize_series(s);
  if (duplicates_removed != nullptr) *duplicates_removed = dups;
  return out;
}

namespace detail {

inline bool looks_like_tle_line(std::string_view line, char number) {
  return line.size() >= 2 && line[0] == number && line[1] == ' ';
}

}  // namespace detail

// Parse concatenated 2-line or 3-line (named) records. Records that fail to
// parse are listed in the report, never dropped silently.
inline LoadResult load_tle_text(std::string_view text) {
  std::vector<std::string_view> lines;
  {
    std::size_t pos = 0;
    while (pos <= text.size()) {
      auto nl = text.find('\n', pos);
      if (nl == std::string_view::npos) nl = text.size();
      auto line = text.substr(pos, nl - pos);
      while (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      lines.push_back(line);
      pos = nl + 1;
    }
  }

  LoadResult result;
  std::vector<TleRecord> records;
  std::optional<std::string> pending_name;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = lines[i];
    if (detail::trim(line).empty()) continue;
    if (detail::looks_like_tle_line(line, '1')) {
      if (i + 1 < lines.size() && detail::looks_like_tle_line(lines[i + 1], '2')) {
        try {
          auto rec = parse_tle(line, lines[i + 1]);
          rec.name = pending_name;
          if (!rec.checksums_ok()) ++result.report.checksum_warnings;
          records.push_back(std::move(rec));
          ++result.report.records_parsed;
        } catch (const ParseError& e) {
          result.report.rejected.push_back({i + 1, e.what()});
        }
        ++i;
      } else {
        result.report.rejected.push_back({i + 1, "line 1 without a following line 2"});
      }
      pending_name.reset();
    } else if (detail::looks_like_tle_line(line, '2')) {
      result.report.rejected.push_back({i + 1, "line 2 without a preceding line 1"});
      pending_name.reset();
    } else {
      auto name = detail::trim(line);
      if (name.size() >= 2 && name[0] == '0' && name[1] == ' ') name = detail::trim(name.substr(2));
      pending_name = std::string(name);
    }
  }
  result.series = group_records(std::move(records), &result.report.duplicates_removed);
  return result;
}

inline LoadResult load_tle_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot read TLE file '{}'", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  auto result = load_tle_text(buf.str());
  if (result.series.empty()) {
    throw DataError(fmt::format("no valid records in '{}' ({} rejected)", path.string(),
                                result.report.rejected.size()));
  }
  return result;
}

}  // namespace rsoanom
