#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "rsoanom/delimited.hpp"
#include "rsoanom/ephemeris.hpp"
#include "rsoanom/error.hpp"
#include "rsoanom/time.hpp"

namespace rsoanom {

enum class ObjectType { kPayload, kSatellite, kDebris, kRocketBody, kUnknown };

inline constexpr std::array<std::string_view, 5> kObjectTypeNames = {"PAYLOAD", "SATELLITE", "DEBRIS",
                                                                     "ROCKET_BODY", "UNKNOWN"};

inline std::string_view to_string(ObjectType t) { return kObjectTypeNames[static_cast<std::size_t>(t)]; }

inline ObjectType object_type_from_string(std::string_view raw) {
  std::string s;
  for (char c : raw) s += c == ' ' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (std::size_t i = 0; i < kObjectTypeNames.size(); ++i) {
    if (kObjectTypeNames[i] == s) return static_cast<ObjectType>(i);
  }
  // Space-track style abbreviations.
  if (s == "PAY") return ObjectType::kPayload;
  if (s == "DEB") return ObjectType::kDebris;
  if (s == "R/B" || s == "ROCKET" || s == "RB") return ObjectType::kRocketBody;
  if (s == "UNK" || s == "TBA" || s.empty()) return ObjectType::kUnknown;
  throw DataError(fmt::format("unknown object type '{}'", raw));
}

// Closed set of mission labels. Composite missions are distinct values.
enum class MissionClass {
  kAstronomy,
  kCommunications,
  kCommunicationsOther,
  kCommunicationsSurveillanceAndOtherMilitary,
  kCommunicationsTechnologyApplications,
  kEarthScience,
  kEarthScienceCommunications,
  kEarthScienceNavigationGlobalPositioning,
  kEarthScienceSpacePhysics,
  kEarthScienceSurveillanceAndOtherMilitary,
  kEngineering,
  kNavigationGlobalPositioning,
  kNavigationGlobalPositioningSurveillanceAndOtherMilitary,
  kOther,
  kPlanetaryScience,
  kSolarPhysics,
  kSpacePhysics,
  kSurveillanceAndOtherMilitary,
  kTechnologyApplications,
  kUncategorizedCosmos,
  kUnidentified,
};

inline constexpr std::array<std::string_view, 21> kMissionClassNames = {
    "astronomy",
    "communications",
    "communications_other",
    "communications_surveillance_and_other_military",
    "communications_technology_applications",
    "earth_science",
    "earth_science_communications",
    "earth_science_navigation_global_positioning",
    "earth_science_space_physics",
    "earth_science_surveillance_and_other_military",
    "engineering",
    "navigation_global_positioning",
    "navigation_global_positioning_surveillance_and_other_military",
    "other",
    "planetary_science",
    "solar_physics",
    "space_physics",
    "surveillance_and_other_military",
    "technology_applications",
    "uncategorized_cosmos",
    "unidentified",
};

inline std::string_view to_string(MissionClass m) { return kMissionClassNames[static_cast<std::size_t>(m)]; }

inline std::optional<MissionClass> mission_class_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kMissionClassNames.size(); ++i) {
    if (kMissionClassNames[i] == s) return static_cast<MissionClass>(i);
  }
  return std::nullopt;
}

struct SatCatEntry {
  int norad_id = 0;
  std::string country_code;
  ObjectType object_type = ObjectType::kUnknown;
  std::string object_name;
  std::optional<std::chrono::sys_days> launch_date;
  std::optional<std::chrono::sys_days> decay_date;
};

class SatCat {
 public:
  SatCat() = default;

  void add(SatCatEntry e) {
    const int id = e.norad_id;
    if (!entries_.emplace(id, std::move(e)).second) {
      throw DataError(fmt::format("duplicate norad_id {} in satellite catalog", id));
    }
  }

  const SatCatEntry* find(int norad_id) const {
    auto it = entries_.find(norad_id);
    return it == entries_.end() ? nullptr : &it->second;
  }

  std::size_t size() const noexcept { return entries_.size(); }
  const std::map<int, SatCatEntry>& entries() const noexcept { return entries_; }

 private:
  std::map<int, SatCatEntry> entries_;
};

namespace detail {

inline int parse_norad(std::string_view s, std::string_view source) {
  auto t = trim(s);
  int v = 0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc{} || p != t.data() + t.size() || v <= 0) {
    throw DataError(fmt::format("{}: invalid norad_id '{}'", source, s));
  }
  return v;
}

inline std::optional<std::chrono::sys_days> parse_optional_date(std::string_view s, std::string_view source) {
  auto t = trim(s);
  if (t.empty()) return std::nullopt;
  try {
    return std::chrono::floor<std::chrono::days>(parse_iso8601(t));
  } catch (const ConfigError&) {
    throw DataError(fmt::format("{}: invalid date '{}'", source, s));
  }
}

}  // namespace detail

// Header columns: norad_id, country, object_type, name, launch_date, decay_date.
inline SatCat parse_satcat(const DelimitedTable& t, std::string_view source) {
  const auto c_id = t.require_column("norad_id", source);
  const auto c_country = t.require_column("country", source);
  const auto c_type = t.require_column("object_type", source);
  const auto c_name = t.column("name");
  const auto c_launch = t.column("launch_date");
  const auto c_decay = t.column("decay_date");
  SatCat cat;
  for (const auto& row : t.rows) {
    SatCatEntry e;
    e.norad_id = detail::parse_norad(row[c_id], source);
    e.country_code = std::string(detail::trim(row[c_country]));
    e.object_type = object_type_from_string(detail::trim(row[c_type]));
    if (c_name) e.object_name = row[*c_name];
    if (c_launch) e.launch_date = detail::parse_optional_date(row[*c_launch], source);
    if (c_decay) e.decay_date = detail::parse_optional_date(row[*c_decay], source);
    cat.add(std::move(e));
  }
  return cat;
}

inline SatCat load_satcat(const std::filesystem::path& path) {
  return parse_satcat(read_delimited(path), path.string());
}

// norad_id -> mission label. Labels outside the closed set fail the load.
class MissionMap {
 public:
  void set(int norad_id, MissionClass m) { labels_[norad_id] = m; }

  std::optional<MissionClass> find(int norad_id) const {
    auto it = labels_.find(norad_id);
    if (it == labels_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t size() const noexcept { return labels_.size(); }

 private:
  std::map<int, MissionClass> labels_;
};

inline MissionMap parse_mission_map(const DelimitedTable& t, std::string_view source) {
  const auto c_id = t.require_column("norad_id", source);
  const auto c_label = t.require_column("mission_class", source);
  MissionMap m;
  for (const auto& row : t.rows) {
    const int id = detail::parse_norad(row[c_id], source);
    const auto label = detail::trim(row[c_label]);
    auto mc = mission_class_from_string(label);
    if (!mc) throw DataError(fmt::format("{}: '{}' is not a known mission class", source, label));
    m.set(id, *mc);
  }
  return m;
}

inline MissionMap load_mission_map(const std::filesystem::path& path) {
  return parse_mission_map(read_delimited(path), path.string());
}

// Primary source wins; fall back to the secondary; otherwise unidentified.
inline MissionClass assign_mission_class(int norad_id, const MissionMap& primary, const MissionMap& secondary) {
  if (auto m = primary.find(norad_id)) return *m;
  if (auto m = secondary.find(norad_id)) return *m;
  return MissionClass::kUnidentified;
}

struct SelectionCriteria {
  std::set<std::string> owner_codes{"CIS"};
  std::set<ObjectType> excluded_object_types{ObjectType::kDebris, ObjectType::kRocketBody};
  PeriodWindow activity_window{"activity", make_timestamp(2022, 2, 1), make_timestamp(2022, 5, 1)};
  // Observation count floor, measured inside `training_window` when set and
  // over the whole series otherwise.
  std::size_t min_training_observations = 100;
  std::optional<PeriodWindow> training_window;

  void validate() const {
    activity_window.validate();
    if (training_window) training_window->validate();
    if (min_training_observations == 0) throw ConfigError("min_training_observations must be positive");
  }
};

struct SelectionResult {
  std::vector<int> selected;  // ascending
  std::vector<std::string> warnings;
};

inline SelectionResult select_rsos(const SatCat& satcat, const SeriesMap& series, const SelectionCriteria& c) {
  c.validate();
  SelectionResult out;
  for (const auto& [id, s] : series) {
    const auto* entry = satcat.find(id);
    if (entry == nullptr) continue;
    if (!c.owner_codes.contains(entry->country_code)) continue;
    if (c.excluded_object_types.contains(entry->object_type)) continue;
    if (s.count_in(c.activity_window) == 0) continue;
    const auto n_train = c.training_window ? s.count_in(*c.training_window) : s.size();
    if (n_train < c.min_training_observations) continue;
    out.selected.push_back(id);
  }
  if (out.selected.empty()) out.warnings.emplace_back("selection criteria matched no objects");
  return out;
}

}  // namespace rsoanom
