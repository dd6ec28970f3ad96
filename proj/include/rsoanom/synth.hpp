#pragma once

// Ground-truth corpus generator and a TLE writer. The writer is implemented
// independently of the parser in tle.hpp (its own column assembly and its own
// checksum) so each can serve as the other's round-trip oracle.

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "rsoanom/catalog.hpp"
#include "rsoanom/elements.hpp"
#include "rsoanom/ephemeris.hpp"
#include "rsoanom/error.hpp"
#include "rsoanom/rng.hpp"
#include "rsoanom/tle.hpp"

namespace rsoanom::synth {

// Modulo-10 line checksum: digits count their value, minus signs count one.
inline char checksum_digit(std::string_view body) {
  unsigned total = 0;
  for (unsigned char ch : body) {
    if (std::isdigit(ch)) total += ch - '0';
    if (ch == '-') total += 1;
  }
  return static_cast<char>('0' + total % 10);
}

namespace detail {

inline std::string packed_exponent(const PackedExponent& p) {
  if (std::abs(p.mantissa) > 99999 || p.exponent < 0 || p.exponent > 9 ||
      (p.exponent_sign != '+' && p.exponent_sign != '-')) {
    throw FormatError("packed exponent field out of range");
  }
  return fmt::format("{}{:05d}{}{}", p.mantissa < 0 ? '-' : ' ', std::abs(p.mantissa), p.exponent_sign, p.exponent);
}

inline std::string epoch_field(Timestamp epoch) {
  using namespace std::chrono;
  const year_month_day ymd{floor<days>(epoch)};
  const int year = int(ymd.year());
  if (year < 1957 || year > 2056) throw FormatError(fmt::format("epoch year {} not representable", year));
  const Timestamp jan1{sys_days{ymd.year() / January / 1}};
  // Units of 1e-8 day are 864 microseconds.
  const std::int64_t unit_ns = kNanosPerDay / 100'000'000;
  const std::int64_t ns = (epoch - jan1).count();
  const std::int64_t units = (ns + unit_ns / 2) / unit_ns;
  const std::int64_t day = units / 100'000'000 + 1;
  const std::int64_t frac = units % 100'000'000;
  if (day > 366) throw FormatError("epoch rounds past the end of its year");
  return fmt::format("{:02d}{:03d}.{:08d}", year % 100, day, frac);
}

inline std::string angle_field(double deg, double upper_exclusive, bool inclusive_upper, const char* what) {
  auto text = fmt::format("{:8.4f}", deg);
  const double shown = std::stod(text);
  const bool ok = shown >= 0.0 && (inclusive_upper ? shown <= upper_exclusive : shown < upper_exclusive);
  if (!ok || text.size() != 8) throw FormatError(fmt::format("{} {} not representable", what, deg));
  return text;
}

}  // namespace detail

// Renders a record as two 69-character lines with computed checksums.
inline std::pair<std::string, std::string> format_tle(const TleRecord& r) {
  const auto& e = r.elements;
  if (r.norad_id <= 0 || r.norad_id > 99999) throw FormatError(fmt::format("catalog number {} not representable", r.norad_id));
  if (!(e.eccentricity >= 0.0 && e.eccentricity < 1.0)) throw FormatError("eccentricity must lie in [0, 1)");
  if (!(e.mean_motion > 0.0 && e.mean_motion < 100.0)) throw FormatError("mean motion not representable");
  if (r.element_set_number < 0 || r.element_set_number > 9999) throw FormatError("element set number not representable");
  if (r.revolution_number < 0 || r.revolution_number > 99999) throw FormatError("revolution number not representable");
  if (!(std::abs(r.mean_motion_dot) < 1.0)) throw FormatError("mean motion derivative not representable");
  if (r.intl_designator.size() > 8) throw FormatError("international designator longer than 8 characters");

  const auto ecc_digits = static_cast<long long>(std::llround(e.eccentricity * 1e7));
  if (ecc_digits > 9'999'999) throw FormatError("eccentricity rounds to 1");
  const auto ndot_digits = static_cast<long long>(std::llround(std::abs(r.mean_motion_dot) * 1e8));

  std::string l1 = fmt::format("1 {:05d}{} {:<8} {} {}.{:08d} {} {} {} {:>4d}", r.norad_id, r.classification,
                               r.intl_designator, detail::epoch_field(r.epoch), r.mean_motion_dot < 0 ? '-' : ' ',
                               ndot_digits, detail::packed_exponent(r.mean_motion_ddot),
                               detail::packed_exponent(r.bstar), r.ephemeris_type, r.element_set_number);
  std::string l2 = fmt::format("2 {:05d} {} {} {:07d} {} {} {:11.8f}{:5d}", r.norad_id,
                               detail::angle_field(e.inclination, 180.0, true, "inclination"),
                               detail::angle_field(e.raan, 360.0, false, "RAAN"), ecc_digits,
                               detail::angle_field(e.arg_perigee, 360.0, false, "argument of perigee"),
                               detail::angle_field(e.mean_anomaly, 360.0, false, "mean anomaly"), e.mean_motion,
                               r.revolution_number);
  if (l1.size() != 68 || l2.size() != 68) {
    throw FormatError(fmt::format("formatted line widths {}/{} (expected 68 before checksum)", l1.size(), l2.size()));
  }
  l1 += checksum_digit(l1);
  l2 += checksum_digit(l2);
  return {std::move(l1), std::move(l2)};
}

// Rounds a record's fields to what the column layout can hold, so that
// parse(format(r)) == r exactly.
inline TleRecord quantize(const TleRecord& r) {
  const auto [l1, l2] = format_tle(r);
  auto q = parse_tle(l1, l2);
  q.name = r.name;
  return q;
}

// ---------------------------------------------------------------------------
// Scenario

enum class InjectionKind { kStep, kImpulse, kRamp };

inline InjectionKind injection_kind_from_string(std::string_view s) {
  if (s == "step") return InjectionKind::kStep;
  if (s == "impulse") return InjectionKind::kImpulse;
  if (s == "ramp") return InjectionKind::kRamp;
  throw ConfigError(fmt::format("unknown injection kind '{}'", s));
}

inline std::string_view to_string(InjectionKind k) {
  switch (k) {
    case InjectionKind::kStep: return "step";
    case InjectionKind::kImpulse: return "impulse";
    case InjectionKind::kRamp: return "ramp";
  }
  return "step";
}

// Offset (in baseline-sigma units, before sign) applied at position t in
// [0, 1] across an injection's affected observations. Impulses touch only the
// first observation in range; ramps climb from half to full magnitude.
inline double injection_profile(InjectionKind k, double magnitude, double t) {
  switch (k) {
    case InjectionKind::kStep: return magnitude;
    case InjectionKind::kImpulse: return magnitude;
    case InjectionKind::kRamp: return magnitude * (0.5 + 0.5 * t);
  }
  return magnitude;
}

struct Injection {
  std::optional<int> norad_id;  // all objects when unset
  Timestamp start{};
  Timestamp end{};  // exclusive
  Element element = Element::kMeanMotion;
  InjectionKind kind = InjectionKind::kStep;
  double magnitude = 0.0;  // baseline-sigma units, > 0
  double sign = 1.0;
};

struct ElementBaseline {
  double level = 0.0;
  double noise = 0.0;        // Gaussian sigma, element units
  double drift_per_day = 0.0;
  double level_spread = 0.0; // per-object uniform offset in [-spread, spread]
};

// Randomised injection schedule covering `fraction` of each object's
// observations inside `window` (or the whole span).
struct RandomInjections {
  double fraction = 0.0;
  double min_magnitude = 10.0;
  double max_magnitude = 20.0;
  std::vector<InjectionKind> kinds{InjectionKind::kStep, InjectionKind::kImpulse, InjectionKind::kRamp};
  std::size_t max_length = 4;
  bool joint = false;  // each event moves every listed element, like a maneuver
  std::vector<Element> elements{kAllElements.begin(), kAllElements.end()};
  std::optional<PeriodWindow> window;
};

struct ScenarioConfig {
  std::uint64_t seed = 1;
  std::size_t object_count = 1;
  int first_norad_id = 90000;
  Timestamp start = make_timestamp(2016, 8, 24);
  std::size_t observations_per_object = 100;
  double observations_per_day = 1.0;
  double cadence_jitter = 0.2;  // fraction of the nominal interval
  std::array<ElementBaseline, kNumElements> baseline{};
  std::vector<Injection> injections;
  std::optional<RandomInjections> random_injections;
  std::string country_code = "CIS";
  ObjectType object_type = ObjectType::kPayload;
  std::vector<MissionClass> mission_classes{MissionClass::kCommunications};

  Timestamp end() const {
    const double span = static_cast<double>(observations_per_object) / observations_per_day;
    return add_days(start, span);
  }

  void validate() const {
    if (object_count == 0) throw ConfigError("scenario needs at least one object");
    if (observations_per_object < 2) throw ConfigError("scenario needs at least two observations per object");
    if (!(observations_per_day > 0.0)) throw ConfigError("observations_per_day must be positive");
    if (!(cadence_jitter >= 0.0 && cadence_jitter < 1.0)) throw ConfigError("cadence_jitter must lie in [0, 1)");
    if (first_norad_id <= 0 || first_norad_id + static_cast<int>(object_count) - 1 > 99999) {
      throw ConfigError("norad ids must lie in 1..99999");
    }
    const auto span_end = end();
    for (const auto& inj : injections) {
      if (!(inj.magnitude > 0.0)) throw ConfigError("injection magnitude must be positive");
      if (!(inj.start < inj.end)) throw ConfigError("injection range must be non-empty");
      if (inj.start < start || inj.end > span_end) throw ConfigError("injection range outside the series span");
    }
    if (random_injections) {
      const auto& ri = *random_injections;
      if (!(ri.fraction >= 0.0 && ri.fraction < 0.5)) throw ConfigError("random injection fraction must lie in [0, 0.5)");
      if (!(ri.min_magnitude > 0.0 && ri.max_magnitude >= ri.min_magnitude)) throw ConfigError("bad magnitude range");
      if (ri.kinds.empty() || ri.elements.empty() || ri.max_length == 0) throw ConfigError("bad random injection spec");
      if (ri.window) ri.window->validate();
    }
    if (mission_classes.empty()) throw ConfigError("scenario needs at least one mission class");
  }
};

// Per-observation ground truth: mask[i][e] is true where element e of
// observation i carries an injected offset.
using ElementMask = std::array<bool, kNumElements>;

struct GeneratedObject {
  EphemerisSeries series;
  std::vector<ElementMask> mask;
  MissionClass mission = MissionClass::kCommunications;
};

struct Corpus {
  std::vector<GeneratedObject> objects;
  std::vector<Injection> realized_injections;

  SeriesMap series_map() const {
    SeriesMap m;
    for (const auto& o : objects) m[o.series.norad_id] = o.series;
    return m;
  }
};

namespace detail {

inline double wrap360(double v) {
  double w = std::fmod(v, 360.0);
  if (w < 0.0) w += 360.0;
  return w;
}

// Chooses non-overlapping observation ranges for one object.
inline std::vector<Injection> draw_injections(const RandomInjections& ri, int norad_id,
                                              const std::vector<Timestamp>& epochs, Rng& rng) {
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    if (!ri.window || ri.window->contains(epochs[i])) eligible.push_back(i);
  }
  const auto target = static_cast<std::size_t>(std::llround(ri.fraction * static_cast<double>(eligible.size())));
  std::vector<bool> used(epochs.size(), false);
  std::vector<Injection> out;
  std::size_t covered = 0;
  std::size_t attempts = 0;
  while (covered < target && attempts < 100 * (target + 1)) {
    ++attempts;
    const auto kind = ri.kinds[rng.below(ri.kinds.size())];
    std::size_t len = kind == InjectionKind::kImpulse ? 1 : 2 + rng.below(std::max<std::size_t>(ri.max_length, 2) - 1);
    len = std::min(len, target - covered);
    if (len == 0) break;
    const auto kind_fit = (len == 1 && kind == InjectionKind::kRamp) ? InjectionKind::kImpulse : kind;
    const auto first = eligible[rng.below(eligible.size())];
    if (first + len > epochs.size()) continue;
    // Keep a one-observation gap so injections stay separable.
    const std::size_t lo = first == 0 ? 0 : first - 1;
    const std::size_t hi = std::min(first + len + 1, epochs.size());
    bool clash = false;
    for (std::size_t i = lo; i < hi; ++i) clash = clash || used[i];
    for (std::size_t i = first; i < first + len; ++i) {
      clash = clash || (ri.window && !ri.window->contains(epochs[i]));
    }
    if (clash) continue;
    for (std::size_t i = first; i < first + len; ++i) used[i] = true;
    Injection inj;
    inj.norad_id = norad_id;
    inj.start = epochs[first];
    inj.end = epochs[first + len - 1] + Duration{1};
    inj.kind = kind_fit;
    if (ri.joint) {
      inj.magnitude = rng.uniform(ri.min_magnitude, ri.max_magnitude);
      for (Element e : ri.elements) {
        inj.element = e;
        inj.sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        out.push_back(inj);
      }
    } else {
      inj.element = ri.elements[rng.below(ri.elements.size())];
      inj.magnitude = rng.uniform(ri.min_magnitude, ri.max_magnitude);
      inj.sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      out.push_back(inj);
    }
    covered += len;
  }
  return out;
}

}  // namespace detail

inline Corpus generate(const ScenarioConfig& sc) {
  sc.validate();
  Corpus corpus;
  const double interval_days = 1.0 / sc.observations_per_day;
  for (std::size_t o = 0; o < sc.object_count; ++o) {
    const int id = sc.first_norad_id + static_cast<int>(o);
    Rng rng(sub_seed(sc.seed, id));
    GeneratedObject obj;
    obj.series.norad_id = id;
    obj.mission = sc.mission_classes[o % sc.mission_classes.size()];

    std::array<double, kNumElements> level{};
    for (std::size_t e = 0; e < kNumElements; ++e) {
      const auto& b = sc.baseline[e];
      level[e] = b.level + (b.level_spread > 0.0 ? rng.uniform(-b.level_spread, b.level_spread) : 0.0);
    }

    std::vector<Timestamp> epochs(sc.observations_per_object);
    for (std::size_t i = 0; i < epochs.size(); ++i) {
      const double jitter = sc.cadence_jitter * rng.uniform(-0.5, 0.5);
      const auto t = add_days(sc.start, (static_cast<double>(i) + jitter) * interval_days);
      // Whole 1e-8 day units so the epoch survives formatting unchanged.
      const std::int64_t unit = kNanosPerDay / 100'000'000;
      epochs[i] = Timestamp{Duration{(t.time_since_epoch().count() / unit) * unit}};
    }

    std::vector<Injection> injections;
    for (const auto& inj : sc.injections) {
      if (!inj.norad_id || *inj.norad_id == id) injections.push_back(inj);
    }
    if (sc.random_injections) {
      auto drawn = detail::draw_injections(*sc.random_injections, id, epochs, rng);
      injections.insert(injections.end(), drawn.begin(), drawn.end());
    }

    obj.mask.assign(epochs.size(), ElementMask{});
    std::vector<std::array<double, kNumElements>> offset(epochs.size(), std::array<double, kNumElements>{});
    for (const auto& inj : injections) {
      std::vector<std::size_t> hit;
      for (std::size_t i = 0; i < epochs.size(); ++i) {
        if (epochs[i] >= inj.start && epochs[i] < inj.end) hit.push_back(i);
      }
      if (hit.empty()) continue;
      if (inj.kind == InjectionKind::kImpulse) hit.resize(1);
      const auto e = index_of(inj.element);
      const double sigma = sc.baseline[e].noise;
      for (std::size_t n = 0; n < hit.size(); ++n) {
        const double t = hit.size() == 1 ? 1.0 : static_cast<double>(n) / static_cast<double>(hit.size() - 1);
        offset[hit[n]][e] += inj.sign * injection_profile(inj.kind, inj.magnitude, t) * sigma;
        obj.mask[hit[n]][e] = true;
      }
      corpus.realized_injections.push_back(inj);
    }

    double revs = rng.uniform(1000.0, 5000.0);
    for (std::size_t i = 0; i < epochs.size(); ++i) {
      const double days = days_between(sc.start, epochs[i]);
      OrbitalElements el;
      for (std::size_t e = 0; e < kNumElements; ++e) {
        const auto& b = sc.baseline[e];
        double v = level[e] + b.drift_per_day * days + b.noise * rng.normal() + offset[i][e];
        const auto elem = static_cast<Element>(e);
        if (is_wrapping_angle(elem)) v = detail::wrap360(v);
        if (elem == Element::kEccentricity) v = std::clamp(v, 0.0, 0.9999999);
        if (elem == Element::kInclination) v = std::clamp(v, 0.0, 180.0);
        if (elem == Element::kMeanMotion) v = std::max(v, 1e-6);
        el[elem] = v;
      }
      // A value that rounds to 360.0000 wraps to zero.
      for (Element a : {Element::kRaan, Element::kArgPerigee, Element::kMeanAnomaly}) {
        if (std::stod(fmt::format("{:.4f}", el[a])) >= 360.0) el[a] = 0.0;
      }
      TleRecord r;
      r.norad_id = id;
      r.epoch = epochs[i];
      r.elements = el;
      r.classification = 'U';
      r.intl_designator = fmt::format("{:02d}{:03d}A", 10 + static_cast<int>(o % 80), 1 + static_cast<int>(o % 900));
      r.element_set_number = static_cast<int>(i % 9999) + 1;
      r.ephemeris_type = '0';
      r.mean_motion_ddot = PackedExponent{0, '-', 0};
      r.bstar = PackedExponent{10000 + static_cast<int>(rng.below(80000)), '-', 4};
      revs += el.mean_motion * interval_days;
      r.revolution_number = static_cast<int>(std::fmod(revs, 100000.0));
      obj.series.observations.push_back(quantize(r));
    }
    corpus.objects.push_back(std::move(obj));
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Scenario file and corpus emission

inline ScenarioConfig scenario_from_json(const nlohmann::json& j) {
  ScenarioConfig sc;
  try {
    sc.seed = j.value("seed", sc.seed);
    sc.object_count = j.value("object_count", sc.object_count);
    sc.first_norad_id = j.value("first_norad_id", sc.first_norad_id);
    if (j.contains("start")) sc.start = parse_iso8601(j.at("start").get<std::string>());
    sc.observations_per_object = j.value("observations_per_object", sc.observations_per_object);
    sc.observations_per_day = j.value("observations_per_day", sc.observations_per_day);
    sc.cadence_jitter = j.value("cadence_jitter", sc.cadence_jitter);
    sc.country_code = j.value("country", sc.country_code);
    if (j.contains("object_type")) sc.object_type = object_type_from_string(j.at("object_type").get<std::string>());
    if (j.contains("mission_classes")) {
      sc.mission_classes.clear();
      for (const auto& m : j.at("mission_classes")) {
        auto mc = mission_class_from_string(m.get<std::string>());
        if (!mc) throw ConfigError(fmt::format("unknown mission class '{}'", m.get<std::string>()));
        sc.mission_classes.push_back(*mc);
      }
    }
    if (j.contains("baseline")) {
      for (const auto& [name, b] : j.at("baseline").items()) {
        auto e = element_from_name(name);
        if (!e) throw ConfigError(fmt::format("unknown element '{}' in baseline", name));
        auto& eb = sc.baseline[index_of(*e)];
        eb.level = b.value("level", 0.0);
        eb.noise = b.value("noise", 0.0);
        eb.drift_per_day = b.value("drift_per_day", 0.0);
        eb.level_spread = b.value("level_spread", 0.0);
      }
    }
    auto parse_element = [](const std::string& s) {
      auto e = element_from_name(s);
      if (!e) throw ConfigError(fmt::format("unknown element '{}'", s));
      return *e;
    };
    if (j.contains("injections")) {
      for (const auto& ij : j.at("injections")) {
        Injection inj;
        if (ij.contains("norad_id")) inj.norad_id = ij.at("norad_id").get<int>();
        inj.start = parse_iso8601(ij.at("start").get<std::string>());
        inj.end = parse_iso8601(ij.at("end").get<std::string>());
        inj.element = parse_element(ij.at("element").get<std::string>());
        inj.kind = injection_kind_from_string(ij.at("kind").get<std::string>());
        inj.magnitude = ij.at("magnitude").get<double>();
        inj.sign = ij.value("sign", 1.0) < 0 ? -1.0 : 1.0;
        sc.injections.push_back(inj);
      }
    }
    if (j.contains("random_injections")) {
      const auto& rj = j.at("random_injections");
      RandomInjections ri;
      ri.fraction = rj.value("fraction", 0.0);
      ri.min_magnitude = rj.value("min_magnitude", ri.min_magnitude);
      ri.max_magnitude = rj.value("max_magnitude", ri.max_magnitude);
      ri.max_length = rj.value("max_length", ri.max_length);
      ri.joint = rj.value("joint", ri.joint);
      if (rj.contains("kinds")) {
        ri.kinds.clear();
        for (const auto& k : rj.at("kinds")) ri.kinds.push_back(injection_kind_from_string(k.get<std::string>()));
      }
      if (rj.contains("elements")) {
        ri.elements.clear();
        for (const auto& e : rj.at("elements")) ri.elements.push_back(parse_element(e.get<std::string>()));
      }
      if (rj.contains("window")) {
        const auto& w = rj.at("window");
        ri.window = PeriodWindow{"injections", parse_iso8601(w.at("start").get<std::string>()),
                                 parse_iso8601(w.at("end").get<std::string>())};
      }
      sc.random_injections = ri;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("scenario: {}", e.what()));
  }
  sc.validate();
  return sc;
}

inline ScenarioConfig load_scenario(const std::filesystem::path& path) {
  try {
    return scenario_from_json(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
}

inline std::string corpus_tle_text(const Corpus& c) {
  std::string out;
  for (const auto& o : c.objects) {
    for (const auto& r : o.series.observations) {
      const auto [l1, l2] = format_tle(r);
      out += l1;
      out += '\n';
      out += l2;
      out += '\n';
    }
  }
  return out;
}

// norad_id,epoch,<six element columns as 0/1>
inline std::string corpus_mask_text(const Corpus& c) {
  std::string out = "norad_id,epoch";
  for (auto n : kElementNames) out += fmt::format(",{}", n);
  out += '\n';
  for (const auto& o : c.objects) {
    for (std::size_t i = 0; i < o.mask.size(); ++i) {
      out += fmt::format("{},{}", o.series.norad_id, to_iso8601(o.series.observations[i].epoch));
      for (bool b : o.mask[i]) out += b ? ",1" : ",0";
      out += '\n';
    }
  }
  return out;
}

inline std::string corpus_satcat_text(const Corpus& c, const ScenarioConfig& sc) {
  std::string out = "norad_id,country,object_type,name,launch_date,decay_date\n";
  for (const auto& o : c.objects) {
    out += fmt::format("{},{},{},SYNTH-{},,\n", o.series.norad_id, sc.country_code, to_string(sc.object_type),
                       o.series.norad_id);
  }
  return out;
}

inline std::string corpus_mission_text(const Corpus& c) {
  std::string out = "norad_id,mission_class\n";
  for (const auto& o : c.objects) out += fmt::format("{},{}\n", o.series.norad_id, to_string(o.mission));
  return out;
}

struct MaskFile {
  // (norad_id, epoch) -> element mask
  std::map<std::pair<int, Timestamp>, ElementMask> rows;
};

inline MaskFile load_masks(const std::filesystem::path& path) {
  const auto t = read_delimited(path);
  const auto src = path.string();
  const auto c_id = t.require_column("norad_id", src);
  const auto c_epoch = t.require_column("epoch", src);
  std::array<std::size_t, kNumElements> cols{};
  for (std::size_t e = 0; e < kNumElements; ++e) cols[e] = t.require_column(kElementNames[e], src);
  MaskFile out;
  for (const auto& row : t.rows) {
    ElementMask m{};
    for (std::size_t e = 0; e < kNumElements; ++e) m[e] = row[cols[e]] == "1";
    out.rows[{std::stoi(row[c_id]), parse_iso8601(row[c_epoch])}] = m;
  }
  return out;
}

}  // namespace rsoanom::synth
