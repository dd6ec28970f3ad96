#pragma once

// End-to-end commands behind the CLI: ingest, label, train, score, evaluate,
// stats and synth. Every command writes its reports plus a manifest.json
// under the run's output directory.

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "rsoanom/catalog.hpp"
#include "rsoanom/delimited.hpp"
#include "rsoanom/digest.hpp"
#include "rsoanom/ephemeris.hpp"
#include "rsoanom/error.hpp"
#include "rsoanom/eval.hpp"
#include "rsoanom/fetch.hpp"
#include "rsoanom/iforest.hpp"
#include "rsoanom/nn/model.hpp"
#include "rsoanom/nn/model_store.hpp"
#include "rsoanom/oracle.hpp"
#include "rsoanom/parallel.hpp"
#include "rsoanom/rng.hpp"
#include "rsoanom/stats/analytics.hpp"
#include "rsoanom/stats/chi_square.hpp"
#include "rsoanom/synth.hpp"
#include "rsoanom/time.hpp"

namespace rsoanom::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr std::string_view kToolVersion = "rsoanom 1.0.0";

using Logger = std::function<void(std::string_view)>;

inline Logger stderr_logger() {
  return [](std::string_view msg) { fmt::print(stderr, "{}\n", msg); };
}

inline std::map<std::string, PeriodWindow> default_windows() {
  auto w = [](const char* name, Timestamp a, Timestamp b) { return std::pair{std::string(name), PeriodWindow{name, a, b}}; };
  return {w("train", make_timestamp(2016, 8, 24), make_timestamp(2021, 8, 24)),
          w("train4y", make_timestamp(2017, 8, 24), make_timestamp(2021, 8, 24)),
          w("baseline", make_timestamp(2021, 2, 24), make_timestamp(2021, 8, 24)),
          w("leadup", make_timestamp(2021, 8, 24), make_timestamp(2022, 2, 24)),
          w("post", make_timestamp(2022, 2, 24), make_timestamp(2024, 2, 24))};
}

struct DataSources {
  // Raw strings as written in the config; "{out}" expands to the output dir.
  std::optional<std::string> tle;
  std::optional<std::string> fetch;  // client config file
  std::optional<std::string> satcat;
  std::vector<std::string> missions;  // primary first
  std::optional<std::string> masks;
};

struct EvaluationSettings {
  std::vector<eval::ModelFamily> families{eval::kAllFamilies.begin(), eval::kAllFamilies.end()};
  std::string train_window = "train";
  std::string eval_window = "leadup";
  std::vector<int> temporal_years{5, 4, 3, 2, 1};
  std::string labels = "iqr";  // or "masks"
};

struct RunConfig {
  DataSources data;
  SelectionCriteria selection;
  std::optional<std::string> selection_training_window = "train";
  nn::ModelConfig model;
  IForestConfig iforest;
  std::map<std::string, PeriodWindow> windows = default_windows();
  EvaluationSettings evaluation;
  std::string model_window = "train";  // models used by score and stats
  std::optional<std::string> synth_scenario;
  std::size_t workers = 1;
  fs::path out_dir = "out";
  fs::path base_dir = ".";
  std::uint64_t seed = 0;

  const PeriodWindow& window(const std::string& name) const {
    auto it = windows.find(name);
    if (it == windows.end()) throw ConfigError(fmt::format("unknown window '{}'", name));
    return it->second;
  }

  fs::path resolve(const std::string& raw) const {
    std::string s = raw;
    if (auto pos = s.find("{out}"); pos != std::string::npos) s.replace(pos, 5, out_dir.string());
    fs::path p(s);
    return p.is_relative() && raw.find("{out}") == std::string::npos ? base_dir / p : p;
  }

  void validate() const {
    for (const auto& [name, w] : windows) w.validate();
    const auto& b = window("baseline");
    const auto& l = window("leadup");
    if (b.start < l.end && l.start < b.end) throw ConfigError("windows 'baseline' and 'leadup' must not overlap");
    window(evaluation.train_window);
    window(evaluation.eval_window);
    window(model_window);
    if (selection_training_window) window(*selection_training_window);
    for (int y : evaluation.temporal_years) {
      if (y <= 0) throw ConfigError("temporal_years must be positive");
    }
    if (evaluation.labels != "iqr" && evaluation.labels != "masks") {
      throw ConfigError("evaluation.labels must be \"iqr\" or \"masks\"");
    }
    if (evaluation.labels == "masks" && !data.masks) throw ConfigError("mask labels need data.masks");
    if (evaluation.families.empty()) throw ConfigError("evaluation.families must not be empty");
    model.validate();
    iforest.validate();
    selection.validate();
    if (workers == 0) throw ConfigError("workers must be positive");
  }

  // Canonical description of everything that influences outputs. Worker
  // count and output location are deliberately absent.
  json canonical() const {
    json j;
    auto opt = [](const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); };
    j["data"] = {{"tle", opt(data.tle)},         {"fetch", opt(data.fetch)}, {"satcat", opt(data.satcat)},
                 {"missions", data.missions},    {"masks", opt(data.masks)}};
    json owners = json::array();
    for (const auto& o : selection.owner_codes) owners.push_back(o);
    json excluded = json::array();
    for (auto t : selection.excluded_object_types) excluded.push_back(std::string(to_string(t)));
    j["selection"] = {{"owners", owners},
                      {"exclude_types", excluded},
                      {"activity_window",
                       {to_iso8601(selection.activity_window.start), to_iso8601(selection.activity_window.end)}},
                      {"min_training_observations", selection.min_training_observations},
                      {"training_window", opt(selection_training_window)}};
    const auto& m = model;
    j["model"] = {{"kind", m.kind == nn::ModelKind::kPlain ? "plain" : "anchor"},
                  {"hidden_dim", m.hidden_dim},
                  {"latent_dim", m.latent_dim},
                  {"epochs", m.epochs},
                  {"batch_size", m.batch_size},
                  {"lambda_anchor", m.lambda_anchor},
                  {"k_neighbors", m.k_neighbors},
                  {"threshold_sigma", m.threshold_sigma},
                  {"leaky_slope", m.leaky_slope},
                  {"learning_rate", m.learning_rate}};
    j["iforest"] = {{"n_estimators", iforest.n_estimators},
                    {"max_samples", iforest.max_samples},
                    {"contamination", iforest.contamination ? json(*iforest.contamination) : json("auto")},
                    {"mode", to_string(iforest.mode)}};
    for (const auto& [name, w] : windows) j["windows"][name] = {to_iso8601(w.start), to_iso8601(w.end)};
    json fams = json::array();
    for (auto f : evaluation.families) fams.push_back(std::string(eval::to_string(f)));
    j["evaluation"] = {{"families", fams},
                       {"train_window", evaluation.train_window},
                       {"eval_window", evaluation.eval_window},
                       {"temporal_years", evaluation.temporal_years},
                       {"labels", evaluation.labels}};
    j["model_window"] = model_window;
    j["seed"] = seed;
    return j;
  }

  std::string hash() const { return digest_hex(canonical().dump()); }
};

namespace detail {

inline PeriodWindow window_from_json(const std::string& name, const json& j) {
  if (j.is_array() && j.size() == 2) {
    return {name, parse_iso8601(j[0].get<std::string>()), parse_iso8601(j[1].get<std::string>())};
  }
  return {name, parse_iso8601(j.at("start").get<std::string>()), parse_iso8601(j.at("end").get<std::string>())};
}

inline void check_keys(const json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
  for (const auto& [k, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      throw ConfigError(fmt::format("unknown key '{}' in {}", k, where));
    }
  }
}

}  // namespace detail

inline RunConfig run_config_from_json(const json& j, const fs::path& base_dir = ".") {
  RunConfig c;
  c.base_dir = base_dir;
  try {
    detail::check_keys(j, {"data", "selection", "model", "iforest", "windows", "evaluation", "model_window", "synth",
                           "workers", "out", "seed"},
                       "run config");
    if (j.contains("data")) {
      const auto& d = j.at("data");
      detail::check_keys(d, {"tle", "fetch", "satcat", "missions", "masks"}, "data");
      if (d.contains("tle")) c.data.tle = d.at("tle").get<std::string>();
      if (d.contains("fetch")) c.data.fetch = d.at("fetch").get<std::string>();
      if (d.contains("satcat")) c.data.satcat = d.at("satcat").get<std::string>();
      if (d.contains("missions")) c.data.missions = d.at("missions").get<std::vector<std::string>>();
      if (d.contains("masks")) c.data.masks = d.at("masks").get<std::string>();
      if (c.data.tle && c.data.fetch) throw ConfigError("data.tle and data.fetch are mutually exclusive");
    }
    if (j.contains("windows")) {
      for (const auto& [name, w] : j.at("windows").items()) c.windows[name] = detail::window_from_json(name, w);
    }
    if (j.contains("selection")) {
      const auto& s = j.at("selection");
      detail::check_keys(s, {"owners", "exclude_types", "activity_window", "min_training_observations", "training_window"},
                         "selection");
      if (s.contains("owners")) {
        c.selection.owner_codes.clear();
        for (const auto& o : s.at("owners")) c.selection.owner_codes.insert(o.get<std::string>());
      }
      if (s.contains("exclude_types")) {
        c.selection.excluded_object_types.clear();
        for (const auto& t : s.at("exclude_types")) {
          try {
            c.selection.excluded_object_types.insert(object_type_from_string(t.get<std::string>()));
          } catch (const DataError& e) {
            throw ConfigError(e.what());
          }
        }
      }
      if (s.contains("activity_window")) {
        c.selection.activity_window = detail::window_from_json("activity", s.at("activity_window"));
      }
      c.selection.min_training_observations =
          s.value("min_training_observations", c.selection.min_training_observations);
      if (s.contains("training_window")) {
        const auto& tw = s.at("training_window");
        c.selection_training_window = tw.is_null() ? std::nullopt : std::optional(tw.get<std::string>());
      }
    }
    eval::DetectorSpec spec;
    spec.model = c.model;
    spec.iforest = c.iforest;
    if (j.contains("model")) {
      auto m = j.at("model");
      if (m.contains("kind")) {
        const auto kind = m.at("kind").get<std::string>();
        if (kind != "anchor" && kind != "plain") throw ConfigError("model.kind must be \"anchor\" or \"plain\"");
        c.model.kind = kind == "plain" ? nn::ModelKind::kPlain : nn::ModelKind::kAnchor;
        m.erase("kind");
      }
      for (const auto& [k, v] : m.items()) {
        if (k == "contamination" || k == "n_estimators" || k == "max_samples" || k == "mode") {
          throw ConfigError(fmt::format("'{}' belongs under iforest", k));
        }
      }
      spec.model = c.model;
      spec.model = eval::apply_params(spec, m).model;
    }
    if (j.contains("iforest")) {
      spec.family = eval::ModelFamily::kIForest;
      for (const auto& [k, v] : j.at("iforest").items()) {
        if (k != "contamination" && k != "n_estimators" && k != "max_samples" && k != "mode") {
          throw ConfigError(fmt::format("unknown key '{}' in iforest", k));
        }
      }
      spec.iforest = eval::apply_params(spec, j.at("iforest")).iforest;
    }
    const auto kind = c.model.kind;
    c.model = spec.model;
    c.model.kind = kind;
    c.iforest = spec.iforest;
    if (j.contains("evaluation")) {
      const auto& e = j.at("evaluation");
      detail::check_keys(e, {"families", "train_window", "eval_window", "temporal_years", "labels"}, "evaluation");
      if (e.contains("families")) {
        c.evaluation.families.clear();
        for (const auto& f : e.at("families")) c.evaluation.families.push_back(eval::family_from_string(f.get<std::string>()));
      }
      c.evaluation.train_window = e.value("train_window", c.evaluation.train_window);
      c.evaluation.eval_window = e.value("eval_window", c.evaluation.eval_window);
      if (e.contains("temporal_years")) c.evaluation.temporal_years = e.at("temporal_years").get<std::vector<int>>();
      c.evaluation.labels = e.value("labels", c.evaluation.labels);
    }
    c.model_window = j.value("model_window", c.model_window);
    if (j.contains("synth")) c.synth_scenario = j.at("synth").at("scenario").get<std::string>();
    c.workers = j.value("workers", c.workers);
    if (j.contains("out")) c.out_dir = c.resolve(j.at("out").get<std::string>());
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("run config: {}", e.what()));
  }
  c.validate();
  return c;
}

inline RunConfig load_run_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return run_config_from_json(j, path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

// ---------------------------------------------------------------------------
// Outputs and manifests

// Collects the files a command writes and the inputs it read, then records
// both with digests in manifest.json.
class Outputs {
 public:
  Outputs(const RunConfig& cfg, std::string command, fs::path dir)
      : cfg_(cfg), command_(std::move(command)), dir_(std::move(dir)) {}

  const fs::path& dir() const { return dir_; }

  void write(const std::string& rel, std::string_view contents) {
    write_file_atomic(dir_ / rel, contents);
    outputs_[rel] = digest_hex(contents);
  }

  void input(const std::string& name, std::string digest) { inputs_[name] = std::move(digest); }
  void inputs(const std::map<std::string, std::string>& m) {
    for (const auto& [k, v] : m) inputs_[k] = v;
  }
  void failure(std::string f) { failures_.push_back(std::move(f)); }
  const std::vector<std::string>& failures() const { return failures_; }

  void finish() {
    json m;
    m["command"] = command_;
    m["tool"] = kToolVersion;
    m["config_hash"] = cfg_.hash();
    m["seed"] = cfg_.seed;
    m["inputs"] = inputs_;
    m["outputs"] = outputs_;
    m["failures"] = failures_;
    write_file_atomic(dir_ / "manifest.json", m.dump(2) + "\n");
  }

 private:
  const RunConfig& cfg_;
  std::string command_;
  fs::path dir_;
  std::map<std::string, std::string> inputs_;
  std::map<std::string, std::string> outputs_;
  std::vector<std::string> failures_;
};

inline std::string csv_row(std::initializer_list<std::string> fields) {
  std::string out;
  for (const auto& f : fields) {
    if (!out.empty()) out += ',';
    out += f.find_first_of(",\"\n") == std::string::npos ? f : quote_field(f);
  }
  return out + "\n";
}

inline std::string num(double v) { return fmt::format("{}", v); }
inline std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

// ---------------------------------------------------------------------------
// Loading and selection

struct Workspace {
  SeriesMap series;
  LoadReport load;
  std::map<std::string, std::string> input_digests;
  std::vector<int> selected;
  std::map<int, MissionClass> missions;
  std::vector<std::string> warnings;

  std::vector<const EphemerisSeries*> selected_series() const {
    std::vector<const EphemerisSeries*> out;
    for (int id : selected) out.push_back(&series.at(id));
    return out;
  }
};

inline fs::path require_file(const RunConfig& cfg, const std::string& raw, std::string_view what) {
  const auto p = cfg.resolve(raw);
  if (!fs::is_regular_file(p)) throw ConfigError(fmt::format("{} '{}' does not exist", what, p.string()));
  return p;
}

inline Workspace load_workspace(const RunConfig& cfg, const Logger& log) {
  if (!cfg.data.tle && !cfg.data.fetch) throw ConfigError("config needs data.tle or data.fetch");
  // Check every referenced path before doing any work.
  std::optional<fs::path> satcat_path, masks_path, tle_path, fetch_path;
  if (cfg.data.satcat) satcat_path = require_file(cfg, *cfg.data.satcat, "satellite catalog");
  if (cfg.data.masks) masks_path = require_file(cfg, *cfg.data.masks, "mask file");
  if (cfg.data.tle) tle_path = require_file(cfg, *cfg.data.tle, "TLE file");
  if (cfg.data.fetch) fetch_path = require_file(cfg, *cfg.data.fetch, "client config");
  std::vector<fs::path> mission_paths;
  for (const auto& m : cfg.data.missions) mission_paths.push_back(require_file(cfg, m, "mission map"));

  Workspace ws;
  SatCat satcat;
  if (satcat_path) {
    satcat = load_satcat(*satcat_path);
    ws.input_digests["satcat:" + *cfg.data.satcat] = digest_file(*satcat_path);
  }
  if (tle_path) {
    auto loaded = load_tle_file(*tle_path);
    ws.series = std::move(loaded.series);
    ws.load = loaded.report;
    ws.input_digests["tle:" + *cfg.data.tle] = digest_file(*tle_path);
  } else {
    if (!satcat_path) throw ConfigError("fetching needs data.satcat to choose NORAD ids");
    const auto client_cfg = fetch::load_client_config(*fetch_path);
    std::vector<int> ids;
    for (const auto& [id, e] : satcat.entries()) {
      if (cfg.selection.owner_codes.contains(e.country_code) &&
          !cfg.selection.excluded_object_types.contains(e.object_type)) {
        ids.push_back(id);
      }
    }
    if (ids.empty()) throw DataError("satellite catalog lists no objects matching the owner and type filters");
    Timestamp lo = cfg.windows.begin()->second.start, hi = cfg.windows.begin()->second.end;
    for (const auto& [_, w] : cfg.windows) {
      lo = std::min(lo, w.start);
      hi = std::max(hi, w.end);
    }
    fetch::CatalogClient client(client_cfg);
    const auto text = client.fetch_text(ids, PeriodWindow{"fetch", lo, hi});
    auto loaded = load_tle_text(text);
    if (loaded.series.empty()) throw DataError("catalog returned no valid records");
    ws.series = std::move(loaded.series);
    ws.load = loaded.report;
    ws.input_digests["fetch:" + *cfg.data.fetch] = digest_hex(text);
  }
  for (const auto& r : ws.load.rejected) ws.warnings.push_back(fmt::format("line {}: {}", r.line_number, r.reason));
  if (ws.load.checksum_warnings > 0) {
    ws.warnings.push_back(fmt::format("{} records with checksum mismatches kept", ws.load.checksum_warnings));
  }

  auto criteria = cfg.selection;
  if (cfg.selection_training_window) criteria.training_window = cfg.window(*cfg.selection_training_window);
  if (!satcat_path) {
    // Without a catalog every object passes the owner and type filters.
    ws.warnings.emplace_back("no satellite catalog; owner and type filters skipped");
    const auto owner = criteria.owner_codes.empty() ? std::string("UNK") : *criteria.owner_codes.begin();
    criteria.owner_codes = {owner};
    criteria.excluded_object_types.clear();
    for (const auto& [id, _] : ws.series) satcat.add({id, owner, ObjectType::kPayload, {}, {}, {}});
  }
  auto sel = select_rsos(satcat, ws.series, criteria);
  ws.selected = std::move(sel.selected);
  for (auto& w : sel.warnings) ws.warnings.push_back(std::move(w));

  std::vector<MissionMap> maps;
  for (std::size_t i = 0; i < mission_paths.size(); ++i) {
    maps.push_back(load_mission_map(mission_paths[i]));
    ws.input_digests["missions:" + cfg.data.missions[i]] = digest_file(mission_paths[i]);
  }
  const MissionMap empty;
  for (int id : ws.selected) {
    ws.missions[id] = assign_mission_class(id, maps.size() > 0 ? maps[0] : empty, maps.size() > 1 ? maps[1] : empty);
  }
  if (masks_path) ws.input_digests["masks:" + *cfg.data.masks] = digest_file(*masks_path);
  for (const auto& w : ws.warnings) log(fmt::format("warning: {}", w));
  log(fmt::format("loaded {} objects, selected {}", ws.series.size(), ws.selected.size()));
  return ws;
}

// ---------------------------------------------------------------------------
// synth

inline std::vector<std::string> cmd_synth(const RunConfig& cfg, const std::optional<fs::path>& scenario_arg,
                                          const Logger& log) {
  fs::path scenario_path;
  if (scenario_arg) {
    scenario_path = *scenario_arg;
  } else if (cfg.synth_scenario) {
    scenario_path = cfg.resolve(*cfg.synth_scenario);
  } else {
    throw ConfigError("synth needs --scenario or synth.scenario in the config");
  }
  if (!fs::is_regular_file(scenario_path)) {
    throw ConfigError(fmt::format("scenario '{}' does not exist", scenario_path.string()));
  }
  const auto sc = synth::load_scenario(scenario_path);
  const auto corpus = synth::generate(sc);
  Outputs out(cfg, "synth", cfg.out_dir / "synth");
  out.input("scenario:" + scenario_path.filename().string(), digest_file(scenario_path));
  out.write("tle.txt", synth::corpus_tle_text(corpus));
  out.write("masks.csv", synth::corpus_mask_text(corpus));
  out.write("satcat.csv", synth::corpus_satcat_text(corpus, sc));
  out.write("missions.csv", synth::corpus_mission_text(corpus));
  std::string inj = csv_row({"norad_id", "element", "kind", "start", "end", "magnitude_sigma", "sign"});
  for (const auto& i : corpus.realized_injections) {
    inj += csv_row({i.norad_id ? std::to_string(*i.norad_id) : "all", std::string(kElementNames[index_of(i.element)]),
                    std::string(synth::to_string(i.kind)), to_iso8601(i.start), to_iso8601(i.end), num(i.magnitude),
                    num(i.sign)});
  }
  out.write("injections.csv", inj);
  out.finish();
  log(fmt::format("synth: {} objects written to {}", corpus.objects.size(), out.dir().string()));
  return {};
}

// ---------------------------------------------------------------------------
// ingest

inline std::vector<std::string> cmd_ingest(const RunConfig& cfg, const Logger& log) {
  const auto ws = load_workspace(cfg, log);
  Outputs out(cfg, "ingest", cfg.out_dir / "ingest");
  out.inputs(ws.input_digests);
  const std::set<int> selected(ws.selected.begin(), ws.selected.end());
  std::string objects = csv_row({"norad_id", "observations", "first_epoch", "last_epoch", "selected", "mission_class",
                                 "regime"});
  for (const auto& [id, s] : ws.series) {
    const bool sel = selected.contains(id);
    objects += csv_row({std::to_string(id), std::to_string(s.size()), to_iso8601(s.observations.front().epoch),
                        to_iso8601(s.observations.back().epoch), sel ? "1" : "0",
                        sel ? std::string(to_string(ws.missions.at(id))) : "",
                        std::string(stats::to_string(stats::regime_of(s)))});
  }
  out.write("objects.csv", objects);
  json report;
  report["records_parsed"] = ws.load.records_parsed;
  report["duplicates_removed"] = ws.load.duplicates_removed;
  report["checksum_warnings"] = ws.load.checksum_warnings;
  report["objects"] = ws.series.size();
  report["selected"] = ws.selected.size();
  report["rejected"] = json::array();
  for (const auto& r : ws.load.rejected) report["rejected"].push_back({{"line", r.line_number}, {"reason", r.reason}});
  report["warnings"] = ws.warnings;
  out.write("load_report.json", report.dump(2) + "\n");
  out.finish();
  return {};
}

// ---------------------------------------------------------------------------
// label

inline std::vector<std::string> cmd_label(const RunConfig& cfg, const std::string& window_name, const Logger& log) {
  const auto& window = cfg.window(window_name);
  const auto ws = load_workspace(cfg, log);
  const std::vector<Element> elements(kAllElements.begin(), kAllElements.end());
  const auto labels = label_population(ws.series, ws.selected, elements, window);
  Outputs out(cfg, "label", cfg.out_dir / "label" / window_name);
  out.inputs(ws.input_digests);
  out.write("labels.csv", export_labels(labels.tables));
  std::string summary = csv_row({"norad_id", "element", "observations", "outliers", "q1", "q3", "iqr"});
  for (const auto& t : labels.tables) {
    summary += csv_row({std::to_string(t.norad_id), std::string(kElementNames[index_of(t.element)]),
                        std::to_string(t.values.size()), std::to_string(t.outlier_count()), num(t.q1), num(t.q3),
                        num(t.iqr)});
  }
  out.write("summary.csv", summary);
  for (const auto& w : labels.warnings) out.failure(w);
  out.finish();
  log(fmt::format("label: {} tables for window '{}'", labels.tables.size(), window_name));
  return labels.warnings;
}

// ---------------------------------------------------------------------------
// train

inline fs::path model_path(const RunConfig& cfg, const std::string& window_name, int id) {
  return cfg.out_dir / "models" / window_name / fmt::format("{}.model", id);
}

// Identifies the rows, configuration and seed a model is fitted from.
inline std::string training_digest(const nn::Tensor& rows, const RunConfig& cfg, std::uint64_t seed) {
  Fnv1a h;
  h.update(cfg.canonical()["model"].dump());
  h.update(fmt::format("|{}|{}x{}|", seed, rows.rows, rows.cols));
  h.update(std::string_view(reinterpret_cast<const char*>(rows.data.data()), rows.data.size() * sizeof(double)));
  return h.hex();
}

struct TrainSummary {
  std::size_t trained = 0;
  std::size_t up_to_date = 0;
  std::vector<std::string> failures;
};

inline TrainSummary cmd_train(const RunConfig& cfg, const std::string& window_name, bool force, const Logger& log) {
  const auto& window = cfg.window(window_name);
  const auto ws = load_workspace(cfg, log);
  struct Row {
    std::string status;
    std::size_t rows = 0;
    double final_loss = 0.0;
    std::string error;
  };
  std::vector<Row> rows(ws.selected.size());
  parallel_for(ws.selected.size(), cfg.workers, [&](std::size_t i) {
    const int id = ws.selected[i];
    auto& row = rows[i];
    try {
      const auto slice = ws.series.at(id).slice(window);
      const auto x = eval::observation_matrix(slice);
      row.rows = x.rows;
      auto mc = cfg.model;
      mc.seed = sub_seed(cfg.seed, id);
      const auto digest = training_digest(x, cfg, mc.seed);
      const auto path = model_path(cfg, window_name, id);
      if (!force && fs::exists(path)) {
        try {
          const auto existing = nn::load_model(path);
          if (existing.meta.input_digest == digest) {
            row.status = "up_to_date";
            row.final_loss = existing.meta.final_loss;
            return;
          }
        } catch (const DataError&) {
          // Unreadable model files are simply retrained.
        }
      }
      auto m = nn::train(x, mc, std::max<std::size_t>(mc.batch_size, 1));
      m.meta.input_digest = digest;
      nn::save_model(m, path);
      row.status = "trained";
      row.final_loss = m.meta.final_loss;
    } catch (const DataError& e) {
      row.status = "failed";
      row.error = e.what();
    } catch (const ModelError& e) {
      row.status = "failed";
      row.error = e.what();
    }
  });

  Outputs out(cfg, "train", cfg.out_dir / "train" / window_name);
  out.inputs(ws.input_digests);
  TrainSummary summary;
  std::string csv = csv_row({"norad_id", "training_rows", "final_loss", "status", "error"});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const auto id = ws.selected[i];
    // Trained and up-to-date both report "ok", so a resumed run writes the same bytes.
    csv += csv_row({std::to_string(id), std::to_string(r.rows), r.status == "failed" ? "" : num(r.final_loss),
                    r.status == "failed" ? "failed" : "ok", r.error});
    if (r.status == "trained") ++summary.trained;
    if (r.status == "up_to_date") ++summary.up_to_date;
    if (r.status == "failed") {
      summary.failures.push_back(fmt::format("{}: {}", id, r.error));
      out.failure(summary.failures.back());
    }
  }
  out.write("summary.csv", csv);
  out.finish();
  log(fmt::format("train: {} trained, {} up to date, {} failed", summary.trained, summary.up_to_date,
                  summary.failures.size()));
  for (const auto& f : summary.failures) log(fmt::format("  failed {}", f));
  if (!ws.selected.empty() && summary.failures.size() == ws.selected.size()) {
    throw DataError("training failed for every selected object");
  }
  return summary;
}

// ---------------------------------------------------------------------------
// score

struct ScoredSet {
  std::vector<stats::ScoredObservation> observations;  // ordered by id, then epoch
  std::vector<std::vector<nn::AnomalyVerdict>> verdicts;  // per selected object; empty on failure
  std::vector<std::string> failures;
};

// Scores every selected object's observations (optionally only those inside
// `window`) with its stored model.
inline ScoredSet score_selected(const RunConfig& cfg, const Workspace& ws, const std::optional<PeriodWindow>& window) {
  ScoredSet out;
  out.verdicts.resize(ws.selected.size());
  std::vector<std::string> errors(ws.selected.size());
  parallel_for(ws.selected.size(), cfg.workers, [&](std::size_t i) {
    const int id = ws.selected[i];
    const auto path = model_path(cfg, cfg.model_window, id);
    try {
      if (!fs::exists(path)) throw DataError(fmt::format("no model at {} (run train first)", path.filename().string()));
      const auto model = nn::load_model(path);
      const auto& full = ws.series.at(id);
      const auto s = window ? full.slice(*window) : full;
      std::vector<Timestamp> epochs;
      for (const auto& r : s.observations) epochs.push_back(r.epoch);
      out.verdicts[i] = nn::score(model, eval::observation_matrix(s), epochs);
    } catch (const DataError& e) {
      errors[i] = fmt::format("{}: {}", id, e.what());
    } catch (const ModelError& e) {
      errors[i] = fmt::format("{}: {}", id, e.what());
    }
  });
  for (std::size_t i = 0; i < ws.selected.size(); ++i) {
    if (!errors[i].empty()) out.failures.push_back(errors[i]);
    const int id = ws.selected[i];
    for (const auto& v : out.verdicts[i]) out.observations.push_back({id, v.epoch, ws.missions.at(id), v.flags});
  }
  return out;
}

inline std::vector<std::string> cmd_score(const RunConfig& cfg, const std::string& window_name, const Logger& log) {
  const auto& window = cfg.window(window_name);
  const auto ws = load_workspace(cfg, log);
  const auto scored = score_selected(cfg, ws, window);
  if (!ws.selected.empty() && scored.failures.size() == ws.selected.size()) {
    throw DataError(fmt::format("no object could be scored: {}", scored.failures.front()));
  }
  Outputs out(cfg, "score", cfg.out_dir / "score" / window_name);
  out.inputs(ws.input_digests);
  std::string csv = "norad_id,epoch,mission_class";
  for (auto n : kElementNames) csv += fmt::format(",err_{}", n);
  for (auto n : kElementNames) csv += fmt::format(",flag_{}", n);
  csv += ",any_flag,latent_knn_distance\n";
  std::string jsonl;
  std::size_t n_obs = 0, n_flagged = 0;
  std::array<std::size_t, kNumElements> per_element{};
  for (std::size_t i = 0; i < ws.selected.size(); ++i) {
    const int id = ws.selected[i];
    const auto mission = std::string(to_string(ws.missions.at(id)));
    for (const auto& v : scored.verdicts[i]) {
      csv += fmt::format("{},{},{}", id, to_iso8601(v.epoch), mission);
      for (double e : v.squared_error) csv += "," + num(e);
      for (bool f : v.flags) csv += f ? ",1" : ",0";
      csv += fmt::format(",{},{}\n", v.any_flag ? 1 : 0, num(v.latent_knn_distance));
      ++n_obs;
      n_flagged += v.any_flag ? 1 : 0;
      for (std::size_t e = 0; e < kNumElements; ++e) per_element[e] += v.flags[e] ? 1 : 0;
      if (v.any_flag) {
        json row{{"norad_id", id}, {"epoch", to_iso8601(v.epoch)}, {"mission_class", mission}};
        for (std::size_t e = 0; e < kNumElements; ++e) {
          if (v.flags[e]) row["elements"].push_back(kElementNames[e]);
        }
        jsonl += row.dump() + "\n";
      }
    }
  }
  out.write("scores.csv", csv);
  out.write("anomalies.jsonl", jsonl);
  json summary{{"window", window_name},
               {"objects_scored", ws.selected.size() - scored.failures.size()},
               {"observations", n_obs},
               {"flagged_observations", n_flagged},
               {"anomaly_rate", n_obs == 0 ? 0.0 : double(n_flagged) / double(n_obs)}};
  for (std::size_t e = 0; e < kNumElements; ++e) summary["flagged_by_element"][kElementNames[e]] = per_element[e];
  out.write("summary.json", summary.dump(2) + "\n");
  for (const auto& f : scored.failures) out.failure(f);
  out.finish();
  log(fmt::format("score: {} of {} observations flagged in '{}'", n_flagged, n_obs, window_name));
  return scored.failures;
}

// ---------------------------------------------------------------------------
// evaluate

inline eval::DetectorSpec spec_for(const RunConfig& cfg, eval::ModelFamily f) {
  eval::DetectorSpec s;
  s.family = f;
  s.model = cfg.model;
  s.iforest = cfg.iforest;
  return s;
}

inline std::string summary_fields(const eval::PopulationSummary& s) {
  return fmt::format("{},{},{},{},{},{},{},{},{}", s.evaluated, s.skipped, num(s.accuracy), num(s.f1), num(s.mean_f1),
                     s.total.tp, s.total.fp, s.total.fn, s.total.tn);
}

inline constexpr std::string_view kSummaryHeader = "evaluated,skipped,accuracy,f1,mean_f1,tp,fp,fn,tn";

struct EvaluateOptions {
  std::optional<fs::path> grid;
  bool temporal = false;
};

inline std::vector<std::string> cmd_evaluate(const RunConfig& cfg, const EvaluateOptions& opt, const Logger& log) {
  const auto ws = load_workspace(cfg, log);
  if (ws.selected.empty()) throw DataError("no objects selected for evaluation");
  std::optional<synth::MaskFile> masks;
  if (cfg.evaluation.labels == "masks") masks = synth::load_masks(cfg.resolve(*cfg.data.masks));
  eval::PopulationRequest req;
  req.series = &ws.series;
  req.ids = ws.selected;
  req.train_window = cfg.window(cfg.evaluation.train_window);
  req.eval_window = cfg.window(cfg.evaluation.eval_window);
  req.labels = eval::LabelSource{masks ? &*masks : nullptr};
  req.seed = cfg.seed;
  req.workers = cfg.workers;

  Outputs out(cfg, "evaluate", cfg.out_dir / "evaluate");
  out.inputs(ws.input_digests);
  std::vector<std::string> failures;

  std::string summary = fmt::format("model,{}\n", kSummaryHeader);
  std::string per_object = "model,norad_id,status,accuracy,f1,tp,fp,fn,tn\n";
  for (auto f : cfg.evaluation.families) {
    const auto results = eval::evaluate_population(req, spec_for(cfg, f));
    const auto s = eval::summarize(results);
    summary += fmt::format("{},{}\n", eval::display_name(f), summary_fields(s));
    for (const auto& r : results) {
      const auto t = r.total();
      per_object += csv_row({std::string(eval::display_name(f)), std::to_string(r.norad_id),
                             r.skipped ? "skipped: " + *r.skipped : "ok", num(stats::accuracy(t)), num(stats::f1(t)),
                             std::to_string(t.tp), std::to_string(t.fp), std::to_string(t.fn), std::to_string(t.tn)});
      if (r.skipped) failures.push_back(fmt::format("{} {}: {}", eval::display_name(f), r.norad_id, *r.skipped));
    }
    log(fmt::format("evaluate: {} accuracy {:.4f} f1 {:.4f} over {} objects", eval::display_name(f), s.accuracy, s.f1,
                    s.evaluated));
  }
  out.write("summary.csv", summary);
  out.write("per_object.csv", per_object);

  if (opt.grid) {
    if (!fs::is_regular_file(*opt.grid)) throw ConfigError(fmt::format("grid file '{}' does not exist", opt.grid->string()));
    json g;
    try {
      g = json::parse(read_text_file(*opt.grid));
    } catch (const json::exception& e) {
      throw ConfigError(fmt::format("{}: {}", opt.grid->string(), e.what()));
    }
    out.input("grid:" + opt.grid->filename().string(), digest_file(*opt.grid));
    auto grid_req = req;
    if (g.contains("objects")) {
      const auto n = g.at("objects").get<std::size_t>();
      if (n == 0) throw ConfigError("grid 'objects' must be positive");
      if (n < grid_req.ids.size()) grid_req.ids.resize(n);
    }
    if (!g.contains("grids") || !g.at("grids").is_object()) throw ConfigError("grid file needs a 'grids' object");
    json best;
    for (const auto& [name, grid] : g.at("grids").items()) {
      const auto f = eval::family_from_string(name);
      const auto axes = grid.is_string() && grid.get<std::string>() == "default" ? eval::default_grid(f) : grid;
      const auto ranked = eval::grid_search(spec_for(cfg, f), axes, grid_req);
      std::string csv = fmt::format("rank,index,params,{}\n", kSummaryHeader);
      for (std::size_t r = 0; r < ranked.size(); ++r) {
        csv += fmt::format("{},{},{},{}\n", r + 1, ranked[r].index, quote_field(ranked[r].params.dump()),
                           summary_fields(ranked[r].summary));
      }
      out.write(fmt::format("grid_{}.csv", eval::to_string(f)), csv);
      best[std::string(eval::to_string(f))] = {{"params", ranked.front().params},
                                                {"mean_f1", ranked.front().summary.mean_f1}};
      log(fmt::format("grid: {} best mean F1 {:.4f} with {}", eval::display_name(f), ranked.front().summary.mean_f1,
                      ranked.front().params.dump()));
    }
    out.write("grid_best.json", best.dump(2) + "\n");
  }

  if (opt.temporal) {
    std::vector<eval::DetectorSpec> specs;
    for (auto f : cfg.evaluation.families) specs.push_back(spec_for(cfg, f));
    const auto rows =
        eval::temporal_window_eval(specs, req, req.train_window.end, cfg.evaluation.temporal_years);
    std::string longform = fmt::format("years,model,train_start,train_end,{},skipped_row\n", kSummaryHeader);
    for (const auto& r : rows) {
      longform += fmt::format("{},{},{},{},{},{}\n", r.years, eval::display_name(r.family),
                              to_iso8601(r.train_window.start), to_iso8601(r.train_window.end),
                              summary_fields(r.summary), r.skipped ? 1 : 0);
      if (r.skipped) failures.push_back(fmt::format("temporal {}y {}: no object evaluated", r.years,
                                                    eval::display_name(r.family)));
    }
    out.write("temporal.csv", longform);
    // Wide layout: one row per window, Acc/F1 pairs per model.
    std::string wide = "window";
    for (auto f : cfg.evaluation.families) wide += fmt::format(",{} Acc,{} F1", eval::display_name(f), eval::display_name(f));
    wide += "\n";
    for (std::size_t y = 0; y < cfg.evaluation.temporal_years.size(); ++y) {
      wide += fmt::format("{} Year", cfg.evaluation.temporal_years[y]);
      for (std::size_t k = 0; k < specs.size(); ++k) {
        const auto& r = rows[y * specs.size() + k];
        wide += fmt::format(",{:.3f},{:.3f}", r.summary.accuracy, r.summary.f1);
      }
      wide += "\n";
    }
    out.write("temporal_table.csv", wide);
  }
  for (const auto& f : failures) out.failure(f);
  out.finish();
  return failures;
}

// ---------------------------------------------------------------------------
// stats

struct StatsOptions {
  std::optional<std::pair<std::string, std::string>> chi2;
  bool monthly = false;
  bool diffs = false;
  bool corr = false;

  bool any() const { return chi2 || monthly || diffs || corr; }
};

inline std::vector<std::string> cmd_stats(const RunConfig& cfg, StatsOptions opt, const Logger& log) {
  if (!opt.any()) opt = StatsOptions{std::pair<std::string, std::string>{"baseline", "leadup"}, true, true, true};
  if (opt.chi2) {
    cfg.window(opt.chi2->first);
    cfg.window(opt.chi2->second);
  }
  const auto ws = load_workspace(cfg, log);
  const auto scored = score_selected(cfg, ws, std::nullopt);
  if (scored.observations.empty()) {
    throw DataError(fmt::format("no scored observations; run train --window {} first", cfg.model_window));
  }
  Outputs out(cfg, "stats", cfg.out_dir / "stats");
  out.inputs(ws.input_digests);
  const auto& obs = scored.observations;

  if (opt.chi2) {
    const auto& a = cfg.window(opt.chi2->first);
    const auto& b = cfg.window(opt.chi2->second);
    stats::ContingencyTable2x2 t{};
    for (const auto& o : obs) {
      if (a.contains(o.epoch)) {
        ++t.total_a;
        t.anomalies_a += o.any_flag() ? 1 : 0;
      } else if (b.contains(o.epoch)) {
        ++t.total_b;
        t.anomalies_b += o.any_flag() ? 1 : 0;
      }
    }
    const auto r = stats::chi_square_2x2(t);
    const double rate_a = double(t.anomalies_a) / double(t.total_a);
    const double rate_b = double(t.anomalies_b) / double(t.total_b);
    json j{{"window_a", a.name},
           {"window_b", b.name},
           {"anomalies_a", t.anomalies_a},
           {"total_a", t.total_a},
           {"anomalies_b", t.anomalies_b},
           {"total_b", t.total_b},
           {"rate_a", rate_a},
           {"rate_b", rate_b},
           {"fold_change", rate_a > 0 ? json(rate_b / rate_a) : json(nullptr)},
           {"statistic", r.statistic},
           {"statistic_uncorrected", r.uncorrected},
           {"p_value", r.p_value},
           {"p", r.p_text()}};
    out.write("chi_square.json", j.dump(2) + "\n");
    log(fmt::format("stats: chi-square {:.2f}, p {}", r.statistic, r.p_text()));
  }

  if (opt.monthly) {
    for (bool by_mission : {false, true}) {
      std::string csv = csv_row({"group", "month", "count", "change", "pct_change", "exceeds_mean"});
      for (const auto& r : stats::monthly_counts(obs, by_mission)) {
        csv += csv_row({r.group, r.month, std::to_string(r.count), r.change ? std::to_string(*r.change) : "",
                        opt_num(r.pct_change), r.exceeds_mean ? "1" : "0"});
      }
      out.write(by_mission ? "monthly_by_mission.csv" : "monthly.csv", csv);
    }
  }

  std::set<std::pair<int, Timestamp>> flagged_leadup;
  const auto& leadup = cfg.window("leadup");
  for (const auto& o : obs) {
    if (o.any_flag() && leadup.contains(o.epoch)) flagged_leadup.insert({o.norad_id, o.epoch});
  }
  SeriesMap selected;
  for (int id : ws.selected) selected[id] = ws.series.at(id);

  if (opt.diffs) {
    std::string csv = "norad_id,mission_class,epoch,anomalous";
    for (auto n : kElementNames) csv += fmt::format(",d_{}", n);
    csv += "\n";
    for (const auto& [id, s] : selected) {
      if (s.size() < 2) continue;
      const auto d = stats::diff_series(s);
      for (std::size_t i = 0; i < d.epochs.size(); ++i) {
        if (!leadup.contains(d.epochs[i])) continue;
        csv += fmt::format("{},{},{},{}", id, to_string(ws.missions.at(id)), to_iso8601(d.epochs[i]),
                           flagged_leadup.contains({id, d.epochs[i]}) ? 1 : 0);
        for (std::size_t e = 0; e < kNumElements; ++e) csv += "," + num(d.wrapped[e][i]);
        csv += "\n";
      }
    }
    out.write("diffs.csv", csv);
    std::string pct = "mission_class,element,baseline_mean,leadup_mean,pct_change\n";
    for (const auto& r : stats::percent_change_table(selected, ws.missions, cfg.window("baseline"), leadup)) {
      for (std::size_t e = 0; e < kNumElements; ++e) {
        pct += csv_row({r.mission, std::string(kElementNames[e]), opt_num(r.baseline_mean[e]),
                        opt_num(r.leadup_mean[e]), opt_num(r.pct_change[e])});
      }
    }
    out.write("percent_change.csv", pct);
  }

  if (opt.corr) {
    std::string csv = "subset,mission_class,regime,samples,element";
    for (auto n : kElementNames) csv += fmt::format(",{}", n);
    csv += "\n";
    auto emit = [&](std::string_view subset, const std::vector<stats::CorrelationGroup>& groups) {
      for (const auto& g : groups) {
        for (std::size_t a = 0; a < kNumElements; ++a) {
          csv += fmt::format("{},{},{},{},{}", subset, g.mission, stats::to_string(g.regime), g.samples,
                             kElementNames[a]);
          for (std::size_t b = 0; b < kNumElements; ++b) csv += "," + opt_num(g.r[a][b]);
          csv += "\n";
        }
      }
    };
    emit("all", stats::element_correlations(selected, ws.missions));
    emit("anomalous_leadup", stats::element_correlations(selected, ws.missions, &flagged_leadup));
    out.write("correlations.csv", csv);
  }
  for (const auto& f : scored.failures) out.failure(f);
  out.finish();
  return scored.failures;
}

}  // namespace rsoanom::pipeline
