#pragma once

// Detector evaluation against per-element labels: single runs, grid search
// over hyperparameters and temporal training-window sweeps.

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "rsoanom/ephemeris.hpp"
#include "rsoanom/error.hpp"
#include "rsoanom/iforest.hpp"
#include "rsoanom/nn/model.hpp"
#include "rsoanom/oracle.hpp"
#include "rsoanom/parallel.hpp"
#include "rsoanom/rng.hpp"
#include "rsoanom/stats/metrics.hpp"
#include "rsoanom/synth.hpp"

namespace rsoanom::eval {

using stats::ConfusionCounts;
using stats::ElementFlags;

enum class ModelFamily { kIForest, kAutoencoder, kAnchorAutoencoder };

inline constexpr std::array<ModelFamily, 3> kAllFamilies{ModelFamily::kIForest, ModelFamily::kAutoencoder,
                                                         ModelFamily::kAnchorAutoencoder};

inline std::string_view to_string(ModelFamily f) {
  switch (f) {
    case ModelFamily::kIForest: return "iforest";
    case ModelFamily::kAutoencoder: return "ae";
    case ModelFamily::kAnchorAutoencoder: return "anchor_ae";
  }
  return "ae";
}

inline std::string_view display_name(ModelFamily f) {
  switch (f) {
    case ModelFamily::kIForest: return "IF";
    case ModelFamily::kAutoencoder: return "AE";
    case ModelFamily::kAnchorAutoencoder: return "Anchor AE";
  }
  return "AE";
}

inline ModelFamily family_from_string(std::string_view s) {
  if (s == "iforest" || s == "if" || s == "IF") return ModelFamily::kIForest;
  if (s == "ae" || s == "AE") return ModelFamily::kAutoencoder;
  if (s == "anchor_ae" || s == "Anchor AE") return ModelFamily::kAnchorAutoencoder;
  throw ConfigError(fmt::format("unknown model family '{}'", s));
}

struct DetectorSpec {
  ModelFamily family = ModelFamily::kAnchorAutoencoder;
  nn::ModelConfig model;
  IForestConfig iforest;
};

inline nn::Tensor observation_matrix(const EphemerisSeries& s) {
  nn::Tensor t(s.size(), kNumElements);
  for (std::size_t r = 0; r < s.size(); ++r) {
    const auto a = s.observations[r].elements.to_array();
    std::copy(a.begin(), a.end(), t.row(r).begin());
  }
  return t;
}

// IQR fence labels per element over the given observations.
inline std::vector<ElementFlags> iqr_labels(const EphemerisSeries& s) {
  std::vector<ElementFlags> out(s.size());
  for (Element e : kAllElements) {
    const auto mask = iqr_outliers(element_values(s, e));
    for (std::size_t i = 0; i < s.size(); ++i) out[i][index_of(e)] = mask[i];
  }
  return out;
}

// Where per-observation labels come from: IQR fences over the evaluated
// observations, or generator ground truth.
struct LabelSource {
  const synth::MaskFile* masks = nullptr;

  std::vector<ElementFlags> operator()(const EphemerisSeries& s) const {
    if (masks == nullptr) return iqr_labels(s);
    std::vector<ElementFlags> out;
    out.reserve(s.size());
    for (const auto& r : s.observations) {
      auto it = masks->rows.find({s.norad_id, r.epoch});
      if (it == masks->rows.end()) {
        throw DataError(fmt::format("no ground-truth mask for {} at {}", s.norad_id, to_iso8601(r.epoch)));
      }
      out.push_back(it->second);
    }
    return out;
  }
};

inline std::size_t min_training_rows(const DetectorSpec& spec) {
  return spec.family == ModelFamily::kIForest ? 2 : std::max<std::size_t>(spec.model.batch_size, 2);
}

// Trains on `train` rows and returns per-element flags for `target` rows.
inline std::vector<ElementFlags> run_detector(const DetectorSpec& spec, const nn::Tensor& train,
                                              const nn::Tensor& target, std::uint64_t seed) {
  if (spec.family == ModelFamily::kIForest) {
    auto cfg = spec.iforest;
    cfg.seed = seed;
    return detect_iforest(train, target, cfg).flags;
  }
  auto cfg = spec.model;
  cfg.kind = spec.family == ModelFamily::kAnchorAutoencoder ? nn::ModelKind::kAnchor : nn::ModelKind::kPlain;
  cfg.seed = seed;
  const auto model = nn::train(train, cfg, min_training_rows(spec));
  const auto verdicts = nn::score(model, target);
  std::vector<ElementFlags> out(verdicts.size());
  for (std::size_t i = 0; i < verdicts.size(); ++i) out[i] = verdicts[i].flags;
  return out;
}

struct ObjectEvaluation {
  int norad_id = 0;
  std::optional<std::string> skipped;  // reason, when not evaluated
  std::array<ConfusionCounts, kNumElements> per_element{};

  ConfusionCounts total() const { return stats::sum(per_element); }
};

inline ObjectEvaluation evaluate_object(const EphemerisSeries& s, const DetectorSpec& spec,
                                        const PeriodWindow& train_window, const PeriodWindow& eval_window,
                                        const LabelSource& labels, std::uint64_t run_seed) {
  ObjectEvaluation out;
  out.norad_id = s.norad_id;
  const auto train = s.slice(train_window);
  const auto target = s.slice(eval_window);
  if (train.size() < min_training_rows(spec)) {
    out.skipped = fmt::format("{} training observations in '{}', need {}", train.size(), train_window.name,
                              min_training_rows(spec));
    return out;
  }
  if (target.size() < 4) {
    out.skipped = fmt::format("{} observations in '{}', need 4", target.size(), eval_window.name);
    return out;
  }
  const auto truth = labels(target);
  const auto flags = run_detector(spec, observation_matrix(train), observation_matrix(target),
                                  sub_seed(run_seed, s.norad_id));
  out.per_element = stats::element_confusion(truth, flags);
  return out;
}

struct PopulationSummary {
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
  ConfusionCounts total;
  double accuracy = 0.0;  // pooled over all (observation, element) pairs
  double f1 = 0.0;        // pooled
  double mean_f1 = 0.0;   // mean of per-object F1
};

inline PopulationSummary summarize(std::span<const ObjectEvaluation> results) {
  PopulationSummary s;
  double f1_sum = 0.0;
  for (const auto& r : results) {
    if (r.skipped) {
      ++s.skipped;
      continue;
    }
    ++s.evaluated;
    const auto t = r.total();
    s.total += t;
    f1_sum += stats::f1(t);
  }
  s.accuracy = stats::accuracy(s.total);
  s.f1 = stats::f1(s.total);
  s.mean_f1 = s.evaluated == 0 ? 0.0 : f1_sum / double(s.evaluated);
  return s;
}

struct PopulationRequest {
  const SeriesMap* series = nullptr;
  std::vector<int> ids;
  PeriodWindow train_window;
  PeriodWindow eval_window;
  LabelSource labels;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

inline std::vector<ObjectEvaluation> evaluate_population(const PopulationRequest& req, const DetectorSpec& spec) {
  std::vector<ObjectEvaluation> out(req.ids.size());
  parallel_for(req.ids.size(), req.workers, [&](std::size_t i) {
    const int id = req.ids[i];
    auto it = req.series->find(id);
    if (it == req.series->end()) {
      out[i].norad_id = id;
      out[i].skipped = "no series";
      return;
    }
    try {
      out[i] = evaluate_object(it->second, spec, req.train_window, req.eval_window, req.labels, req.seed);
    } catch (const DataError& e) {
      out[i] = ObjectEvaluation{id, std::string(e.what()), {}};
    } catch (const ModelError& e) {
      out[i] = ObjectEvaluation{id, std::string(e.what()), {}};
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Hyperparameter grids

// Cartesian product of a JSON object of arrays, last key varying fastest.
inline std::vector<nlohmann::json> enumerate_grid(const nlohmann::json& grid) {
  if (!grid.is_object() || grid.empty()) throw ConfigError("grid must be a non-empty object of arrays");
  std::vector<std::pair<std::string, nlohmann::json>> axes;
  for (const auto& [k, v] : grid.items()) {
    if (!v.is_array() || v.empty()) throw ConfigError(fmt::format("grid axis '{}' must be a non-empty array", k));
    axes.emplace_back(k, v);
  }
  std::vector<nlohmann::json> out{nlohmann::json::object()};
  for (const auto& [key, values] : axes) {
    std::vector<nlohmann::json> next;
    for (const auto& partial : out) {
      for (const auto& v : values) {
        auto p = partial;
        p[key] = v;
        next.push_back(std::move(p));
      }
    }
    out = std::move(next);
  }
  return out;
}

inline nlohmann::json default_grid(ModelFamily f) {
  using nlohmann::json;
  switch (f) {
    case ModelFamily::kIForest:
      return json{{"contamination", json::array({0.05, 0.1, 0.15, "auto"})},
                  {"n_estimators", json::array({50, 100, 200})},
                  {"max_samples", json::array({0.5, 0.8, 1.0})}};
    case ModelFamily::kAutoencoder:
      return json{{"latent_dim", json::array({2, 3, 4, 5})},
                  {"epochs", json::array({100, 150, 200})},
                  {"batch_size", json::array({16, 32, 64})},
                  {"threshold_sigma", json::array({1.5, 2.0, 2.5})}};
    case ModelFamily::kAnchorAutoencoder:
      return json{{"hidden_dim", json::array({16, 32, 64})},
                  {"latent_dim", json::array({2, 3, 4, 5})},
                  {"epochs", json::array({100, 150, 200})},
                  {"batch_size", json::array({16, 32, 64})},
                  {"threshold_sigma", json::array({1.5, 2.0, 2.5})}};
  }
  return {};
}

inline std::optional<double> contamination_from_json(const nlohmann::json& v) {
  if (v.is_string()) {
    if (v.get<std::string>() == "auto") return std::nullopt;
    throw ConfigError(fmt::format("contamination must be a number or \"auto\", got {}", v.dump()));
  }
  return v.get<double>();
}

inline DetectorSpec apply_params(DetectorSpec spec, const nlohmann::json& params) {
  try {
    for (const auto& [k, v] : params.items()) {
      auto& m = spec.model;
      auto& f = spec.iforest;
      if (k == "latent_dim") m.latent_dim = v.get<std::size_t>();
      else if (k == "hidden_dim") m.hidden_dim = v.get<std::size_t>();
      else if (k == "epochs") m.epochs = v.get<std::size_t>();
      else if (k == "batch_size") m.batch_size = v.get<std::size_t>();
      else if (k == "threshold_sigma") m.threshold_sigma = v.get<double>();
      else if (k == "lambda_anchor") m.lambda_anchor = v.get<double>();
      else if (k == "k_neighbors") m.k_neighbors = v.get<std::size_t>();
      else if (k == "learning_rate") m.learning_rate = v.get<double>();
      else if (k == "contamination") f.contamination = contamination_from_json(v);
      else if (k == "n_estimators") f.n_estimators = v.get<std::size_t>();
      else if (k == "max_samples") f.max_samples = v.get<double>();
      else if (k == "mode") f.mode = iforest_mode_from_string(v.get<std::string>());
      else throw ConfigError(fmt::format("unknown hyperparameter '{}'", k));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("bad hyperparameter value: {}", e.what()));
  }
  if (spec.family == ModelFamily::kIForest) spec.iforest.validate();
  else spec.model.validate();
  return spec;
}

struct GridResult {
  std::size_t index = 0;  // position in enumeration order
  nlohmann::json params;
  PopulationSummary summary;
};

// Evaluates every configuration on the request's subset; best mean F1 first,
// enumeration order breaking ties.
inline std::vector<GridResult> grid_search(const DetectorSpec& base, const nlohmann::json& grid,
                                           const PopulationRequest& req) {
  if (req.ids.empty()) throw ConfigError("grid search needs at least one object");
  const auto configs = enumerate_grid(grid);
  std::vector<DetectorSpec> specs;
  for (const auto& p : configs) specs.push_back(apply_params(base, p));
  std::vector<GridResult> out(configs.size());
  // Objects inside a configuration run in parallel; configurations run in order.
  for (std::size_t c = 0; c < configs.size(); ++c) {
    out[c].index = c;
    out[c].params = configs[c];
    out[c].summary = summarize(evaluate_population(req, specs[c]));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const GridResult& a, const GridResult& b) { return a.summary.mean_f1 > b.summary.mean_f1; });
  return out;
}

// ---------------------------------------------------------------------------
// Temporal training windows

inline Timestamp minus_years(Timestamp t, int years) {
  using namespace std::chrono;
  const auto day = floor<days>(t);
  const auto tod = t - day;
  year_month_day ymd{day};
  ymd = ymd - std::chrono::years{years};
  if (!ymd.ok()) ymd = ymd.year() / ymd.month() / last;
  return Timestamp{sys_days{ymd}} + tod;
}

struct TemporalRow {
  int years = 0;
  ModelFamily family = ModelFamily::kAnchorAutoencoder;
  PeriodWindow train_window;
  PopulationSummary summary;
  bool skipped = false;  // no object had enough data
};

// For each N in `years`, trains on [train_end - N years, train_end) and
// evaluates on `eval_window`. Rows come out year-major, family-minor.
inline std::vector<TemporalRow> temporal_window_eval(std::span<const DetectorSpec> specs, PopulationRequest req,
                                                     Timestamp train_end, std::span<const int> years) {
  std::vector<TemporalRow> out;
  for (int y : years) {
    if (y <= 0) throw ConfigError("temporal window lengths must be positive");
    req.train_window = PeriodWindow{fmt::format("{}y", y), minus_years(train_end, y), train_end};
    for (const auto& spec : specs) {
      TemporalRow row;
      row.years = y;
      row.family = spec.family;
      row.train_window = req.train_window;
      row.summary = summarize(evaluate_population(req, spec));
      row.skipped = row.summary.evaluated == 0;
      out.push_back(row);
    }
  }
  return out;
}

}  // namespace rsoanom::eval
