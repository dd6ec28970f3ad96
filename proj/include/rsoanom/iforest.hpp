#pragma once

// Isolation forest: random axis-aligned splits, score 2^(-E[h(x)] / c(psi)).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "rsoanom/elements.hpp"
#include "rsoanom/error.hpp"
#include "rsoanom/nn/tensor.hpp"
#include "rsoanom/rng.hpp"

namespace rsoanom {

using nn::Tensor;

inline constexpr double kEulerGamma = 0.5772156649015329;

// per_element fits one forest per orbital element on its 1-d series;
// joint6d fits one forest on whole 6-d rows.
enum class IForestMode { kPerElement, kJoint6d };

inline IForestMode iforest_mode_from_string(std::string_view s) {
  if (s == "per_element") return IForestMode::kPerElement;
  if (s == "joint6d") return IForestMode::kJoint6d;
  throw ConfigError(fmt::format("unknown isolation forest mode '{}'", s));
}

inline std::string_view to_string(IForestMode m) { return m == IForestMode::kJoint6d ? "joint6d" : "per_element"; }

struct IForestConfig {
  std::size_t n_estimators = 100;
  double max_samples = 1.0;            // fraction when <= 1, else a row count
  std::optional<double> contamination;  // unset = AUTO
  std::uint64_t seed = 0;
  IForestMode mode = IForestMode::kPerElement;

  void validate() const {
    if (n_estimators == 0) throw ConfigError("n_estimators must be positive");
    if (!(max_samples > 0.0)) throw ConfigError("max_samples must be positive");
    if (max_samples > 1.0 && max_samples != std::floor(max_samples)) {
      throw ConfigError("max_samples above 1 must be a whole row count");
    }
    if (contamination && !(*contamination > 0.0 && *contamination <= 0.5)) {
      throw ConfigError("contamination must lie in (0, 0.5] or be auto");
    }
  }

  std::size_t subsample_size(std::size_t n) const {
    const auto want = max_samples <= 1.0 ? static_cast<std::size_t>(std::floor(max_samples * static_cast<double>(n)))
                                         : static_cast<std::size_t>(max_samples);
    return std::clamp<std::size_t>(want, std::min<std::size_t>(2, n), n);
  }

  friend bool operator==(const IForestConfig&, const IForestConfig&) = default;
};

// Average unsuccessful-search path length of a binary search tree on n
// points, with harmonic numbers H(i) ~ ln(i) + gamma.
inline double average_path_length(std::size_t n) {
  if (n <= 1) return 0.0;
  const double m = static_cast<double>(n - 1);
  return 2.0 * (std::log(m) + kEulerGamma) - 2.0 * m / static_cast<double>(n);
}

struct IsoNode {
  int feature = -1;  // -1 marks a leaf
  double split = 0.0;
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  std::size_t size = 0;  // training rows reaching a leaf

  friend bool operator==(const IsoNode&, const IsoNode&) = default;
};

struct IsoTree {
  std::vector<IsoNode> nodes;
  std::size_t height_limit = 0;

  friend bool operator==(const IsoTree&, const IsoTree&) = default;
};

namespace detail {

inline std::uint32_t grow(IsoTree& tree, const Tensor& data, std::vector<std::size_t>& rows, std::size_t begin,
                          std::size_t end, std::size_t depth, Rng& rng) {
  const auto id = static_cast<std::uint32_t>(tree.nodes.size());
  tree.nodes.push_back({});
  const std::size_t n = end - begin;
  if (n <= 1 || depth >= tree.height_limit) {
    tree.nodes[id].size = n;
    return id;
  }
  std::vector<std::size_t> candidates;
  std::vector<std::pair<double, double>> range(data.cols);
  for (std::size_t f = 0; f < data.cols; ++f) {
    double lo = data(rows[begin], f);
    double hi = lo;
    for (std::size_t i = begin + 1; i < end; ++i) {
      lo = std::min(lo, data(rows[i], f));
      hi = std::max(hi, data(rows[i], f));
    }
    range[f] = {lo, hi};
    if (hi > lo) candidates.push_back(f);
  }
  if (candidates.empty()) {
    tree.nodes[id].size = n;
    return id;
  }
  const auto f = candidates[rng.below(candidates.size())];
  const auto [lo, hi] = range[f];
  double split = hi;
  // Adjacent doubles leave no interior point; splitting at hi still separates them.
  if (std::nextafter(lo, hi) < hi) {
    do {
      split = rng.uniform(lo, hi);
    } while (!(split > lo && split < hi));
  }

  const auto mid = std::partition(rows.begin() + static_cast<std::ptrdiff_t>(begin),
                                  rows.begin() + static_cast<std::ptrdiff_t>(end),
                                  [&](std::size_t r) { return data(r, f) < split; }) -
                   rows.begin();
  const auto left = grow(tree, data, rows, begin, static_cast<std::size_t>(mid), depth + 1, rng);
  const auto right = grow(tree, data, rows, static_cast<std::size_t>(mid), end, depth + 1, rng);
  auto& node = tree.nodes[id];
  node.feature = static_cast<int>(f);
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

}  // namespace detail

// Depth at which x lands plus the expected remaining depth of its leaf.
inline double path_length(const IsoTree& tree, std::span<const double> x) {
  std::uint32_t i = 0;
  double depth = 0.0;
  while (tree.nodes[i].feature >= 0) {
    const auto& n = tree.nodes[i];
    i = x[static_cast<std::size_t>(n.feature)] < n.split ? n.left : n.right;
    depth += 1.0;
  }
  return depth + average_path_length(tree.nodes[i].size);
}

struct IsolationForest {
  IForestConfig config;
  std::size_t dims = 0;
  std::size_t subsample = 0;
  std::vector<IsoTree> trees;

  bool fitted() const noexcept { return !trees.empty(); }

  friend bool operator==(const IsolationForest&, const IsolationForest&) = default;
};

inline IsolationForest fit_iforest(const Tensor& data, const IForestConfig& cfg) {
  cfg.validate();
  if (data.rows < 2) throw DataError(fmt::format("isolation forest needs at least 2 rows, got {}", data.rows));
  if (data.cols == 0) throw DataError("isolation forest needs at least one feature");
  for (double v : data.data) {
    if (!std::isfinite(v)) throw DataError("isolation forest input contains a non-finite value");
  }
  IsolationForest forest;
  forest.config = cfg;
  forest.dims = data.cols;
  forest.subsample = cfg.subsample_size(data.rows);
  const auto limit = static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(forest.subsample))));

  Rng rng(cfg.seed);
  std::vector<std::size_t> all(data.rows);
  for (std::size_t t = 0; t < cfg.n_estimators; ++t) {
    std::iota(all.begin(), all.end(), std::size_t{0});
    // Partial Fisher-Yates: the first `subsample` slots are a uniform draw.
    for (std::size_t i = 0; i < forest.subsample && forest.subsample < all.size(); ++i) {
      std::swap(all[i], all[i + rng.below(all.size() - i)]);
    }
    std::vector<std::size_t> rows(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(forest.subsample));
    IsoTree tree;
    tree.height_limit = limit;
    detail::grow(tree, data, rows, 0, rows.size(), 0, rng);
    forest.trees.push_back(std::move(tree));
  }
  return forest;
}

inline double mean_path_length(const IsolationForest& forest, std::span<const double> x) {
  // Running mean stays exact when every tree agrees (constant data scores 0.5).
  double mean = 0.0;
  double k = 0.0;
  for (const auto& t : forest.trees) {
    k += 1.0;
    mean += (path_length(t, x) - mean) / k;
  }
  return mean;
}

// Anomaly score in (0, 1]; 0.5 means indistinguishable from the sample.
inline std::vector<double> score_iforest(const IsolationForest& forest, const Tensor& data) {
  if (!forest.fitted()) throw ModelError("isolation forest is not fitted");
  if (data.cols != forest.dims) {
    throw ModelError(fmt::format("input has {} columns, forest expects {}", data.cols, forest.dims));
  }
  const double c = average_path_length(forest.subsample);
  std::vector<double> out(data.rows);
  for (std::size_t r = 0; r < data.rows; ++r) out[r] = std::exp2(-mean_path_length(forest, data.row(r)) / c);
  return out;
}

// Fixed contamination f flags the ceil(f*N) highest scores, earlier rows
// winning ties; AUTO flags scores above 0.5.
inline std::vector<bool> classify_scores(std::span<const double> scores, std::optional<double> contamination) {
  std::vector<bool> flags(scores.size(), false);
  if (!contamination) {
    for (std::size_t i = 0; i < scores.size(); ++i) flags[i] = scores[i] > 0.5;
    return flags;
  }
  const auto k = std::min(scores.size(), static_cast<std::size_t>(
                                             std::ceil(*contamination * static_cast<double>(scores.size()) - 1e-9)));
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  for (std::size_t i = 0; i < k; ++i) flags[order[i]] = true;
  return flags;
}

inline std::vector<bool> classify(const IsolationForest& forest, const Tensor& data) {
  return classify_scores(score_iforest(forest, data), forest.config.contamination);
}

// Per-observation, per-element result of the baseline detector.
struct IForestDetection {
  std::vector<std::array<double, kNumElements>> scores;
  std::vector<std::array<bool, kNumElements>> flags;
};

// Fits on `training` rows (N x 6) and classifies `target` rows. In joint6d
// mode the row verdict is copied to all six elements.
inline IForestDetection detect_iforest(const Tensor& training, const Tensor& target, const IForestConfig& cfg) {
  if (training.cols != kNumElements || target.cols != kNumElements) throw DataError("expected 6 element columns");
  IForestDetection out;
  out.scores.assign(target.rows, {});
  out.flags.assign(target.rows, {});
  auto column = [](const Tensor& t, std::size_t c) {
    Tensor col(t.rows, 1);
    for (std::size_t r = 0; r < t.rows; ++r) col(r, 0) = t(r, c);
    return col;
  };
  if (cfg.mode == IForestMode::kJoint6d) {
    const auto forest = fit_iforest(training, cfg);
    const auto s = score_iforest(forest, target);
    const auto f = classify_scores(s, cfg.contamination);
    for (std::size_t r = 0; r < target.rows; ++r) {
      out.scores[r].fill(s[r]);
      out.flags[r].fill(f[r]);
    }
    return out;
  }
  for (std::size_t e = 0; e < kNumElements; ++e) {
    auto sub = cfg;
    sub.seed = cfg.seed + e;
    const auto forest = fit_iforest(column(training, e), sub);
    const auto s = score_iforest(forest, column(target, e));
    const auto f = classify_scores(s, cfg.contamination);
    for (std::size_t r = 0; r < target.rows; ++r) {
      out.scores[r][e] = s[r];
      out.flags[r][e] = f[r];
    }
  }
  return out;
}

}  // namespace rsoanom
