#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <fmt/format.h>

#include "rsoanom/elements.hpp"
#include "rsoanom/error.hpp"

namespace rsoanom::stats {

// One flag per orbital element of an observation.
using ElementFlags = std::array<bool, kNumElements>;

// Outlier label vs anomaly flag.
struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const noexcept { return tp + fp + fn + tn; }

  void add(bool label, bool flag) noexcept {
    if (label && flag) ++tp;
    else if (!label && flag) ++fp;
    else if (label && !flag) ++fn;
    else ++tn;
  }

  ConfusionCounts& operator+=(const ConfusionCounts& o) noexcept {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }

  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

inline ConfusionCounts confusion(std::span<const bool> labels, std::span<const bool> flags) {
  if (labels.size() != flags.size()) {
    throw DataError(fmt::format("label/flag length mismatch: {} vs {}", labels.size(), flags.size()));
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) c.add(labels[i], flags[i]);
  return c;
}

inline ConfusionCounts confusion(const std::vector<bool>& labels, const std::vector<bool>& flags) {
  if (labels.size() != flags.size()) {
    throw DataError(fmt::format("label/flag length mismatch: {} vs {}", labels.size(), flags.size()));
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) c.add(labels[i], flags[i]);
  return c;
}

// Per-element counts over aligned observation sequences.
inline std::array<ConfusionCounts, kNumElements> element_confusion(std::span<const ElementFlags> labels,
                                                                   std::span<const ElementFlags> flags) {
  if (labels.size() != flags.size()) {
    throw DataError(fmt::format("label/flag length mismatch: {} vs {}", labels.size(), flags.size()));
  }
  std::array<ConfusionCounts, kNumElements> out{};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t e = 0; e < kNumElements; ++e) out[e].add(labels[i][e], flags[i][e]);
  }
  return out;
}

inline ConfusionCounts sum(std::span<const ConfusionCounts> parts) {
  ConfusionCounts c;
  for (const auto& p : parts) c += p;
  return c;
}

// 2tp / (2tp + fp + fn); 0 when nothing was labelled or flagged.
inline double f1(const ConfusionCounts& c) noexcept {
  const auto denom = 2 * c.tp + c.fp + c.fn;
  return denom == 0 ? 0.0 : static_cast<double>(2 * c.tp) / static_cast<double>(denom);
}

inline double accuracy(const ConfusionCounts& c) noexcept {
  const auto n = c.total();
  return n == 0 ? 0.0 : static_cast<double>(c.tp + c.tn) / static_cast<double>(n);
}

inline double precision(const ConfusionCounts& c) noexcept {
  return c.tp + c.fp == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
}

inline double recall(const ConfusionCounts& c) noexcept {
  return c.tp + c.fn == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

}  // namespace rsoanom::stats
