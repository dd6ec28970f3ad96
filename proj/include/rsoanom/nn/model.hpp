#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "rsoanom/elements.hpp"
#include "rsoanom/error.hpp"
#include "rsoanom/nn/autoencoder.hpp"
#include "rsoanom/nn/config.hpp"
#include "rsoanom/nn/tensor.hpp"
#include "rsoanom/rng.hpp"
#include "rsoanom/time.hpp"

namespace rsoanom::nn {

inline constexpr double kStdFloor = 1e-12;
inline constexpr std::size_t kLatentReferenceSize = 512;

// Per-column standardisation fitted on the training window.
struct NormStats {
  std::array<double, kNumElements> mean{};
  std::array<double, kNumElements> stddev{};

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

inline NormStats fit_norm_stats(const Tensor& data) {
  if (data.cols != kNumElements) throw DataError("training matrix must have 6 columns");
  if (data.rows == 0) throw DataError("training matrix is empty");
  NormStats s;
  const auto n = static_cast<double>(data.rows);
  for (std::size_t c = 0; c < kNumElements; ++c) {
    double sum = 0.0;
    for (std::size_t r = 0; r < data.rows; ++r) {
      const double v = data(r, c);
      if (!std::isfinite(v)) throw DataError(fmt::format("non-finite value at row {} column {}", r, c));
      sum += v;
    }
    const double mean = sum / n;
    double ss = 0.0;
    for (std::size_t r = 0; r < data.rows; ++r) ss += (data(r, c) - mean) * (data(r, c) - mean);
    const double sd = std::sqrt(ss / n);
    s.mean[c] = mean;
    s.stddev[c] = sd < kStdFloor ? 1.0 : sd;
  }
  return s;
}

inline Tensor standardize(const Tensor& data, const NormStats& s) {
  Tensor out(data.rows, data.cols);
  for (std::size_t r = 0; r < data.rows; ++r) {
    for (std::size_t c = 0; c < data.cols; ++c) out(r, c) = (data(r, c) - s.mean[c]) / s.stddev[c];
  }
  return out;
}

inline Tensor unstandardize(const Tensor& data, const NormStats& s) {
  Tensor out(data.rows, data.cols);
  for (std::size_t r = 0; r < data.rows; ++r) {
    for (std::size_t c = 0; c < data.cols; ++c) out(r, c) = data(r, c) * s.stddev[c] + s.mean[c];
  }
  return out;
}

// Per-element reconstruction error statistics from the training data.
struct Calibration {
  std::array<double, kNumElements> error_mean{};
  std::array<double, kNumElements> error_std{};

  double threshold(std::size_t element, double sigma) const noexcept {
    return error_mean[element] + sigma * error_std[element];
  }
  friend bool operator==(const Calibration&, const Calibration&) = default;
};

struct TrainingMetadata {
  double final_loss = 0.0;
  std::size_t epochs_run = 0;
  std::uint64_t seed = 0;
  std::size_t training_rows = 0;
  std::vector<double> epoch_losses;
  std::string input_digest;  // identifies the data + config a model was fitted on

  friend bool operator==(const TrainingMetadata&, const TrainingMetadata&) = default;
};

struct TrainedModel {
  ModelConfig config;
  NormStats norm;
  Parameters params;
  std::optional<Calibration> calibration;
  Tensor latent_reference;  // up to kLatentReferenceSize training latents
  TrainingMetadata meta;

  friend bool operator==(const TrainedModel&, const TrainedModel&) = default;
};

struct AnomalyVerdict {
  Timestamp epoch{};
  std::array<double, kNumElements> squared_error{};
  std::array<bool, kNumElements> flags{};
  double latent_knn_distance = 0.0;
  bool any_flag = false;
};

// Squared standardised reconstruction error, one row per observation.
inline Tensor reconstruction_errors(const Parameters& p, double slope, const Tensor& x_std) {
  auto fr = forward(p, slope, x_std);
  Tensor err(x_std.rows, x_std.cols);
  for (std::size_t i = 0; i < err.size(); ++i) {
    const double d = x_std.data[i] - fr.x_hat.data[i];
    err.data[i] = d * d;
  }
  return err;
}

inline Calibration error_statistics(const Tensor& err) {
  Calibration cal;
  const auto n = static_cast<double>(err.rows);
  for (std::size_t c = 0; c < kNumElements; ++c) {
    double sum = 0.0;
    for (std::size_t r = 0; r < err.rows; ++r) sum += err(r, c);
    const double mean = sum / n;
    double ss = 0.0;
    for (std::size_t r = 0; r < err.rows; ++r) ss += (err(r, c) - mean) * (err(r, c) - mean);
    cal.error_mean[c] = mean;
    cal.error_std[c] = std::max(std::sqrt(ss / n), kStdFloor);
  }
  return cal;
}

// Fits per-element (mean, std) of training reconstruction errors and stores
// them on the model. `training` is in raw element units.
inline const Calibration& calibrate_thresholds(TrainedModel& m, const Tensor& training) {
  if (training.rows == 0) throw DataError("calibration needs at least one row");
  m.calibration = error_statistics(reconstruction_errors(m.params, m.config.leaky_slope, standardize(training, m.norm)));
  return *m.calibration;
}

struct AdamState {
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  Parameters m;
  Parameters v;
  std::uint64_t step = 0;

  explicit AdamState(const Parameters& shape) : m(shape.zeros_like()), v(shape.zeros_like()) {}

  void update(Parameters& p, const Parameters& g, double lr) {
    ++step;
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
    auto pt = p.tensors();
    const auto gt = g.tensors();
    auto mt = m.tensors();
    auto vt = v.tensors();
    for (std::size_t t = 0; t < Parameters::kTensorCount; ++t) {
      auto& pd = pt[t]->data;
      const auto& gd = gt[t]->data;
      auto& md = mt[t]->data;
      auto& vd = vt[t]->data;
      for (std::size_t i = 0; i < pd.size(); ++i) {
        md[i] = kBeta1 * md[i] + (1.0 - kBeta1) * gd[i];
        vd[i] = kBeta2 * vd[i] + (1.0 - kBeta2) * gd[i] * gd[i];
        const double mhat = md[i] / bc1;
        const double vhat = vd[i] / bc2;
        pd[i] -= lr * mhat / (std::sqrt(vhat) + kEpsilon);
      }
    }
  }
};

inline Tensor gather_rows(const Tensor& src, std::span<const std::size_t> idx) {
  Tensor out(idx.size(), src.cols);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    std::copy(src.row(idx[r]).begin(), src.row(idx[r]).end(), out.row(r).begin());
  }
  return out;
}

// Trains on raw training rows (N x 6) and calibrates thresholds. Batches are
// drawn from a seeded per-epoch shuffle; the final batch may be short.
inline TrainedModel train(const Tensor& training, const ModelConfig& cfg, std::size_t min_rows = 1) {
  cfg.validate();
  if (training.rows < std::max<std::size_t>(min_rows, 1)) {
    throw DataError(fmt::format("insufficient training data: {} rows, need {}", training.rows, min_rows));
  }
  TrainedModel m;
  m.config = cfg;
  m.norm = fit_norm_stats(training);
  const Tensor x = standardize(training, m.norm);

  Rng rng(cfg.seed);
  m.params = init_parameters(cfg, rng);
  AdamState adam(m.params);

  std::vector<std::size_t> order(x.rows);
  ForwardCache cache;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    double weighted = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(start + cfg.batch_size, order.size());
      const Tensor batch = gather_rows(x, std::span<const std::size_t>(order).subspan(start, end - start));
      LossAndGradients lg;
      try {
        lg = loss_and_gradients(m.params, cfg, batch, cache);
      } catch (const ModelError& e) {
        throw ModelError(fmt::format("training diverged at epoch {} batch starting {}: {}", epoch, start, e.what()));
      }
      adam.update(m.params, lg.grad, cfg.learning_rate);
      weighted += lg.loss.total * static_cast<double>(end - start);
    }
    m.meta.epoch_losses.push_back(weighted / static_cast<double>(x.rows));
  }
  if (!m.params.all_finite()) throw ModelError("training produced non-finite weights");
  m.meta.final_loss = m.meta.epoch_losses.empty() ? 0.0 : m.meta.epoch_losses.back();
  m.meta.epochs_run = cfg.epochs;
  m.meta.seed = cfg.seed;
  m.meta.training_rows = training.rows;

  calibrate_thresholds(m, training);

  // Seeded subsample of training latents for the distance diagnostic.
  const auto latents = forward(m.params, cfg.leaky_slope, x).z;
  std::vector<std::size_t> pick(x.rows);
  std::iota(pick.begin(), pick.end(), std::size_t{0});
  if (pick.size() > kLatentReferenceSize) {
    Rng ref_rng(cfg.seed ^ 0x5eedULL);
    ref_rng.shuffle(pick);
    pick.resize(kLatentReferenceSize);
    std::sort(pick.begin(), pick.end());
  }
  m.latent_reference = gather_rows(latents, pick);
  return m;
}

namespace detail {

inline double mean_knn_distance(const Tensor& reference, std::span<const double> z, std::size_t k) {
  if (reference.rows == 0) return 0.0;
  std::vector<double> d(reference.rows);
  for (std::size_t r = 0; r < reference.rows; ++r) d[r] = euclidean(reference.row(r), z);
  const std::size_t kk = std::min(k, d.size());
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(kk), d.end());
  double s = 0.0;
  for (std::size_t i = 0; i < kk; ++i) s += d[i];
  return s / static_cast<double>(kk);
}

}  // namespace detail

// Scores raw observations (rows x 6). Each row is scored independently.
inline std::vector<AnomalyVerdict> score(const TrainedModel& m, const Tensor& raw, std::span<const Timestamp> epochs = {}) {
  if (!m.calibration) throw ModelError("model is not calibrated");
  if (raw.cols != kNumElements) throw ModelError("observations must have 6 columns");
  if (!epochs.empty() && epochs.size() != raw.rows) throw ModelError("epoch count does not match observations");
  std::vector<AnomalyVerdict> out(raw.rows);
  if (raw.rows == 0) return out;
  const Tensor x = standardize(raw, m.norm);
  const auto fr = forward(m.params, m.config.leaky_slope, x);
  for (std::size_t r = 0; r < raw.rows; ++r) {
    auto& v = out[r];
    if (!epochs.empty()) v.epoch = epochs[r];
    for (std::size_t c = 0; c < kNumElements; ++c) {
      const double d = x(r, c) - fr.x_hat(r, c);
      v.squared_error[c] = d * d;
      v.flags[c] = v.squared_error[c] > m.calibration->threshold(c, m.config.threshold_sigma);
      v.any_flag = v.any_flag || v.flags[c];
    }
    v.latent_knn_distance = detail::mean_knn_distance(m.latent_reference, fr.z.row(r), m.config.k_neighbors);
  }
  return out;
}

inline AnomalyVerdict score(const TrainedModel& m, const OrbitalElements& obs, Timestamp epoch = {}) {
  Tensor raw(1, kNumElements);
  const auto a = obs.to_array();
  std::copy(a.begin(), a.end(), raw.data.begin());
  const Timestamp e[1] = {epoch};
  return score(m, raw, e).front();
}

}  // namespace rsoanom::nn
