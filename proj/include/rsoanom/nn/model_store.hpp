#pragma once

// On-disk model container, little-endian:
//
//   magic "RSOANOMM", u32 format version
//   config     kind u8, dims/epochs/batch/k as u64, lambda/sigma/slope/lr f64, seed u64
//   norm       6 means, 6 stddevs (f64)
//   tensors    u32 count, then per tensor: u64 rows, u64 cols, rows*cols f64 (row-major)
//   calib      u8 present, 6 error means, 6 error stddevs
//   latents    one tensor (same encoding)
//   metadata   final loss f64, epochs u64, seed u64, rows u64,
//              u64 n + n f64 epoch losses, u64 len + bytes input digest

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>

#include <fmt/format.h>

#include "rsoanom/delimited.hpp"
#include "rsoanom/error.hpp"
#include "rsoanom/nn/model.hpp"

namespace rsoanom::nn {

static_assert(std::endian::native == std::endian::little, "model store assumes a little-endian host");

inline constexpr std::uint32_t kModelFormatVersion = 1;
inline constexpr std::string_view kModelMagic = "RSOANOMM";

namespace detail {

class Writer {
 public:
  template <typename T>
  void pod(T v) {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    buf_.append(b, sizeof(T));
  }
  void u64(std::size_t v) { pod(static_cast<std::uint64_t>(v)); }
  void bytes(std::string_view s) {
    u64(s.size());
    buf_.append(s);
  }
  void tensor(const Tensor& t) {
    u64(t.rows);
    u64(t.cols);
    for (double v : t.data) pod(v);
  }
  std::string take() { return std::move(buf_); }
  void raw(std::string_view s) { buf_.append(s); }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  template <typename T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::size_t u64() {
    const auto v = pod<std::uint64_t>();
    if (v > (1ULL << 40)) throw DataError("model file: implausible size field");
    return static_cast<std::size_t>(v);
  }
  std::string bytes() {
    const auto n = u64();
    need(n);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  Tensor tensor() {
    Tensor t;
    t.rows = u64();
    t.cols = u64();
    need(t.rows * t.cols * sizeof(double));
    t.data.resize(t.rows * t.cols);
    for (double& v : t.data) v = pod<double>();
    return t;
  }
  std::string_view raw(std::size_t n) {
    need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const noexcept { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw DataError("model file truncated");
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_model(const TrainedModel& m) {
  detail::Writer w;
  w.raw(kModelMagic);
  w.pod(kModelFormatVersion);
  const auto& c = m.config;
  w.pod(static_cast<std::uint8_t>(c.kind));
  for (auto v : {c.input_dim, c.hidden_dim, c.latent_dim, c.epochs, c.batch_size, c.k_neighbors}) w.u64(v);
  for (double v : {c.lambda_anchor, c.threshold_sigma, c.leaky_slope, c.learning_rate}) w.pod(v);
  w.pod(c.seed);
  for (double v : m.norm.mean) w.pod(v);
  for (double v : m.norm.stddev) w.pod(v);
  const auto ts = m.params.tensors();
  w.pod(static_cast<std::uint32_t>(ts.size()));
  for (const auto* t : ts) w.tensor(*t);
  w.pod(static_cast<std::uint8_t>(m.calibration ? 1 : 0));
  const Calibration cal = m.calibration.value_or(Calibration{});
  for (double v : cal.error_mean) w.pod(v);
  for (double v : cal.error_std) w.pod(v);
  w.tensor(m.latent_reference);
  w.pod(m.meta.final_loss);
  w.u64(m.meta.epochs_run);
  w.pod(m.meta.seed);
  w.u64(m.meta.training_rows);
  w.u64(m.meta.epoch_losses.size());
  for (double v : m.meta.epoch_losses) w.pod(v);
  w.bytes(m.meta.input_digest);
  return w.take();
}

inline TrainedModel deserialize_model(std::string_view data) {
  detail::Reader r(data);
  if (r.raw(kModelMagic.size()) != kModelMagic) throw DataError("not a model file (bad magic)");
  const auto version = r.pod<std::uint32_t>();
  if (version != kModelFormatVersion) {
    throw DataError(fmt::format("unsupported model format version {} (expected {})", version, kModelFormatVersion));
  }
  TrainedModel m;
  auto& c = m.config;
  const auto kind = r.pod<std::uint8_t>();
  if (kind > 1) throw DataError("model file: unknown model kind");
  c.kind = static_cast<ModelKind>(kind);
  c.input_dim = r.u64();
  c.hidden_dim = r.u64();
  c.latent_dim = r.u64();
  c.epochs = r.u64();
  c.batch_size = r.u64();
  c.k_neighbors = r.u64();
  c.lambda_anchor = r.pod<double>();
  c.threshold_sigma = r.pod<double>();
  c.leaky_slope = r.pod<double>();
  c.learning_rate = r.pod<double>();
  c.seed = r.pod<std::uint64_t>();
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw DataError(fmt::format("model file: {}", e.what()));
  }
  for (double& v : m.norm.mean) v = r.pod<double>();
  for (double& v : m.norm.stddev) v = r.pod<double>();
  m.params = make_parameters(c.input_dim, c.hidden_dim, c.latent_dim);
  const auto count = r.pod<std::uint32_t>();
  if (count != Parameters::kTensorCount) throw DataError("model file: unexpected tensor count");
  for (auto* t : m.params.tensors()) {
    auto loaded = r.tensor();
    if (loaded.rows != t->rows || loaded.cols != t->cols) throw DataError("model file: tensor shape mismatch");
    *t = std::move(loaded);
  }
  if (!m.params.all_finite()) throw DataError("model file: non-finite weights");
  const bool calibrated = r.pod<std::uint8_t>() != 0;
  Calibration cal;
  for (double& v : cal.error_mean) v = r.pod<double>();
  for (double& v : cal.error_std) v = r.pod<double>();
  if (calibrated) m.calibration = cal;
  m.latent_reference = r.tensor();
  if (m.latent_reference.rows > 0 && m.latent_reference.cols != c.latent_dim) {
    throw DataError("model file: latent reference has wrong width");
  }
  m.meta.final_loss = r.pod<double>();
  m.meta.epochs_run = r.u64();
  m.meta.seed = r.pod<std::uint64_t>();
  m.meta.training_rows = r.u64();
  m.meta.epoch_losses.resize(r.u64());
  for (double& v : m.meta.epoch_losses) v = r.pod<double>();
  m.meta.input_digest = r.bytes();
  if (!r.done()) throw DataError("model file: trailing bytes");
  return m;
}

inline void save_model(const TrainedModel& m, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_model(m));
}

inline TrainedModel load_model(const std::filesystem::path& path) {
  try {
    return deserialize_model(read_text_file(path));
  } catch (const DataError& e) {
    throw DataError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace rsoanom::nn
