#pragma once

// Symmetric dense autoencoder:
//
//   x (6) -> Dense(6, H) -> LayerNorm -> LeakyReLU -> Dense(H, L) = z
//   z (L) -> Dense(L, H) -> LayerNorm -> LeakyReLU -> Dense(H, 6) = x_hat
//
// Layer normalisation is per sample across features, so a row's output does
// not depend on which other rows share its batch.

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <fmt/format.h>

#include "rsoanom/error.hpp"
#include "rsoanom/nn/anchor_loss.hpp"
#include "rsoanom/nn/config.hpp"
#include "rsoanom/nn/tensor.hpp"
#include "rsoanom/rng.hpp"

namespace rsoanom::nn {

inline constexpr double kLayerNormEps = 1e-5;

// Weight matrices are (out x in); vectors are (1 x n).
struct Parameters {
  Tensor enc1_w, enc1_b, ln1_gain, ln1_offset;
  Tensor enc2_w, enc2_b;
  Tensor dec1_w, dec1_b, ln2_gain, ln2_offset;
  Tensor dec2_w, dec2_b;

  static constexpr std::size_t kTensorCount = 12;

  std::array<Tensor*, kTensorCount> tensors() {
    return {&enc1_w, &enc1_b, &ln1_gain, &ln1_offset, &enc2_w, &enc2_b,
            &dec1_w, &dec1_b, &ln2_gain, &ln2_offset, &dec2_w, &dec2_b};
  }
  std::array<const Tensor*, kTensorCount> tensors() const {
    return {&enc1_w, &enc1_b, &ln1_gain, &ln1_offset, &enc2_w, &enc2_b,
            &dec1_w, &dec1_b, &ln2_gain, &ln2_offset, &dec2_w, &dec2_b};
  }

  std::size_t hidden_dim() const noexcept { return enc1_w.rows; }
  std::size_t latent_dim() const noexcept { return enc2_w.rows; }
  std::size_t input_dim() const noexcept { return enc1_w.cols; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto* t : tensors()) n += t->size();
    return n;
  }

  bool all_finite() const {
    for (const auto* t : tensors()) {
      for (double v : t->data) {
        if (!std::isfinite(v)) return false;
      }
    }
    return true;
  }

  // Same shapes, all zeros. Used for gradient accumulators and moments.
  Parameters zeros_like() const {
    Parameters p = *this;
    for (auto* t : p.tensors()) t->zero();
    return p;
  }

  friend bool operator==(const Parameters&, const Parameters&) = default;
};

inline Parameters make_parameters(std::size_t input, std::size_t hidden, std::size_t latent) {
  Parameters p;
  p.enc1_w = Tensor(hidden, input);
  p.enc1_b = Tensor(1, hidden);
  p.ln1_gain = Tensor(1, hidden, 1.0);
  p.ln1_offset = Tensor(1, hidden);
  p.enc2_w = Tensor(latent, hidden);
  p.enc2_b = Tensor(1, latent);
  p.dec1_w = Tensor(hidden, latent);
  p.dec1_b = Tensor(1, hidden);
  p.ln2_gain = Tensor(1, hidden, 1.0);
  p.ln2_offset = Tensor(1, hidden);
  p.dec2_w = Tensor(input, hidden);
  p.dec2_b = Tensor(1, input);
  return p;
}

// Glorot-uniform weights, zero biases, unit gains.
inline Parameters init_parameters(const ModelConfig& cfg, Rng& rng) {
  auto p = make_parameters(cfg.input_dim, cfg.hidden_dim, cfg.latent_dim);
  for (Tensor* w : {&p.enc1_w, &p.enc2_w, &p.dec1_w, &p.dec2_w}) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w->rows + w->cols));
    for (double& v : w->data) v = rng.uniform(-limit, limit);
  }
  return p;
}

namespace detail {

inline void dense_forward(const Tensor& w, const Tensor& b, std::span<const double> in, std::span<double> out) {
  for (std::size_t o = 0; o < w.rows; ++o) {
    double s = b.data[o];
    const auto wr = w.row(o);
    for (std::size_t i = 0; i < w.cols; ++i) s += wr[i] * in[i];
    out[o] = s;
  }
}

// out = gain * (a - mean) / sqrt(var + eps) + offset; stores the normalised
// values and the inverse deviation for the backward pass.
inline void layer_norm_forward(const Tensor& gain, const Tensor& offset, std::span<const double> a,
                               std::span<double> normed, double& inv_std, std::span<double> out) {
  const auto n = static_cast<double>(a.size());
  double mean = 0.0;
  for (double v : a) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : a) var += (v - mean) * (v - mean);
  var /= n;
  inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
  for (std::size_t i = 0; i < a.size(); ++i) {
    normed[i] = (a[i] - mean) * inv_std;
    out[i] = gain.data[i] * normed[i] + offset.data[i];
  }
}

inline double leaky(double x, double slope) noexcept { return x > 0.0 ? x : slope * x; }

}  // namespace detail

// Per-batch activations retained for backpropagation.
struct ForwardCache {
  std::size_t batch = 0;
  Tensor a1, n1, y1, h1;  // B x H
  std::vector<double> inv1;
  Tensor z;               // B x L
  Tensor a3, n3, y3, h3;  // B x H
  std::vector<double> inv3;
  Tensor x_hat;           // B x 6

  void resize(std::size_t b, std::size_t in, std::size_t hidden, std::size_t latent) {
    if (batch == b && z.cols == latent && a1.cols == hidden && x_hat.cols == in) return;
    batch = b;
    for (Tensor* t : {&a1, &n1, &y1, &h1, &a3, &n3, &y3, &h3}) *t = Tensor(b, hidden);
    z = Tensor(b, latent);
    x_hat = Tensor(b, in);
    inv1.assign(b, 0.0);
    inv3.assign(b, 0.0);
  }
};

inline void forward(const Parameters& p, double slope, const Tensor& x, ForwardCache& c) {
  if (x.cols != p.input_dim()) {
    throw ModelError(fmt::format("input has {} columns, model expects {}", x.cols, p.input_dim()));
  }
  if (x.rows == 0) throw ModelError("empty batch");
  const std::size_t h = p.hidden_dim();
  c.resize(x.rows, p.input_dim(), h, p.latent_dim());
  for (std::size_t r = 0; r < x.rows; ++r) {
    detail::dense_forward(p.enc1_w, p.enc1_b, x.row(r), c.a1.row(r));
    detail::layer_norm_forward(p.ln1_gain, p.ln1_offset, c.a1.row(r), c.n1.row(r), c.inv1[r], c.y1.row(r));
    for (std::size_t i = 0; i < h; ++i) c.h1(r, i) = detail::leaky(c.y1(r, i), slope);
    detail::dense_forward(p.enc2_w, p.enc2_b, c.h1.row(r), c.z.row(r));
    detail::dense_forward(p.dec1_w, p.dec1_b, c.z.row(r), c.a3.row(r));
    detail::layer_norm_forward(p.ln2_gain, p.ln2_offset, c.a3.row(r), c.n3.row(r), c.inv3[r], c.y3.row(r));
    for (std::size_t i = 0; i < h; ++i) c.h3(r, i) = detail::leaky(c.y3(r, i), slope);
    detail::dense_forward(p.dec2_w, p.dec2_b, c.h3.row(r), c.x_hat.row(r));
  }
}

struct ForwardResult {
  Tensor z;
  Tensor x_hat;
};

inline ForwardResult forward(const Parameters& p, double slope, const Tensor& x) {
  ForwardCache c;
  forward(p, slope, x, c);
  return {std::move(c.z), std::move(c.x_hat)};
}

// Mean squared error over all batch entries and features.
inline double reconstruction_loss(const Tensor& x, const Tensor& x_hat) {
  if (x.rows != x_hat.rows || x.cols != x_hat.cols) throw ModelError("reconstruction shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x_hat.data[i] - x.data[i];
    s += d * d;
  }
  return s / static_cast<double>(x.size());
}

struct LossTerms {
  double reconstruction = 0.0;
  double anchor = 0.0;
  double total = 0.0;
};

inline LossTerms total_loss(const Tensor& x, const Tensor& x_hat, const Tensor& z, const ModelConfig& cfg) {
  if (z.rows != x.rows) throw ModelError("latent batch does not match input batch");
  LossTerms t;
  t.reconstruction = reconstruction_loss(x, x_hat);
  if (cfg.kind == ModelKind::kAnchor) t.anchor = anchor_loss(z, cfg.k_neighbors);
  t.total = t.reconstruction + cfg.anchor_weight() * t.anchor;
  return t;
}

namespace detail {

// Given dout for a dense layer, accumulate weight/bias gradients and write
// the input gradient.
inline void dense_backward(const Tensor& w, std::span<const double> in, std::span<const double> dout, Tensor& dw,
                           Tensor& db, std::span<double> din) {
  std::fill(din.begin(), din.end(), 0.0);
  for (std::size_t o = 0; o < w.rows; ++o) {
    const double g = dout[o];
    db.data[o] += g;
    auto dwr = dw.row(o);
    const auto wr = w.row(o);
    for (std::size_t i = 0; i < w.cols; ++i) {
      dwr[i] += g * in[i];
      din[i] += g * wr[i];
    }
  }
}

inline void layer_norm_backward(const Tensor& gain, std::span<const double> normed, double inv_std,
                                std::span<const double> dy, Tensor& dgain, Tensor& doffset, std::span<double> da) {
  const std::size_t n = normed.size();
  double mean_dn = 0.0;
  double mean_dn_n = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    dgain.data[i] += dy[i] * normed[i];
    doffset.data[i] += dy[i];
    const double dn = dy[i] * gain.data[i];
    mean_dn += dn;
    mean_dn_n += dn * normed[i];
  }
  mean_dn /= static_cast<double>(n);
  mean_dn_n /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double dn = dy[i] * gain.data[i];
    da[i] = inv_std * (dn - mean_dn - normed[i] * mean_dn_n);
  }
}

}  // namespace detail

struct LossAndGradients {
  LossTerms loss;
  Parameters grad;
};

// Loss of one batch and its exact gradient with the nearest-neighbour
// assignment held fixed for the step.
inline LossAndGradients loss_and_gradients(const Parameters& p, const ModelConfig& cfg, const Tensor& x,
                                           ForwardCache& c) {
  forward(p, cfg.leaky_slope, x, c);
  const std::size_t b = x.rows;
  const std::size_t h = p.hidden_dim();
  const std::size_t l = p.latent_dim();
  const std::size_t d = p.input_dim();

  LossAndGradients out;
  out.loss.reconstruction = reconstruction_loss(x, c.x_hat);
  NeighborAssignment nb;
  if (cfg.kind == ModelKind::kAnchor) {
    nb = assign_neighbors(c.z, cfg.k_neighbors);
    out.loss.anchor = anchor_loss(nb, b);
  }
  out.loss.total = out.loss.reconstruction + cfg.anchor_weight() * out.loss.anchor;
  if (!std::isfinite(out.loss.total)) throw ModelError("non-finite loss");

  out.grad = p.zeros_like();
  auto& g = out.grad;

  Tensor dz(b, l);
  if (cfg.kind == ModelKind::kAnchor) anchor_loss_backward(c.z, nb, cfg.anchor_weight(), dz);

  const double mse_scale = 2.0 / static_cast<double>(b * d);
  std::vector<double> dxh(d), dh(h), dy(h), da(h), dzr(l), dx(d);
  for (std::size_t r = 0; r < b; ++r) {
    for (std::size_t i = 0; i < d; ++i) dxh[i] = mse_scale * (c.x_hat(r, i) - x(r, i));
    detail::dense_backward(p.dec2_w, c.h3.row(r), dxh, g.dec2_w, g.dec2_b, dh);
    for (std::size_t i = 0; i < h; ++i) dy[i] = c.y3(r, i) > 0.0 ? dh[i] : cfg.leaky_slope * dh[i];
    detail::layer_norm_backward(p.ln2_gain, c.n3.row(r), c.inv3[r], dy, g.ln2_gain, g.ln2_offset, da);
    detail::dense_backward(p.dec1_w, c.z.row(r), da, g.dec1_w, g.dec1_b, dzr);
    for (std::size_t i = 0; i < l; ++i) dzr[i] += dz(r, i);
    detail::dense_backward(p.enc2_w, c.h1.row(r), dzr, g.enc2_w, g.enc2_b, dh);
    for (std::size_t i = 0; i < h; ++i) dy[i] = c.y1(r, i) > 0.0 ? dh[i] : cfg.leaky_slope * dh[i];
    detail::layer_norm_backward(p.ln1_gain, c.n1.row(r), c.inv1[r], dy, g.ln1_gain, g.ln1_offset, da);
    detail::dense_backward(p.enc1_w, x.row(r), da, g.enc1_w, g.enc1_b, dx);
  }
  return out;
}

inline LossAndGradients loss_and_gradients(const Parameters& p, const ModelConfig& cfg, const Tensor& x) {
  ForwardCache c;
  return loss_and_gradients(p, cfg, x, c);
}

}  // namespace rsoanom::nn
