#include <gtest/gtest.h>

#include <cmath>

#include "rsoanom/nn/autoencoder.hpp"

namespace rsoanom::nn {
namespace {

Tensor random_batch(Rng& rng, std::size_t b) {
  Tensor x(b, 6);
  for (double& v : x.data) v = rng.normal();
  return x;
}

ModelConfig small_config(ModelKind kind) {
  ModelConfig cfg;
  cfg.kind = kind;
  cfg.hidden_dim = 8;
  cfg.latent_dim = 3;
  cfg.batch_size = 8;
  cfg.lambda_anchor = 0.3;
  return cfg;
}

TEST(Autoencoder, Shapes) {
  Rng rng(1);
  const auto cfg = small_config(ModelKind::kAnchor);
  const auto p = init_parameters(cfg, rng);
  EXPECT_EQ(p.parameter_count(), 8u * 6 + 8 + 8 + 8 + 3u * 8 + 3 + 8u * 3 + 8 + 8 + 8 + 6u * 8 + 6);
  const auto fr = forward(p, cfg.leaky_slope, random_batch(rng, 5));
  EXPECT_EQ(fr.z.rows, 5u);
  EXPECT_EQ(fr.z.cols, 3u);
  EXPECT_EQ(fr.x_hat.rows, 5u);
  EXPECT_EQ(fr.x_hat.cols, 6u);
}

TEST(Autoencoder, WrongInputWidthIsModelError) {
  Rng rng(1);
  const auto p = init_parameters(small_config(ModelKind::kPlain), rng);
  EXPECT_THROW(forward(p, 0.2, Tensor(2, 5)), ModelError);
  EXPECT_THROW(forward(p, 0.2, Tensor(0, 6)), ModelError);
}

TEST(Autoencoder, GlorotBounds) {
  Rng rng(2);
  ModelConfig cfg;
  cfg.hidden_dim = 64;
  const auto p = init_parameters(cfg, rng);
  const double limit = std::sqrt(6.0 / 70.0);
  for (double v : p.enc1_w.data) EXPECT_LE(std::abs(v), limit);
  for (double v : p.enc1_b.data) EXPECT_EQ(v, 0.0);
  for (double v : p.ln1_gain.data) EXPECT_EQ(v, 1.0);
}

TEST(Autoencoder, RowsAreIndependentOfBatch) {
  Rng rng(3);
  const auto cfg = small_config(ModelKind::kAnchor);
  const auto p = init_parameters(cfg, rng);
  const auto x = random_batch(rng, 6);
  const auto full = forward(p, cfg.leaky_slope, x);
  for (std::size_t r = 0; r < x.rows; ++r) {
    Tensor one(1, 6);
    std::copy(x.row(r).begin(), x.row(r).end(), one.data.begin());
    const auto single = forward(p, cfg.leaky_slope, one);
    for (std::size_t c = 0; c < 6; ++c) EXPECT_DOUBLE_EQ(single.x_hat(0, c), full.x_hat(r, c));
  }
}

TEST(Autoencoder, LayerNormOutputIsNormalised) {
  Rng rng(4);
  const auto cfg = small_config(ModelKind::kPlain);
  const auto p = init_parameters(cfg, rng);
  ForwardCache c;
  forward(p, cfg.leaky_slope, random_batch(rng, 4), c);
  for (std::size_t r = 0; r < 4; ++r) {
    double mean = 0.0, var = 0.0;
    for (double v : c.n1.row(r)) mean += v;
    mean /= 8.0;
    for (double v : c.n1.row(r)) var += (v - mean) * (v - mean);
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(var / 8.0, 1.0, 1e-3);
  }
}

TEST(Autoencoder, TotalLossCombinesTerms) {
  Rng rng(5);
  auto cfg = small_config(ModelKind::kAnchor);
  const auto p = init_parameters(cfg, rng);
  const auto x = random_batch(rng, 8);
  const auto fr = forward(p, cfg.leaky_slope, x);
  const auto t = total_loss(x, fr.x_hat, fr.z, cfg);
  EXPECT_DOUBLE_EQ(t.total, t.reconstruction + 0.3 * t.anchor);
  EXPECT_GT(t.anchor, 0.0);
  cfg.kind = ModelKind::kPlain;
  const auto plain = total_loss(x, fr.x_hat, fr.z, cfg);
  EXPECT_DOUBLE_EQ(plain.total, t.reconstruction);
  EXPECT_EQ(plain.anchor, 0.0);
}

void check_gradients(ModelKind kind, std::uint64_t seed) {
  Rng rng(seed);
  const auto cfg = small_config(kind);
  auto p = init_parameters(cfg, rng);
  // Non-trivial gains and offsets so every path is exercised.
  for (Tensor* t : {&p.ln1_gain, &p.ln1_offset, &p.ln2_gain, &p.ln2_offset, &p.enc1_b, &p.dec2_b}) {
    for (double& v : t->data) v += 0.3 * rng.normal();
  }
  const auto x = random_batch(rng, 7);
  const auto lg = loss_and_gradients(p, cfg, x);
  const auto nb = assign_neighbors(forward(p, cfg.leaky_slope, x).z, cfg.k_neighbors);

  // Loss with the neighbour assignment frozen at the unperturbed point.
  auto frozen_loss = [&](const Parameters& q) {
    const auto fr = forward(q, cfg.leaky_slope, x);
    double l = reconstruction_loss(x, fr.x_hat);
    if (kind == ModelKind::kAnchor) {
      NeighborAssignment f = nb;
      for (std::size_t i = 0; i < fr.z.rows; ++i) {
        for (std::size_t n = 0; n < f.k; ++n) {
          f.distance[i * f.k + n] = euclidean(fr.z.row(i), fr.z.row(f.index[i * f.k + n]));
        }
      }
      l += cfg.anchor_weight() * anchor_loss(f, fr.z.rows);
    }
    return l;
  };
  EXPECT_NEAR(frozen_loss(p), lg.loss.total, 1e-12);

  const double h = 1e-6;
  auto pt = p.tensors();
  const auto gt = lg.grad.tensors();
  for (std::size_t t = 0; t < Parameters::kTensorCount; ++t) {
    for (std::size_t i = 0; i < pt[t]->size(); ++i) {
      const double orig = pt[t]->data[i];
      pt[t]->data[i] = orig + h;
      const double up = frozen_loss(p);
      pt[t]->data[i] = orig - h;
      const double down = frozen_loss(p);
      pt[t]->data[i] = orig;
      const double fd = (up - down) / (2 * h);
      ASSERT_NEAR(gt[t]->data[i], fd, 1e-6 + 1e-4 * std::abs(fd)) << "tensor " << t << " index " << i;
    }
  }
}

TEST(Gradients, PlainMatchesFiniteDifferences) {
  for (std::uint64_t s = 10; s < 13; ++s) check_gradients(ModelKind::kPlain, s);
}

TEST(Gradients, AnchorMatchesFiniteDifferences) {
  for (std::uint64_t s = 20; s < 23; ++s) check_gradients(ModelKind::kAnchor, s);
}

TEST(Gradients, ZeroLambdaAnchorEqualsPlain) {
  Rng rng(30);
  auto anchor = small_config(ModelKind::kAnchor);
  anchor.lambda_anchor = 0.0;
  const auto p = init_parameters(anchor, rng);
  const auto x = random_batch(rng, 8);
  const auto a = loss_and_gradients(p, anchor, x);
  const auto b = loss_and_gradients(p, small_config(ModelKind::kPlain), x);
  EXPECT_EQ(a.grad, b.grad);
  EXPECT_EQ(a.loss.total, b.loss.total);
}

TEST(Gradients, NonFiniteInputIsModelError) {
  Rng rng(31);
  const auto cfg = small_config(ModelKind::kPlain);
  const auto p = init_parameters(cfg, rng);
  auto x = random_batch(rng, 4);
  x(1, 2) = std::nan("");
  EXPECT_THROW(loss_and_gradients(p, cfg, x), ModelError);
}

}  // namespace
}  // namespace rsoanom::nn
