#pragma once

#include <cstddef>
#include <cstdint>

#include <fmt/format.h>

#include "rsoanom/error.hpp"

namespace rsoanom::nn {

// kPlain never evaluates the anchor term; kAnchor evaluates it and scales
// by lambda_anchor (so lambda 0 reduces to the plain objective).
enum class ModelKind : std::uint8_t { kAnchor = 0, kPlain = 1 };

struct ModelConfig {
  ModelKind kind = ModelKind::kAnchor;
  std::size_t input_dim = 6;
  std::size_t hidden_dim = 16;
  std::size_t latent_dim = 5;
  std::size_t epochs = 150;
  std::size_t batch_size = 16;
  double lambda_anchor = 0.1;
  std::size_t k_neighbors = 3;
  double threshold_sigma = 1.5;
  double leaky_slope = 0.2;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;

  void validate() const {
    if (input_dim != 6) throw ConfigError("input_dim must be 6");
    if (hidden_dim == 0 || latent_dim == 0 || epochs == 0 || batch_size == 0 || k_neighbors == 0) {
      throw ConfigError("hidden_dim, latent_dim, epochs, batch_size and k_neighbors must be positive");
    }
    if (latent_dim >= input_dim) {
      throw ConfigError(fmt::format("latent_dim {} must be smaller than input_dim {}", latent_dim, input_dim));
    }
    if (k_neighbors >= batch_size) {
      throw ConfigError(fmt::format("k_neighbors {} must be smaller than batch_size {}", k_neighbors, batch_size));
    }
    if (!(lambda_anchor >= 0.0)) throw ConfigError("lambda_anchor must be non-negative");
    if (!(threshold_sigma > 0.0)) throw ConfigError("threshold_sigma must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  }

  // Effective anchor weight: zero for the plain autoencoder.
  double anchor_weight() const noexcept { return kind == ModelKind::kPlain ? 0.0 : lambda_anchor; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

}  // namespace rsoanom::nn
