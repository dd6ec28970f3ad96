#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <utility>
#include <vector>

#include "rsoanom/nn/tensor.hpp"

namespace rsoanom::nn {

inline double euclidean(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// For every row i of Z, its k nearest other rows (self excluded) ordered by
// (distance, index). k is clamped to B - 1.
struct NeighborAssignment {
  std::size_t k = 0;
  std::vector<std::size_t> index;  // B x k
  std::vector<double> distance;    // B x k
};

inline NeighborAssignment assign_neighbors(const Tensor& z, std::size_t k) {
  NeighborAssignment out;
  const std::size_t b = z.rows;
  if (b < 2) return out;
  out.k = std::min(k, b - 1);
  out.index.resize(b * out.k);
  out.distance.resize(b * out.k);

  std::vector<double> dist(b * b, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = i + 1; j < b; ++j) {
      const double d = euclidean(z.row(i), z.row(j));
      dist[i * b + j] = d;
      dist[j * b + i] = d;
    }
  }
  std::vector<std::size_t> order(b);
  for (std::size_t i = 0; i < b; ++i) {
    order.clear();
    for (std::size_t j = 0; j < b; ++j) {
      if (j != i) order.push_back(j);
    }
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(out.k), order.end(),
                      [&](std::size_t a, std::size_t c) {
                        const double da = dist[i * b + a];
                        const double dc = dist[i * b + c];
                        return da != dc ? da < dc : a < c;
                      });
    for (std::size_t n = 0; n < out.k; ++n) {
      out.index[i * out.k + n] = order[n];
      out.distance[i * out.k + n] = dist[i * b + order[n]];
    }
  }
  return out;
}

// Mean over rows of the mean distance to each row's k nearest neighbours.
// Batches with fewer than two rows contribute zero.
inline double anchor_loss(const NeighborAssignment& nb, std::size_t batch) {
  if (batch < 2 || nb.k == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    double row_sum = 0.0;
    for (std::size_t n = 0; n < nb.k; ++n) row_sum += nb.distance[i * nb.k + n];
    total += row_sum / static_cast<double>(nb.k);
  }
  return total / static_cast<double>(batch);
}

inline double anchor_loss(const Tensor& z, std::size_t k) { return anchor_loss(assign_neighbors(z, k), z.rows); }

// Accumulates scale * dL_anchor/dZ into dz with the neighbour assignment held
// fixed. Each distance term pulls on both endpoints; coincident points
// contribute no gradient.
inline void anchor_loss_backward(const Tensor& z, const NeighborAssignment& nb, double scale, Tensor& dz) {
  const std::size_t b = z.rows;
  if (b < 2 || nb.k == 0 || scale == 0.0) return;
  const double w = scale / (static_cast<double>(b) * static_cast<double>(nb.k));
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t n = 0; n < nb.k; ++n) {
      const std::size_t j = nb.index[i * nb.k + n];
      const double d = nb.distance[i * nb.k + n];
      if (d <= 0.0) continue;
      const double c = w / d;
      for (std::size_t f = 0; f < z.cols; ++f) {
        const double g = c * (z(i, f) - z(j, f));
        dz(i, f) += g;
        dz(j, f) -= g;
      }
    }
  }
}

}  // namespace rsoanom::nn
