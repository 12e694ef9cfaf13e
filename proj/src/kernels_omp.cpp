#include <algorithm>
#include <cstdint>

#include "adagc/kernels.hpp"

// Loops are split only along dimensions whose iterations write disjoint
// outputs; every reduction keeps the serial accumulation order.

namespace adagc::kernels::omp {

void affine_forward(AffineShape s, std::span<const double> in, std::span<const double> weights,
                    std::span<const double> bias, std::span<double> out) {
  const auto rows = static_cast<std::int64_t>(s.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* x = in.data() + r * s.fan_in;
    double* y = out.data() + r * s.fan_out;
    for (std::size_t o = 0; o < s.fan_out; ++o) {
      const double* w = weights.data() + o * s.fan_in;
      double acc = bias[o];
      for (std::size_t i = 0; i < s.fan_in; ++i) acc += w[i] * x[i];
      y[o] = acc;
    }
  }
}

void affine_backward_params(AffineShape s, std::span<const double> d_out,
                            std::span<const double> in, std::span<double> grad_w,
                            std::span<double> grad_b) {
  const auto fan_out = static_cast<std::int64_t>(s.fan_out);
#pragma omp parallel for schedule(static)
  for (std::int64_t o = 0; o < fan_out; ++o) {
    double* gw = grad_w.data() + o * s.fan_in;
    std::fill(gw, gw + s.fan_in, 0.0);
    double gb = 0.0;
    for (std::size_t r = 0; r < s.rows; ++r) {
      const double g = d_out[r * s.fan_out + o];
      const double* x = in.data() + r * s.fan_in;
      for (std::size_t i = 0; i < s.fan_in; ++i) gw[i] += g * x[i];
      gb += g;
    }
    grad_b[o] = gb;
  }
}

void affine_backward_input(AffineShape s, std::span<const double> d_out,
                           std::span<const double> weights, std::span<double> d_in) {
  const auto rows = static_cast<std::int64_t>(s.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) {
    double* dx = d_in.data() + r * s.fan_in;
    std::fill(dx, dx + s.fan_in, 0.0);
    for (std::size_t o = 0; o < s.fan_out; ++o) {
      const double g = d_out[r * s.fan_out + o];
      const double* w = weights.data() + o * s.fan_in;
      for (std::size_t i = 0; i < s.fan_in; ++i) dx[i] += g * w[i];
    }
  }
}

void average_precision_columns(std::size_t rows, std::size_t cols,
                               std::span<const double> scores, std::span<const double> labels,
                               std::span<double> ap) {
  const auto n_cols = static_cast<std::int64_t>(cols);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t c = 0; c < n_cols; ++c)
    ap[c] = average_precision_strided(rows, cols, scores.data() + c, labels.data() + c);
}

}  // namespace adagc::kernels::omp
