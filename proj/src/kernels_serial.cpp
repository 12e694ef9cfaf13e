#include <algorithm>
#include <numeric>
#include <vector>

#include "adagc/kernels.hpp"

namespace adagc::kernels {

double average_precision_strided(std::size_t rows, std::size_t stride, const double* scores,
                                 const double* labels) {
  std::vector<std::size_t> order(rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a * stride] > scores[b * stride];
  });
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t k = 0; k < rows; ++k) {
    if (labels[order[k] * stride] > 0.5) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
  }
  if (hits == 0) return -1.0;
  return sum / static_cast<double>(hits);
}

namespace serial {

void affine_forward(AffineShape s, std::span<const double> in, std::span<const double> weights,
                    std::span<const double> bias, std::span<double> out) {
  for (std::size_t r = 0; r < s.rows; ++r) {
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
  for (std::size_t o = 0; o < s.fan_out; ++o) {
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
  for (std::size_t r = 0; r < s.rows; ++r) {
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
  for (std::size_t c = 0; c < cols; ++c)
    ap[c] = average_precision_strided(rows, cols, scores.data() + c, labels.data() + c);
}

}  // namespace serial
}  // namespace adagc::kernels
