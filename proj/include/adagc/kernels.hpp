#pragma once

// Data-parallel inner loops. Each kernel exists as a serial reference and an
// OpenMP version; both accumulate in the same order, so their outputs are
// bitwise identical for any thread count.

#include <cstddef>
#include <span>

namespace adagc::kernels {

struct AffineShape {
  std::size_t rows;  // batch size
  std::size_t fan_in;
  std::size_t fan_out;
};

/// AP of one ranking: descending score, ties by ascending index. Returns -1
/// when the labels contain no positive (labels > 0.5 count as positive).
double average_precision_strided(std::size_t rows, std::size_t stride, const double* scores,
                                 const double* labels);

namespace serial {

// out(n x fan_out) = in(n x fan_in) * W^T + b, with W stored fan_out x fan_in.
void affine_forward(AffineShape shape, std::span<const double> in,
                    std::span<const double> weights, std::span<const double> bias,
                    std::span<double> out);

// grad_w = d_out^T * in and grad_b = column sums of d_out; both overwritten.
void affine_backward_params(AffineShape shape, std::span<const double> d_out,
                            std::span<const double> in, std::span<double> grad_w,
                            std::span<double> grad_b);

// d_in = d_out * W
void affine_backward_input(AffineShape shape, std::span<const double> d_out,
                           std::span<const double> weights, std::span<double> d_in);

// Per-column AP; -1 marks a column without positives.
void average_precision_columns(std::size_t rows, std::size_t cols,
                               std::span<const double> scores, std::span<const double> labels,
                               std::span<double> ap);

}  // namespace serial

namespace omp {

void affine_forward(AffineShape shape, std::span<const double> in,
                    std::span<const double> weights, std::span<const double> bias,
                    std::span<double> out);
void affine_backward_params(AffineShape shape, std::span<const double> d_out,
                            std::span<const double> in, std::span<double> grad_w,
                            std::span<double> grad_b);
void affine_backward_input(AffineShape shape, std::span<const double> d_out,
                           std::span<const double> weights, std::span<double> d_in);
void average_precision_columns(std::size_t rows, std::size_t cols,
                               std::span<const double> scores, std::span<const double> labels,
                               std::span<double> ap);

}  // namespace omp

}  // namespace adagc::kernels
