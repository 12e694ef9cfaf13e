#pragma once

// Dense row-major matrices, seeded randomness and a small multilayer
// perceptron with hand-written forward and backward passes.

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "adagc/error.hpp"

namespace adagc {

class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  bool all_finite() const noexcept;
  bool same_shape(const DenseMatrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  // Rows picked by index, in the given order.
  DenseMatrix gather_rows(std::span<const std::size_t> indices) const;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, std::string_view what);

/// Deterministic random source. Distributions are constructed per draw so the
/// engine state alone captures the generator (needed for checkpoint resume).
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  double uniform();                           // [0, 1)
  double uniform(double lo, double hi);       // [lo, hi)
  std::size_t uniform_index(std::size_t n);   // {0, ..., n-1}
  double normal(double mean = 0.0, double stddev = 1.0);
  double gamma(double shape);
  double beta(double a, double b);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(i)]);
  }

  std::string save_state() const;
  void load_state(const std::string& state);

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

enum class Activation { identity, tanh };

/// Fully connected network with at most one hidden layer. Parameters are kept
/// in one flat vector; each layer stores its (fan_out x fan_in) weight block
/// followed by its fan_out biases.
struct MlpModel {
  std::vector<std::size_t> layer_sizes;  // {input, [hidden], output}
  std::vector<double> params;
  Activation hidden_activation = Activation::tanh;

  static std::size_t parameter_count(std::span<const std::size_t> layer_sizes);

  /// Uniform on [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  static MlpModel create(std::vector<std::size_t> layer_sizes, SeededRng& rng,
                         Activation hidden = Activation::tanh);
  static MlpModel zeros(std::vector<std::size_t> layer_sizes,
                        Activation hidden = Activation::tanh);

  std::size_t input_size() const { return layer_sizes.front(); }
  std::size_t output_size() const { return layer_sizes.back(); }
  std::size_t num_layers() const { return layer_sizes.size() - 1; }

  // Offset of layer l's weight block inside params; its bias block follows
  // immediately after fan_out * fan_in weights.
  std::size_t layer_offset(std::size_t layer) const;
};

void validate(const MlpModel& model);

/// Raw logits, n x C.
DenseMatrix forward(const MlpModel& model, const DenseMatrix& batch);

DenseMatrix sigmoid(const DenseMatrix& logits);
double sigmoid(double logit);

/// Row-wise softmax; used by the multi-class reference regularizer.
DenseMatrix softmax_rows(const DenseMatrix& logits);

/// Gradient of sum(d_logits .* forward(model, batch)) with respect to params.
std::vector<double> backward(const MlpModel& model, const DenseMatrix& batch,
                             const DenseMatrix& d_logits);

void sgd_step(MlpModel& model, std::span<const double> grad, double lr);

}  // namespace adagc
