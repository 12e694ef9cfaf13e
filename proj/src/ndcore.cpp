#include "adagc/ndcore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "adagc/kernels.hpp"

namespace adagc {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols)
    throw_dimension_mismatch("DenseMatrix data length", rows * cols, data_.size());
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t n = rows.size();
  const std::size_t c = n == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(n * c);
  for (const auto& r : rows) {
    if (r.size() != c) throw_dimension_mismatch("DenseMatrix::from_rows row length", c, r.size());
    data.insert(data.end(), r.begin(), r.end());
  }
  return DenseMatrix(n, c, std::move(data));
}

bool DenseMatrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

DenseMatrix DenseMatrix::gather_rows(std::span<const std::size_t> indices) const {
  DenseMatrix out(indices.size(), cols_);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= rows_)
      throw Error(ErrorKind::invalid_argument,
                  "row index " + std::to_string(indices[k]) + " out of range " +
                      std::to_string(rows_));
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(indices[k] * cols_), cols_,
                out.data_.begin() + static_cast<std::ptrdiff_t>(k * cols_));
  }
  return out;
}

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, std::string_view what) {
  if (a.rows() != b.rows()) throw_dimension_mismatch(std::string(what) + " rows", a.rows(), b.rows());
  if (a.cols() != b.cols()) throw_dimension_mismatch(std::string(what) + " cols", a.cols(), b.cols());
}

// ---------------------------------------------------------------------------

double SeededRng::uniform() {
  return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
}

double SeededRng::uniform(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(engine_);
}

std::size_t SeededRng::uniform_index(std::size_t n) {
  require(n > 0, ErrorKind::invalid_argument, "uniform_index over an empty range");
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
}

double SeededRng::normal(double mean, double stddev) {
  return std::normal_distribution<double>(mean, stddev)(engine_);
}

double SeededRng::gamma(double shape) {
  require(shape > 0.0, ErrorKind::invalid_argument, "gamma shape must be positive");
  return std::gamma_distribution<double>(shape, 1.0)(engine_);
}

double SeededRng::beta(double a, double b) {
  const double x = gamma(a);
  const double y = gamma(b);
  if (x + y == 0.0) return uniform() < a / (a + b) ? 1.0 : 0.0;
  return x / (x + y);
}

std::string SeededRng::save_state() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void SeededRng::load_state(const std::string& state) {
  std::istringstream is(state);
  is >> engine_;
  if (is.fail()) throw Error(ErrorKind::invalid_data, "malformed RNG state");
}

// ---------------------------------------------------------------------------

std::size_t MlpModel::parameter_count(std::span<const std::size_t> sizes) {
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) total += (sizes[l] + 1) * sizes[l + 1];
  return total;
}

static void check_sizes(const std::vector<std::size_t>& sizes) {
  require(sizes.size() == 2 || sizes.size() == 3, ErrorKind::invalid_argument,
          "MlpModel supports {input, output} or {input, hidden, output} layer sizes");
  for (auto s : sizes) require(s > 0, ErrorKind::invalid_argument, "layer sizes must be positive");
}

MlpModel MlpModel::create(std::vector<std::size_t> sizes, SeededRng& rng, Activation hidden) {
  MlpModel m = zeros(std::move(sizes), hidden);
  for (std::size_t l = 0; l < m.num_layers(); ++l) {
    const std::size_t fan_in = m.layer_sizes[l];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    const std::size_t begin = m.layer_offset(l);
    const std::size_t end = begin + (fan_in + 1) * m.layer_sizes[l + 1];
    for (std::size_t k = begin; k < end; ++k) m.params[k] = rng.uniform(-bound, bound);
  }
  return m;
}

MlpModel MlpModel::zeros(std::vector<std::size_t> sizes, Activation hidden) {
  check_sizes(sizes);
  MlpModel m;
  m.params.assign(parameter_count(sizes), 0.0);
  m.layer_sizes = std::move(sizes);
  m.hidden_activation = hidden;
  return m;
}

std::size_t MlpModel::layer_offset(std::size_t layer) const {
  std::size_t off = 0;
  for (std::size_t l = 0; l < layer; ++l) off += (layer_sizes[l] + 1) * layer_sizes[l + 1];
  return off;
}

void validate(const MlpModel& model) {
  check_sizes(model.layer_sizes);
  const std::size_t expected = MlpModel::parameter_count(model.layer_sizes);
  if (model.params.size() != expected)
    throw_dimension_mismatch("MlpModel parameter count", expected, model.params.size());
}

namespace {

struct LayerView {
  kernels::AffineShape shape;
  std::span<const double> weights;
  std::span<const double> bias;
};

LayerView layer_view(const MlpModel& m, std::size_t l, std::size_t rows) {
  const std::size_t fan_in = m.layer_sizes[l];
  const std::size_t fan_out = m.layer_sizes[l + 1];
  const std::span<const double> p(m.params);
  const std::size_t off = m.layer_offset(l);
  return {{rows, fan_in, fan_out}, p.subspan(off, fan_in * fan_out),
          p.subspan(off + fan_in * fan_out, fan_out)};
}

// Activations of every layer; acts[0] is the input, acts.back() the logits.
std::vector<DenseMatrix> forward_all(const MlpModel& m, const DenseMatrix& batch) {
  validate(m);
  if (batch.cols() != m.input_size())
    throw_dimension_mismatch("forward: batch columns vs model input size", m.input_size(),
                             batch.cols());
  std::vector<DenseMatrix> acts;
  acts.reserve(m.layer_sizes.size());
  acts.push_back(batch);
  for (std::size_t l = 0; l < m.num_layers(); ++l) {
    const LayerView v = layer_view(m, l, batch.rows());
    DenseMatrix out(batch.rows(), v.shape.fan_out);
    kernels::omp::affine_forward(v.shape, acts.back().values(), v.weights, v.bias, out.values());
    const bool hidden = l + 1 < m.num_layers();
    if (hidden && m.hidden_activation == Activation::tanh)
      for (double& z : out.values()) z = std::tanh(z);
    acts.push_back(std::move(out));
  }
  return acts;
}

}  // namespace

DenseMatrix forward(const MlpModel& model, const DenseMatrix& batch) {
  auto acts = forward_all(model, batch);
  if (!acts.back().all_finite())
    throw Error(ErrorKind::invalid_data, "forward produced non-finite logits");
  return std::move(acts.back());
}

// Saturated values are pinned to the nearest doubles inside (0, 1).
double sigmoid(double z) {
  constexpr double lo = std::numeric_limits<double>::denorm_min();
  static const double hi = std::nextafter(1.0, 0.0);
  double p;
  if (z >= 0.0) {
    p = 1.0 / (1.0 + std::exp(-z));
  } else {
    const double e = std::exp(z);
    p = e / (1.0 + e);
  }
  return std::clamp(p, lo, hi);
}

DenseMatrix sigmoid(const DenseMatrix& logits) {
  DenseMatrix out(logits.rows(), logits.cols());
  auto src = logits.values();
  auto dst = out.values();
  for (std::size_t k = 0; k < src.size(); ++k) dst[k] = sigmoid(src[k]);
  return out;
}

DenseMatrix softmax_rows(const DenseMatrix& logits) {
  DenseMatrix out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto z = logits.row(r);
    auto p = out.row(r);
    const double mx = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (std::size_t c = 0; c < z.size(); ++c) total += (p[c] = std::exp(z[c] - mx));
    for (double& v : p) v /= total;
  }
  return out;
}

std::vector<double> backward(const MlpModel& model, const DenseMatrix& batch,
                             const DenseMatrix& d_logits) {
  const auto acts = forward_all(model, batch);
  if (d_logits.rows() != batch.rows())
    throw_dimension_mismatch("backward: upstream gradient rows", batch.rows(), d_logits.rows());
  if (d_logits.cols() != model.output_size())
    throw_dimension_mismatch("backward: upstream gradient cols", model.output_size(),
                             d_logits.cols());

  std::vector<double> grad(model.params.size(), 0.0);
  std::span<double> g(grad);
  DenseMatrix delta = d_logits;
  for (std::size_t l = model.num_layers(); l-- > 0;) {
    const LayerView v = layer_view(model, l, batch.rows());
    const std::size_t off = model.layer_offset(l);
    const std::size_t nw = v.shape.fan_in * v.shape.fan_out;
    kernels::omp::affine_backward_params(v.shape, delta.values(), acts[l].values(),
                                         g.subspan(off, nw), g.subspan(off + nw, v.shape.fan_out));
    if (l == 0) break;
    DenseMatrix d_in(batch.rows(), v.shape.fan_in);
    kernels::omp::affine_backward_input(v.shape, delta.values(), v.weights, d_in.values());
    if (model.hidden_activation == Activation::tanh) {
      auto a = acts[l].values();
      auto d = d_in.values();
      for (std::size_t k = 0; k < d.size(); ++k) d[k] *= 1.0 - a[k] * a[k];
    }
    delta = std::move(d_in);
  }
  return grad;
}

void sgd_step(MlpModel& model, std::span<const double> grad, double lr) {
  if (grad.size() != model.params.size())
    throw_dimension_mismatch("sgd_step gradient length", model.params.size(), grad.size());
  require(lr > 0.0, ErrorKind::invalid_argument, "learning rate must be positive");
  for (std::size_t k = 0; k < grad.size(); ++k) model.params[k] -= lr * grad[k];
}

}  // namespace adagc
