#include "adagc/dualema.hpp"

#include <algorithm>
#include <string>

namespace adagc {

namespace {

void check_coefficient(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0))
    throw Error(ErrorKind::invalid_argument, std::string(name) + " must lie in [0,1]");
}

}  // namespace

DualEmaState DualEmaState::init(std::span<const double> student, std::size_t n_train,
                                std::size_t num_classes, double beta_t, double beta_s,
                                double gamma) {
  DualEmaState s;
  s.teacher.assign(student.begin(), student.end());
  s.smoothed = DenseMatrix(n_train, num_classes);
  s.visited.assign(n_train, false);
  s.beta_t = beta_t;
  s.beta_s = beta_s;
  s.gamma = gamma;
  validate(s);
  return s;
}

void validate(const DualEmaState& s) {
  check_coefficient(s.beta_t, "beta_t");
  check_coefficient(s.beta_s, "beta_s");
  check_coefficient(s.gamma, "gamma");
  if (s.visited.size() != s.smoothed.rows())
    throw_dimension_mismatch("DualEmaState visited flags", s.smoothed.rows(), s.visited.size());
}

void ema_update_weights(DualEmaState& s, std::span<const double> student) {
  if (student.size() != s.teacher.size())
    throw_dimension_mismatch("ema_update_weights parameter count", s.teacher.size(), student.size());
  const double keep = s.beta_t;
  const double take = 1.0 - s.beta_t;
  for (std::size_t k = 0; k < student.size(); ++k)
    s.teacher[k] = keep * s.teacher[k] + take * student[k];
}

void ema_update_predictions(DualEmaState& s, std::span<const std::size_t> idx,
                            const DenseMatrix& probs) {
  if (probs.rows() != idx.size())
    throw_dimension_mismatch("ema_update_predictions rows vs indices", idx.size(), probs.rows());
  if (probs.cols() != s.smoothed.cols())
    throw_dimension_mismatch("ema_update_predictions classes", s.smoothed.cols(), probs.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] >= s.smoothed.rows())
      throw Error(ErrorKind::invalid_argument, "ema_update_predictions: sample index " +
                                                   std::to_string(idx[k]) + " out of range");
    for (double v : probs.row(k))
      if (!(v >= 0.0 && v <= 1.0))
        throw Error(ErrorKind::invalid_data, "ema_update_predictions: probability outside [0,1]");
  }
  for (std::size_t k = 0; k < idx.size(); ++k) {
    auto dst = s.smoothed.row(idx[k]);
    auto src = probs.row(k);
    if (!s.visited[idx[k]]) {
      std::copy(src.begin(), src.end(), dst.begin());
      s.visited[idx[k]] = true;
      continue;
    }
    for (std::size_t c = 0; c < dst.size(); ++c)
      dst[c] = s.beta_s * dst[c] + (1.0 - s.beta_s) * src[c];
  }
}

PseudoLabelMatrix fuse_predictions(double gamma, const DenseMatrix& teacher_probs,
                                   const DenseMatrix& student_probs) {
  check_coefficient(gamma, "gamma");
  require_same_shape(teacher_probs, student_probs, "fuse_predictions: teacher vs student");
  PseudoLabelMatrix t(teacher_probs.rows(), teacher_probs.cols());
  auto a = teacher_probs.values();
  auto b = student_probs.values();
  auto out = t.values();
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (!(a[k] >= 0.0 && a[k] <= 1.0 && b[k] >= 0.0 && b[k] <= 1.0))
      throw Error(ErrorKind::invalid_data, "fuse_predictions: probability outside [0,1]");
    // Clamped to the segment so rounding never leaves the convex hull.
    out[k] = std::clamp(gamma * a[k] + (1.0 - gamma) * b[k], std::min(a[k], b[k]),
                        std::max(a[k], b[k]));
  }
  return t;
}

PseudoLabelMatrix make_pseudo_labels(const DualEmaState& s, const DenseMatrix& teacher_probs,
                                     std::span<const std::size_t> idx) {
  if (teacher_probs.rows() != idx.size())
    throw_dimension_mismatch("make_pseudo_labels rows vs indices", idx.size(), teacher_probs.rows());
  if (teacher_probs.cols() != s.smoothed.cols())
    throw_dimension_mismatch("make_pseudo_labels classes", s.smoothed.cols(), teacher_probs.cols());
  return fuse_predictions(s.gamma, teacher_probs, s.smoothed.gather_rows(idx));
}

}  // namespace adagc
