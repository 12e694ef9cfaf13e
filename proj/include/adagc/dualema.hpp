#pragma once

// Teacher weights (EMA in parameter space), temporally smoothed student
// predictions (EMA in prediction space) and their fusion into pseudo-labels.

#include <span>
#include <vector>

#include "adagc/losses.hpp"
#include "adagc/ndcore.hpp"

namespace adagc {

struct DualEmaState {
  std::vector<double> teacher;     // theta^T
  DenseMatrix smoothed;            // n_train x C
  std::vector<bool> visited;       // per training sample
  double beta_t = 0.999;
  double beta_s = 0.8;
  double gamma = 0.5;

  /// Teacher starts as a copy of the student; no sample visited yet.
  static DualEmaState init(std::span<const double> student, std::size_t n_train,
                           std::size_t num_classes, double beta_t, double beta_s, double gamma);
};

void validate(const DualEmaState& state);

/// theta^T <- beta_t theta^T + (1 - beta_t) theta^S. Called once per optimizer step.
void ema_update_weights(DualEmaState& state, std::span<const double> student);

/// Smooths the student's predictions for the given samples. The first visit of
/// a sample copies its prediction instead of blending.
void ema_update_predictions(DualEmaState& state, std::span<const std::size_t> sample_indices,
                            const DenseMatrix& student_probs);

/// t = gamma p^T + (1 - gamma) p~^S for the given samples.
PseudoLabelMatrix make_pseudo_labels(const DualEmaState& state, const DenseMatrix& teacher_probs,
                                     std::span<const std::size_t> sample_indices);

/// Same fusion with an explicit student term (the "raw student" ablation).
PseudoLabelMatrix fuse_predictions(double gamma, const DenseMatrix& teacher_probs,
                                   const DenseMatrix& student_probs);

}  // namespace adagc
