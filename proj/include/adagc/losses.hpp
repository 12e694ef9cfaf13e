#pragma once

// Training objectives for single-positive multi-label learning.
//
// Every op consumes probabilities (sigmoid outputs, or softmax rows for the
// multi-class reference regularizer) and returns the scalar together with its
// gradient with respect to the logits that produced those probabilities.
//
// Scaling conventions:
//  * BCE-style terms are sums over cells. With Reduction::mean they are
//    divided by the batch size n, which is how the trainer calls them.
//  * The calibration regularizers and the EPR cardinality penalty already
//    carry a 1/n factor and are never rescaled.

#include "adagc/ndcore.hpp"

namespace adagc {

/// n x C matrix with entries in [0,1]; observed single-positive labels,
/// ground truth, soft mixed labels and masks all use this shape.
using LabelMatrix = DenseMatrix;
using PseudoLabelMatrix = DenseMatrix;

inline constexpr double kProbClip = 1e-12;

enum class Reduction { sum, mean };

struct LossValue {
  double value = 0.0;
  DenseMatrix d_logits;
};

double clip_probability(double p);

bool is_binary(const LabelMatrix& y);
/// Binary with exactly one positive per row.
bool is_single_positive(const LabelMatrix& y);

/// Assume-negative BCE; y must be binary.
LossValue loss_an(const DenseMatrix& p, const LabelMatrix& y, Reduction r = Reduction::sum);

/// BCE against soft targets in [0,1] (ground truth, mixed labels).
LossValue soft_bce(const DenseMatrix& p, const LabelMatrix& y, Reduction r = Reduction::sum);

/// Label-smoothed AN: targets y(1-eps) + (1-y)eps, eps in [0, 0.5).
LossValue loss_an_ls(const DenseMatrix& p, const LabelMatrix& y, double eps_smooth,
                     Reduction r = Reduction::sum);

/// Weighted AN: negative terms scaled by w_neg in (0, 1].
LossValue loss_wan(const DenseMatrix& p, const LabelMatrix& y, double w_neg,
                   Reduction r = Reduction::sum);

/// Positive-only BCE plus lambda_epr * mean_i ((sum_c p_ic - k) / C)^2.
LossValue loss_epr(const DenseMatrix& p, const LabelMatrix& y, double k_expected,
                   double lambda_epr = 1.0, Reduction r = Reduction::sum);

/// BCE on observed positives and on cells flagged in true_negatives; every
/// other cell is ignored.
LossValue loss_iun(const DenseMatrix& p, const LabelMatrix& y, const LabelMatrix& true_negatives,
                   Reduction r = Reduction::sum);

/// (1/n) sum_i log(1 - <p_i, t_i>) for simplex rows. d_logits is taken with
/// respect to softmax logits.
LossValue reg_elr_mcc(const DenseMatrix& p_simplex, const DenseMatrix& t_simplex);

/// (1/n) sum_i sum_c log(1 - <[p, 1-p], [t, 1-t]>).
LossValue reg_gc_binary(const DenseMatrix& p, const PseudoLabelMatrix& t);

/// (1/n) sum over cells with y == 0 of log(1 - p t). Cells with any positive
/// label mass are excluded, so soft mixed labels are accepted.
LossValue reg_gc(const DenseMatrix& p, const PseudoLabelMatrix& t, const LabelMatrix& y);

/// soft_bce(p, y) + lambda * reg_gc(p, t, y).
LossValue loss_adagc(const DenseMatrix& p, const LabelMatrix& y, const PseudoLabelMatrix& t,
                     double lambda, Reduction r = Reduction::sum);

}  // namespace adagc
