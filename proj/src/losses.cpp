#include "adagc/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace adagc {

double clip_probability(double p) { return std::clamp(p, kProbClip, 1.0 - kProbClip); }

bool is_binary(const LabelMatrix& y) {
  const auto v = y.values();
  return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0 || x == 1.0; });
}

bool is_single_positive(const LabelMatrix& y) {
  if (!is_binary(y)) return false;
  for (std::size_t r = 0; r < y.rows(); ++r) {
    double s = 0.0;
    for (double v : y.row(r)) s += v;
    if (s != 1.0) return false;
  }
  return true;
}

namespace {

void check_unit_interval(const DenseMatrix& m, std::string_view what) {
  for (double v : m.values())
    if (!(v >= 0.0 && v <= 1.0))
      throw Error(ErrorKind::invalid_data,
                  std::string(what) + " entries must lie in [0,1], found " + std::to_string(v));
}

void check_inputs(const DenseMatrix& p, const LabelMatrix& y, std::string_view op) {
  require_same_shape(p, y, std::string(op) + ": probabilities vs labels");
  check_unit_interval(p, std::string(op) + ": probability");
  check_unit_interval(y, std::string(op) + ": label");
}

double scale_for(Reduction r, std::size_t n) {
  return r == Reduction::mean && n > 0 ? 1.0 / static_cast<double>(n) : 1.0;
}

// -[w_pos y log p + w_neg (1-y) log(1-p)] over cells with include(r,c).
// Derivative wrt the logit: w_neg (1-y) p - w_pos y (1-p).
template <typename Include>
LossValue weighted_bce(const DenseMatrix& p, const LabelMatrix& y, double w_pos, double w_neg,
                       Reduction red, Include include) {
  LossValue out{0.0, DenseMatrix(p.rows(), p.cols())};
  const double scale = scale_for(red, p.rows());
  for (std::size_t r = 0; r < p.rows(); ++r) {
    for (std::size_t c = 0; c < p.cols(); ++c) {
      if (!include(r, c)) continue;
      const double pr = p(r, c);
      const double pc = clip_probability(pr);
      const double yc = y(r, c);
      out.value -= w_pos * yc * std::log(pc) + w_neg * (1.0 - yc) * std::log(1.0 - pc);
      out.d_logits(r, c) = scale * (w_neg * (1.0 - yc) * pr - w_pos * yc * (1.0 - pr));
    }
  }
  out.value *= scale;
  return out;
}

constexpr auto all_cells = [](std::size_t, std::size_t) { return true; };

}  // namespace

LossValue soft_bce(const DenseMatrix& p, const LabelMatrix& y, Reduction r) {
  check_inputs(p, y, "soft_bce");
  return weighted_bce(p, y, 1.0, 1.0, r, all_cells);
}

LossValue loss_an(const DenseMatrix& p, const LabelMatrix& y, Reduction r) {
  check_inputs(p, y, "loss_an");
  require(is_binary(y), ErrorKind::invalid_data, "loss_an: labels must be binary");
  return weighted_bce(p, y, 1.0, 1.0, r, all_cells);
}

LossValue loss_an_ls(const DenseMatrix& p, const LabelMatrix& y, double eps, Reduction r) {
  require(eps >= 0.0 && eps < 0.5, ErrorKind::invalid_argument,
          "loss_an_ls: eps_smooth must lie in [0, 0.5)");
  check_inputs(p, y, "loss_an_ls");
  require(is_binary(y), ErrorKind::invalid_data, "loss_an_ls: labels must be binary");
  LabelMatrix smoothed(y.rows(), y.cols());
  auto src = y.values();
  auto dst = smoothed.values();
  for (std::size_t k = 0; k < src.size(); ++k) dst[k] = src[k] * (1.0 - eps) + (1.0 - src[k]) * eps;
  return weighted_bce(p, smoothed, 1.0, 1.0, r, all_cells);
}

LossValue loss_wan(const DenseMatrix& p, const LabelMatrix& y, double w_neg, Reduction r) {
  require(w_neg > 0.0 && w_neg <= 1.0, ErrorKind::invalid_argument,
          "loss_wan: w_neg must lie in (0, 1]");
  check_inputs(p, y, "loss_wan");
  require(is_binary(y), ErrorKind::invalid_data, "loss_wan: labels must be binary");
  return weighted_bce(p, y, 1.0, w_neg, r, all_cells);
}

LossValue loss_epr(const DenseMatrix& p, const LabelMatrix& y, double k_expected,
                   double lambda_epr, Reduction r) {
  const std::size_t n = p.rows();
  const std::size_t C = p.cols();
  require(k_expected > 0.0 && k_expected <= static_cast<double>(C), ErrorKind::invalid_argument,
          "loss_epr: k_expected must lie in (0, C]");
  require(lambda_epr >= 0.0, ErrorKind::invalid_argument, "loss_epr: lambda_epr must be >= 0");
  check_inputs(p, y, "loss_epr");
  LossValue out = weighted_bce(p, y, 1.0, 0.0, r, [&](std::size_t i, std::size_t c) {
    return y(i, c) > 0.0;
  });
  if (n == 0) return out;
  const double Cd = static_cast<double>(C);
  const double nd = static_cast<double>(n);
  double penalty = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (double v : p.row(i)) s += v;
    const double dev = (s - k_expected) / Cd;
    penalty += dev * dev;
    const double coeff = lambda_epr * 2.0 * (s - k_expected) / (nd * Cd * Cd);
    for (std::size_t c = 0; c < C; ++c) out.d_logits(i, c) += coeff * p(i, c) * (1.0 - p(i, c));
  }
  out.value += lambda_epr * penalty / nd;
  return out;
}

LossValue loss_iun(const DenseMatrix& p, const LabelMatrix& y, const LabelMatrix& true_negatives,
                   Reduction r) {
  check_inputs(p, y, "loss_iun");
  require_same_shape(p, true_negatives, "loss_iun: probabilities vs true-negative mask");
  require(is_binary(y) && is_binary(true_negatives), ErrorKind::invalid_data,
          "loss_iun: labels and mask must be binary");
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t c = 0; c < y.cols(); ++c)
      if (y(i, c) == 1.0 && true_negatives(i, c) == 1.0)
        throw Error(ErrorKind::invalid_data, "loss_iun: true-negative mask marks observed positive at row " +
                                                 std::to_string(i) + ", class " + std::to_string(c));
  return weighted_bce(p, y, 1.0, 1.0, r, [&](std::size_t i, std::size_t c) {
    return y(i, c) == 1.0 || true_negatives(i, c) == 1.0;
  });
}

LossValue reg_elr_mcc(const DenseMatrix& p, const DenseMatrix& t) {
  require_same_shape(p, t, "reg_elr_mcc: predictions vs targets");
  constexpr double tol = 1e-9;
  for (const DenseMatrix* m : {&p, &t}) {
    for (std::size_t i = 0; i < m->rows(); ++i) {
      double s = 0.0;
      for (double v : m->row(i)) {
        if (v < 0.0) throw Error(ErrorKind::invalid_data, "reg_elr_mcc: negative simplex entry");
        s += v;
      }
      if (std::abs(s - 1.0) > tol)
        throw Error(ErrorKind::invalid_data,
                    "reg_elr_mcc: row " + std::to_string(i) + " sums to " + std::to_string(s));
    }
  }
  const std::size_t n = p.rows();
  LossValue out{0.0, DenseMatrix(n, p.cols())};
  if (n == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    double inner = 0.0;
    for (std::size_t c = 0; c < p.cols(); ++c) inner += p(i, c) * t(i, c);
    // <p,t> = 1 only for identical one-hot rows; the log is clamped there.
    const double denom = std::max(1.0 - inner, kProbClip);
    out.value += std::log(denom);
    for (std::size_t c = 0; c < p.cols(); ++c) {
      double pull = 0.0;
      for (std::size_t k = 0; k < p.cols(); ++k) pull += (t(i, k) - t(i, c)) * p(i, k);
      out.d_logits(i, c) = inv_n * p(i, c) / denom * pull;
    }
  }
  out.value *= inv_n;
  return out;
}

LossValue reg_gc_binary(const DenseMatrix& p, const PseudoLabelMatrix& t) {
  require_same_shape(p, t, "reg_gc_binary: predictions vs pseudo-labels");
  check_unit_interval(p, "reg_gc_binary: probability");
  check_unit_interval(t, "reg_gc_binary: pseudo-label");
  const std::size_t n = p.rows();
  LossValue out{0.0, DenseMatrix(n, p.cols())};
  if (n == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < p.cols(); ++c) {
      const double pr = p(i, c);
      const double pc = clip_probability(pr);
      const double tc = t(i, c);
      const double inner = pc * tc + (1.0 - pc) * (1.0 - tc);
      const double denom = std::max(1.0 - inner, kProbClip);
      out.value += std::log(denom);
      // d/dp log(1 - <b,t>) = -(2t - 1) / (1 - <b,t>)
      out.d_logits(i, c) = inv_n * (-(2.0 * tc - 1.0) / denom) * pr * (1.0 - pr);
    }
  }
  out.value *= inv_n;
  return out;
}

LossValue reg_gc(const DenseMatrix& p, const PseudoLabelMatrix& t, const LabelMatrix& y) {
  require_same_shape(p, t, "reg_gc: predictions vs pseudo-labels");
  require_same_shape(p, y, "reg_gc: predictions vs labels");
  check_unit_interval(p, "reg_gc: probability");
  check_unit_interval(t, "reg_gc: pseudo-label");
  check_unit_interval(y, "reg_gc: label");
  const std::size_t n = p.rows();
  LossValue out{0.0, DenseMatrix(n, p.cols())};
  if (n == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < p.cols(); ++c) {
      if (y(i, c) != 0.0) continue;
      const double pr = p(i, c);
      const double pc = clip_probability(pr);
      const double tc = t(i, c);
      const double denom = 1.0 - pc * tc;
      out.value += std::log(denom);
      out.d_logits(i, c) = inv_n * (-tc / denom) * pr * (1.0 - pr);
    }
  }
  out.value *= inv_n;
  return out;
}

LossValue loss_adagc(const DenseMatrix& p, const LabelMatrix& y, const PseudoLabelMatrix& t,
                     double lambda, Reduction r) {
  require(lambda >= 0.0, ErrorKind::invalid_argument, "loss_adagc: lambda must be >= 0");
  LossValue out = soft_bce(p, y, r);
  if (lambda == 0.0) return out;
  const LossValue gc = reg_gc(p, t, y);
  out.value += lambda * gc.value;
  auto d = out.d_logits.values();
  auto g = gc.d_logits.values();
  for (std::size_t k = 0; k < d.size(); ++k) d[k] += lambda * g[k];
  return out;
}

}  // namespace adagc
