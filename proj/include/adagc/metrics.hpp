#pragma once

// Multi-label evaluation metrics and the noisy-metric theory toolkit.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "adagc/losses.hpp"
#include "adagc/ndcore.hpp"
#include "adagc/noisesim.hpp"
#include "json.hpp"

namespace adagc {

/// Non-interpolated AP: mean precision at the ranks of the positives, ranking
/// by descending score with ties broken by ascending sample index. Empty when
/// the labels hold no positive.
std::optional<double> average_precision(std::span<const double> scores,
                                        std::span<const double> labels);

struct MapResult {
  double map = 0.0;
  std::vector<std::optional<double>> per_class;
  std::size_t evaluable = 0;
};

/// Macro mean over classes with at least one positive.
MapResult mean_average_precision(const DenseMatrix& scores, const LabelMatrix& labels);

/// Mean over rows of (worst rank of a true label) - 1; rank 1 is the top
/// score, ties ranked by ascending class index.
double coverage(const DenseMatrix& scores, const LabelMatrix& labels);

struct RankingLossResult {
  double value = 0.0;
  std::size_t skipped_rows = 0;  // rows without a positive or without a negative
};

/// Fraction of (positive, negative) pairs with f(pos) <= f(neg), averaged
/// over rows that have both.
RankingLossResult ranking_loss(const DenseMatrix& scores, const LabelMatrix& labels);

struct ThresholdedMetrics {
  double oa = 0.0;  // correct cells / (N * C)
  double mf1 = 0.0;
  double mprecision = 0.0;
  double mrecall = 0.0;
  std::vector<double> precision, recall, f1;
};

ThresholdedMetrics thresholded_metrics(const DenseMatrix& probs, const LabelMatrix& labels,
                                       double threshold = 0.5);

struct MetricReport {
  std::vector<std::optional<double>> ap;
  std::vector<double> precision, recall, f1;
  double map = 0.0;
  double coverage = 0.0;
  double rankloss = 0.0;
  double oa = 0.0;
  double mf1 = 0.0;
  double mprecision = 0.0;
  double mrecall = 0.0;
  double threshold = 0.5;
  std::size_t evaluable_classes = 0;
  std::size_t rankloss_skipped_rows = 0;
};

MetricReport compute_metric_report(const DenseMatrix& probs, const LabelMatrix& labels,
                                   double threshold = 0.5);

/// Flat object: map, coverage, rankloss, oa, mf1, mprecision, mrecall,
/// threshold, evaluable_classes.
nlohmann::json to_json(const MetricReport& report);

// --- noisy-metric relations --------------------------------------------------

/// Exact rational with 64-bit parts, always normalized with a positive
/// denominator.
struct Fraction {
  std::int64_t num = 0;
  std::int64_t den = 1;

  Fraction() = default;
  Fraction(std::int64_t n, std::int64_t d = 1);

  double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
  friend bool operator==(const Fraction&, const Fraction&) = default;
};

Fraction operator+(const Fraction& a, const Fraction& b);
Fraction operator-(const Fraction& a, const Fraction& b);
Fraction operator*(const Fraction& a, const Fraction& b);
Fraction operator/(const Fraction& a, const Fraction& b);

struct ClassCounts {
  std::int64_t positives = 0;            // P
  std::int64_t true_positives = 0;       // TP
  std::int64_t predicted_positives = 0;  // PP
  std::int64_t flipped = 0;              // F
  std::int64_t predicted_flipped = 0;    // PF
};

/// Clean metrics, noisy metrics from counts, and noisy metrics from the
/// (alpha, beta) parametrisation. Undefined quantities stay empty.
struct NoisyMetricResult {
  std::optional<Fraction> recall_clean, precision_clean;
  std::optional<Fraction> alpha, beta;
  std::optional<Fraction> recall_direct, precision_direct;
  std::optional<Fraction> recall_param, precision_param;
  bool degenerate = false;  // some quantity was undefined
};

NoisyMetricResult noisy_metric_transform(const ClassCounts& counts);

/// Linear weights relating noisy to clean AP: 1 - beta (random) or
/// 1 / (1 - beta) (dominant).
std::vector<double> noisy_ap_weights(std::span<const double> beta, NoiseRegime regime);

struct NoisyMetricModel {
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> omega;
  std::vector<NoisyMetricResult> classes;
};

NoisyMetricModel build_noisy_metric_model(std::span<const ClassCounts> counts, NoiseRegime regime);

double population_covariance(std::span<const double> a, std::span<const double> b);

/// Right-hand side of the expected noisy mAP approximation:
///   random:   (1 - mean beta) mAP* - Cov(beta, AP*)
///   dominant: mean(1/(1-beta)) mAP* + Cov(1/(1-beta), AP*)
double estimate_proposition_bound(std::span<const double> clean_ap, std::span<const double> beta,
                                  NoiseRegime regime);

struct MonteCarloConfig {
  std::size_t n = 2000;
  std::size_t num_classes = 19;
  double mean_cardinality = 2.9;
  double class_skew = 0.5;
  double min_separation = 1.0;  // per-class score separation, spread linearly
  double max_separation = 5.0;
  double dominance_sharpness = 4.0;  // retention odds exp(k * score) in the dominant regime
  std::size_t trials = 500;
  std::uint64_t seed = 0;
};

struct MonteCarloResult {
  double clean_map = 0.0;
  std::vector<double> clean_ap;
  std::vector<double> mean_beta;
  std::vector<double> noisy_map;  // one per trial
  double mean_noisy_map = 0.0;
  double predicted = 0.0;
  double fraction_below_clean = 0.0;
  double fraction_above_clean = 0.0;
};

/// Fixed scores and true labels, repeatedly re-annotated under the regime's
/// flip model. A positive scores sep_c * u^2 + N(0,1) with u ~ U(0,1) drawn
/// per positive, a negative scores N(0,1). Random keeps a uniform true
/// positive per row; dominant keeps a positive with odds
/// exp(sharpness * score), so flips fall on low-scoring minor classes.
MonteCarloResult monte_carlo_proposition_check(const MonteCarloConfig& config,
                                               NoiseRegime regime);

}  // namespace adagc
