#include "adagc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "adagc/dataset.hpp"
#include "adagc/kernels.hpp"

namespace adagc {

std::optional<double> average_precision(std::span<const double> scores,
                                        std::span<const double> labels) {
  if (scores.size() != labels.size())
    throw_dimension_mismatch("average_precision scores vs labels", scores.size(), labels.size());
  const double ap =
      kernels::average_precision_strided(scores.size(), 1, scores.data(), labels.data());
  if (ap < 0.0) return std::nullopt;
  return ap;
}

namespace {

MapResult map_from_columns(std::span<const double> ap_columns) {
  MapResult out;
  out.per_class.resize(ap_columns.size());
  double total = 0.0;
  for (std::size_t c = 0; c < ap_columns.size(); ++c) {
    if (ap_columns[c] < 0.0) continue;
    out.per_class[c] = ap_columns[c];
    total += ap_columns[c];
    ++out.evaluable;
  }
  out.map = out.evaluable == 0 ? 0.0 : total / static_cast<double>(out.evaluable);
  return out;
}

}  // namespace

MapResult mean_average_precision(const DenseMatrix& scores, const LabelMatrix& labels) {
  require_same_shape(scores, labels, "mean_average_precision");
  std::vector<double> ap(scores.cols());
  kernels::omp::average_precision_columns(scores.rows(), scores.cols(), scores.values(),
                                          labels.values(), ap);
  MapResult out = map_from_columns(ap);
  require(out.evaluable > 0, ErrorKind::invalid_data,
          "mean_average_precision: no class has a positive label");
  return out;
}

double coverage(const DenseMatrix& scores, const LabelMatrix& labels) {
  require_same_shape(scores, labels, "coverage");
  require(scores.rows() > 0, ErrorKind::invalid_data, "coverage: empty input");
  const std::size_t C = scores.cols();
  std::vector<std::size_t> order(C);
  double total = 0.0;
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    auto s = scores.row(i);
    auto y = labels.row(i);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
    std::size_t worst = 0;
    for (std::size_t k = 0; k < C; ++k)
      if (y[order[k]] > 0.5) worst = k + 1;
    if (worst == 0)
      throw Error(ErrorKind::invalid_data,
                  "coverage: row " + std::to_string(i) + " has no positive label");
    total += static_cast<double>(worst - 1);
  }
  return total / static_cast<double>(scores.rows());
}

RankingLossResult ranking_loss(const DenseMatrix& scores, const LabelMatrix& labels) {
  require_same_shape(scores, labels, "ranking_loss");
  RankingLossResult out;
  std::vector<double> pos, neg;
  double total = 0.0;
  std::size_t valid = 0;
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    pos.clear();
    neg.clear();
    auto s = scores.row(i);
    auto y = labels.row(i);
    for (std::size_t c = 0; c < s.size(); ++c) (y[c] > 0.5 ? pos : neg).push_back(s[c]);
    if (pos.empty() || neg.empty()) {
      ++out.skipped_rows;
      continue;
    }
    std::sort(neg.begin(), neg.end());
    std::size_t bad = 0;
    for (double p : pos)  // negatives scoring >= p
      bad += static_cast<std::size_t>(neg.end() - std::lower_bound(neg.begin(), neg.end(), p));
    total += static_cast<double>(bad) / static_cast<double>(pos.size() * neg.size());
    ++valid;
  }
  require(valid > 0, ErrorKind::invalid_data, "ranking_loss: no row has both label kinds");
  out.value = total / static_cast<double>(valid);
  return out;
}

ThresholdedMetrics thresholded_metrics(const DenseMatrix& probs, const LabelMatrix& labels,
                                       double threshold) {
  require_same_shape(probs, labels, "thresholded_metrics");
  require(threshold > 0.0 && threshold < 1.0, ErrorKind::invalid_argument,
          "threshold must lie in (0,1)");
  const std::size_t n = probs.rows();
  const std::size_t C = probs.cols();
  std::vector<std::size_t> tp(C, 0), pp(C, 0), pos(C, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < C; ++c) {
      const bool pred = probs(i, c) >= threshold;
      const bool truth = labels(i, c) > 0.5;
      correct += pred == truth;
      tp[c] += pred && truth;
      pp[c] += pred;
      pos[c] += truth;
    }
  }
  ThresholdedMetrics m;
  m.precision.resize(C);
  m.recall.resize(C);
  m.f1.resize(C);
  const auto ratio = [](std::size_t a, std::size_t b) {
    return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
  };
  for (std::size_t c = 0; c < C; ++c) {
    m.precision[c] = ratio(tp[c], pp[c]);
    m.recall[c] = ratio(tp[c], pos[c]);
    const double s = m.precision[c] + m.recall[c];
    m.f1[c] = s == 0.0 ? 0.0 : 2.0 * m.precision[c] * m.recall[c] / s;
  }
  const auto mean = [C](const std::vector<double>& v) {
    return C == 0 ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(C);
  };
  m.oa = ratio(correct, n * C);
  m.mf1 = mean(m.f1);
  m.mprecision = mean(m.precision);
  m.mrecall = mean(m.recall);
  return m;
}

MetricReport compute_metric_report(const DenseMatrix& probs, const LabelMatrix& labels,
                                   double threshold) {
  MetricReport r;
  const MapResult m = mean_average_precision(probs, labels);
  r.ap = m.per_class;
  r.map = m.map;
  r.evaluable_classes = m.evaluable;
  r.coverage = coverage(probs, labels);
  const RankingLossResult rl = ranking_loss(probs, labels);
  r.rankloss = rl.value;
  r.rankloss_skipped_rows = rl.skipped_rows;
  ThresholdedMetrics t = thresholded_metrics(probs, labels, threshold);
  r.oa = t.oa;
  r.mf1 = t.mf1;
  r.mprecision = t.mprecision;
  r.mrecall = t.mrecall;
  r.precision = std::move(t.precision);
  r.recall = std::move(t.recall);
  r.f1 = std::move(t.f1);
  r.threshold = threshold;
  return r;
}

nlohmann::json to_json(const MetricReport& r) {
  return nlohmann::json{{"map", r.map},
                        {"coverage", r.coverage},
                        {"rankloss", r.rankloss},
                        {"oa", r.oa},
                        {"mf1", r.mf1},
                        {"mprecision", r.mprecision},
                        {"mrecall", r.mrecall},
                        {"threshold", r.threshold},
                        {"evaluable_classes", r.evaluable_classes}};
}

// --- Fraction ------------------------------------------------------------------

Fraction::Fraction(std::int64_t n, std::int64_t d) {
  require(d != 0, ErrorKind::invalid_argument, "fraction with zero denominator");
  if (d < 0) {
    n = -n;
    d = -d;
  }
  const std::int64_t g = std::gcd(n, d);
  num = g == 0 ? 0 : n / g;
  den = g == 0 ? 1 : d / g;
}

Fraction operator+(const Fraction& a, const Fraction& b) {
  return {a.num * b.den + b.num * a.den, a.den * b.den};
}
Fraction operator-(const Fraction& a, const Fraction& b) {
  return {a.num * b.den - b.num * a.den, a.den * b.den};
}
Fraction operator*(const Fraction& a, const Fraction& b) {
  return {a.num * b.num, a.den * b.den};
}
Fraction operator/(const Fraction& a, const Fraction& b) {
  require(b.num != 0, ErrorKind::invalid_argument, "fraction division by zero");
  return {a.num * b.den, a.den * b.num};
}

NoisyMetricResult noisy_metric_transform(const ClassCounts& k) {
  const auto P = k.positives, TP = k.true_positives, PP = k.predicted_positives;
  const auto F = k.flipped, PF = k.predicted_flipped;
  require(P >= 0 && TP >= 0 && PP >= 0 && F >= 0 && PF >= 0, ErrorKind::invalid_argument,
          "noisy_metric_transform: counts must be nonnegative");
  require(PF <= F && F <= P, ErrorKind::invalid_argument,
          "noisy_metric_transform: requires PF <= F <= P");
  require(PF <= TP && TP <= P && TP <= PP, ErrorKind::invalid_argument,
          "noisy_metric_transform: requires PF <= TP <= min(P, PP)");

  NoisyMetricResult r;
  if (P > 0) {
    r.recall_clean = Fraction(TP, P);
    r.beta = Fraction(F, P);
  }
  if (PP > 0) r.precision_clean = Fraction(TP, PP);
  // Without flips alpha is irrelevant; zero keeps the noisy forms equal to the clean ones.
  if (F > 0)
    r.alpha = Fraction(PF, F);
  else
    r.alpha = Fraction(0);

  if (P - F > 0) r.recall_direct = Fraction(TP - PF, P - F);
  if (PP > 0) r.precision_direct = Fraction(TP - PF, PP);

  if (r.recall_clean && r.beta && P - F > 0) {
    const Fraction ab = *r.alpha * *r.beta;
    r.recall_param = (*r.recall_clean - ab) / (Fraction(1) - *r.beta);
  }
  if (r.precision_clean && r.recall_clean && r.recall_clean->num != 0) {
    const Fraction ab = *r.alpha * (r.beta ? *r.beta : Fraction(0));
    r.precision_param = *r.precision_clean * (Fraction(1) - ab / *r.recall_clean);
  }
  r.degenerate = !(r.recall_direct && r.precision_direct && r.recall_param && r.precision_param);
  return r;
}

std::vector<double> noisy_ap_weights(std::span<const double> beta, NoiseRegime regime) {
  require(regime != NoiseRegime::none, ErrorKind::invalid_argument,
          "noisy AP weights need a noise regime");
  std::vector<double> w(beta.size());
  for (std::size_t c = 0; c < beta.size(); ++c) {
    require(beta[c] >= 0.0 && beta[c] < 1.0, ErrorKind::invalid_argument,
            "flip rates must lie in [0,1)");
    w[c] = regime == NoiseRegime::random ? 1.0 - beta[c] : 1.0 / (1.0 - beta[c]);
  }
  return w;
}

NoisyMetricModel build_noisy_metric_model(std::span<const ClassCounts> counts, NoiseRegime regime) {
  NoisyMetricModel m;
  for (const auto& k : counts) {
    NoisyMetricResult r = noisy_metric_transform(k);
    m.beta.push_back(r.beta ? r.beta->to_double() : 0.0);
    m.alpha.push_back(r.alpha ? r.alpha->to_double() : 0.0);
    m.classes.push_back(std::move(r));
  }
  m.omega = noisy_ap_weights(m.beta, regime);
  return m;
}

double population_covariance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw_dimension_mismatch("covariance lengths", a.size(), b.size());
  require(!a.empty(), ErrorKind::invalid_argument, "covariance of empty vectors");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - ma) * (b[k] - mb);
  return s / n;
}

double estimate_proposition_bound(std::span<const double> clean_ap, std::span<const double> beta,
                                  NoiseRegime regime) {
  if (clean_ap.size() != beta.size())
    throw_dimension_mismatch("estimate_proposition_bound lengths", clean_ap.size(), beta.size());
  require(!beta.empty(), ErrorKind::invalid_argument, "estimate_proposition_bound: empty input");
  for (double b : beta)
    require(b > 0.0 && b < 1.0, ErrorKind::invalid_argument, "flip rates must lie in (0,1)");
  const double n = static_cast<double>(beta.size());
  const double map = std::accumulate(clean_ap.begin(), clean_ap.end(), 0.0) / n;
  if (regime == NoiseRegime::random) {
    const double mean_beta = std::accumulate(beta.begin(), beta.end(), 0.0) / n;
    return (1.0 - mean_beta) * map - population_covariance(beta, clean_ap);
  }
  require(regime == NoiseRegime::dominant, ErrorKind::invalid_argument,
          "estimate_proposition_bound needs a noise regime");
  const auto inv = noisy_ap_weights(beta, regime);
  const double mean_inv = std::accumulate(inv.begin(), inv.end(), 0.0) / n;
  return mean_inv * map + population_covariance(inv, clean_ap);
}

// --- Monte Carlo -----------------------------------------------------------------

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

LabelMatrix dominant_flip_draw(const DenseMatrix& weight, const LabelMatrix& y_true,
                               double sharpness, SeededRng& rng) {
  LabelMatrix out(y_true.rows(), y_true.cols());
  std::vector<double> odds;
  for (std::size_t i = 0; i < y_true.rows(); ++i) {
    odds.assign(y_true.cols(), 0.0);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < y_true.cols(); ++c)
      if (y_true(i, c) == 1.0) top = std::max(top, weight(i, c));
    double total = 0.0;
    for (std::size_t c = 0; c < y_true.cols(); ++c)
      if (y_true(i, c) == 1.0) total += odds[c] = std::exp(sharpness * (weight(i, c) - top));
    double u = rng.uniform() * total;
    std::size_t pick = y_true.cols();
    for (std::size_t c = 0; c < y_true.cols(); ++c) {
      if (odds[c] == 0.0) continue;
      pick = c;
      if (u < odds[c]) break;
      u -= odds[c];
    }
    out(i, pick) = 1.0;
  }
  return out;
}

}  // namespace

MonteCarloResult monte_carlo_proposition_check(const MonteCarloConfig& cfg, NoiseRegime regime) {
  require(cfg.trials >= 100, ErrorKind::invalid_argument, "Monte Carlo needs at least 100 trials");
  require(regime == NoiseRegime::random || regime == NoiseRegime::dominant,
          ErrorKind::invalid_argument, "Monte Carlo needs a noise regime");
  const std::size_t C = cfg.num_classes;
  SeededRng rng(cfg.seed);
  const auto weights = class_frequency_weights(C, cfg.class_skew);
  const LabelMatrix y_true = sample_label_matrix(cfg.n, C, cfg.mean_cardinality, weights, rng);
  // Each positive gets an independent prominence u^2 scaling its score
  // separation; faint positives score close to negatives.
  DenseMatrix prominence(cfg.n, C);
  for (std::size_t k = 0; k < prominence.size(); ++k)
    if (y_true.values()[k] == 1.0) {
      const double u = rng.uniform();
      prominence.values()[k] = u * u;
    }
  DenseMatrix scores(cfg.n, C);
  for (std::size_t c = 0; c < C; ++c) {
    const double t = C == 1 ? 0.0 : static_cast<double>(c) / static_cast<double>(C - 1);
    const double sep = cfg.min_separation + t * (cfg.max_separation - cfg.min_separation);
    for (std::size_t i = 0; i < cfg.n; ++i)
      scores(i, c) = sep * prominence(i, c) + rng.normal();
  }

  MonteCarloResult res;
  std::vector<double> clean(C);
  kernels::serial::average_precision_columns(cfg.n, C, scores.values(), y_true.values(), clean);
  for (std::size_t c = 0; c < C; ++c)
    require(clean[c] >= 0.0, ErrorKind::invalid_data,
            "Monte Carlo generator produced a class without positives");
  res.clean_ap = clean;
  res.clean_map = std::accumulate(clean.begin(), clean.end(), 0.0) / static_cast<double>(C);

  const std::size_t T = cfg.trials;
  res.noisy_map.assign(T, 0.0);
  std::vector<double> beta_rows(T * C, 0.0);
  const auto trials = static_cast<std::int64_t>(T);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t trial = 0; trial < trials; ++trial) {
    SeededRng trng(splitmix64(cfg.seed ^ splitmix64(static_cast<std::uint64_t>(trial) + 1)));
    const LabelMatrix noisy = regime == NoiseRegime::random
                                  ? simulate_random_spml(y_true, trng)
                                  : dominant_flip_draw(scores, y_true, cfg.dominance_sharpness, trng);
    std::vector<double> ap(C);
    kernels::serial::average_precision_columns(cfg.n, C, scores.values(), noisy.values(), ap);
    res.noisy_map[static_cast<std::size_t>(trial)] = map_from_columns(ap).map;
    const FlipRateTable fr = compute_flip_rates(y_true, noisy);
    for (std::size_t c = 0; c < C; ++c)
      beta_rows[static_cast<std::size_t>(trial) * C + c] = fr.beta[c].value_or(0.0);
  }

  res.mean_beta.assign(C, 0.0);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t c = 0; c < C; ++c) res.mean_beta[c] += beta_rows[t * C + c] / static_cast<double>(T);
  std::size_t below = 0, above = 0;
  for (double m : res.noisy_map) {
    below += m < res.clean_map;
    above += m > res.clean_map;
  }
  res.mean_noisy_map =
      std::accumulate(res.noisy_map.begin(), res.noisy_map.end(), 0.0) / static_cast<double>(T);
  res.fraction_below_clean = static_cast<double>(below) / static_cast<double>(T);
  res.fraction_above_clean = static_cast<double>(above) / static_cast<double>(T);
  res.predicted = estimate_proposition_bound(res.clean_ap, res.mean_beta, regime);
  return res;
}

}  // namespace adagc
