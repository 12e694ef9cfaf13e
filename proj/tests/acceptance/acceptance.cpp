// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <tuple>

#include "adagc/dualema.hpp"
#include "adagc/experiment.hpp"
#include "adagc/metrics.hpp"
#include "adagc/trainer.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace adagc;
using M = DenseMatrix;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------- 1

Outcome gradient_correctness() {
  const auto start = Clock::now();
  SeededRng rng(2024);
  double worst = 0.0;
  std::string worst_name;
  std::size_t checks = 0;
  for (int instance = 0; instance < 50; ++instance) {
    const gradcheck::Instance inst = gradcheck::random_instance(rng);
    for (const auto& c : inst.cases) {
      const double err = gradcheck::relative_error(c, inst.model, inst.x);
      ++checks;
      if (!(err <= worst)) {
        worst = err;
        worst_name = c.name;
      }
    }
  }
  const double t = seconds_since(start);
  return {worst < 1e-6 && t < 30.0 && checks == 50 * 9,
          fmt("%zu checks, worst relative error %.3g (%s), %.1f s", checks, worst, worst_name.c_str(), t)};
}

// ---------------------------------------------------------------- 2

Outcome gc_sign_law() {
  std::size_t violations = 0, cells = 0;
  auto check = [&](double p, double t) {
    const LossValue g = reg_gc(M::from_rows({{p}}), M::from_rows({{t}}), M::from_rows({{0.0}}));
    ++cells;
    if (!(g.d_logits(0, 0) <= 0.0)) ++violations;
  };
  for (int a = 0; a < 100; ++a)
    for (int b = 0; b < 100; ++b) check((a + 0.5) / 100.0, (b + 0.5) / 100.0);
  SeededRng rng(7);
  for (int k = 0; k < 10000; ++k) check(rng.uniform(), rng.uniform());
  return {violations == 0, fmt("%zu evaluations, %zu violations", cells, violations)};
}

// ---------------------------------------------------------------- 3

Outcome metric_oracles() {
  const auto start = Clock::now();
  SeededRng rng(99);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(30), c = 2 + rng.uniform_index(7);
    M s(n, c), y(n, c);
    for (double& v : s.values()) v = static_cast<double>(rng.uniform_index(8)) / 7.0;
    for (std::size_t i = 0; i < n; ++i) {
      y(i, rng.uniform_index(c)) = 1.0;
      for (std::size_t k = 0; k < c; ++k)
        if (rng.uniform() < 0.3) y(i, k) = 1.0;
    }
    bool any_positive_class = false, any_ranked_row = false;
    for (std::size_t k = 0; k < c; ++k) {
      double col = 0.0;
      for (std::size_t i = 0; i < n; ++i) col += y(i, k);
      if (col > 0.0) any_positive_class = true;
    }
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (double v : y.row(i)) row += v;
      if (row < static_cast<double>(c)) any_ranked_row = true;
    }
    if (any_positive_class)
      worst = std::max(worst, std::abs(mean_average_precision(s, y).map - oracle::mean_average_precision(s, y)));
    worst = std::max(worst, std::abs(coverage(s, y) - oracle::coverage(s, y)));
    if (any_ranked_row)
      worst = std::max(worst, std::abs(ranking_loss(s, y).value - oracle::ranking_loss(s, y)));
  }
  const double t = seconds_since(start);
  return {worst <= 1e-12 && t < 10.0, fmt("200 instances, max deviation %.3g, %.2f s", worst, t)};
}

// ---------------------------------------------------------------- 4

Outcome noisy_metric_identity() {
  SeededRng rng(11);
  std::size_t fixtures = 0, mismatches = 0;
  while (fixtures < 100) {
    // Sample-level realisation: truth, prediction, and which positives lost their label.
    const std::size_t m = 5 + rng.uniform_index(60);
    std::int64_t P = 0, TP = 0, PP = 0, F = 0, PF = 0, noisy_pos = 0, noisy_tp = 0;
    const double prevalence = rng.uniform(0.2, 0.8), flip = rng.uniform(0.0, 0.7);
    const double hit = rng.uniform(0.3, 0.95), false_alarm = rng.uniform(0.0, 0.4);
    for (std::size_t i = 0; i < m; ++i) {
      const bool y = rng.uniform() < prevalence;
      const bool pred = rng.uniform() < (y ? hit : false_alarm);
      const bool flipped = y && rng.uniform() < flip;
      const bool y_noisy = y && !flipped;
      P += y;
      TP += y && pred;
      PP += pred;
      F += flipped;
      PF += flipped && pred;
      noisy_pos += y_noisy;
      noisy_tp += y_noisy && pred;
    }
    if (noisy_pos == 0 || PP == 0 || TP == 0) continue;
    const NoisyMetricResult r = noisy_metric_transform({P, TP, PP, F, PF});
    const Fraction recall(noisy_tp, noisy_pos), precision(noisy_tp, PP);
    ++fixtures;
    if (r.degenerate || !(*r.recall_direct == recall) || !(*r.precision_direct == precision) ||
        !(*r.recall_param == recall) || !(*r.precision_param == precision))
      ++mismatches;
  }
  return {mismatches == 0, fmt("%zu integer-count fixtures, %zu mismatches", fixtures, mismatches)};
}

// ---------------------------------------------------------------- 5, 6

Outcome monte_carlo(NoiseRegime regime) {
  const auto start = Clock::now();
  MonteCarloConfig cfg;
  cfg.n = 2000;
  cfg.num_classes = 19;
  cfg.trials = 500;
  cfg.seed = 5;
  const MonteCarloResult r = monte_carlo_proposition_check(cfg, regime);
  const double t = seconds_since(start);
  if (regime == NoiseRegime::random) {
    const double gap = std::abs(r.mean_noisy_map - r.predicted);
    return {r.fraction_below_clean >= 0.99 && gap <= 0.02 && t < 60.0,
            fmt("clean %.4f, mean noisy %.4f, predicted %.4f, below clean in %.1f%% of trials, %.1f s",
                r.clean_map, r.mean_noisy_map, r.predicted, 100.0 * r.fraction_below_clean, t)};
  }
  return {r.fraction_above_clean >= 0.99 && t < 60.0,
          fmt("clean %.4f, mean noisy %.4f, above clean in %.1f%% of trials, %.1f s", r.clean_map,
              r.mean_noisy_map, 100.0 * r.fraction_above_clean, t)};
}

// ---------------------------------------------------------------- 7, 8, 9

struct RunKey {
  NoiseRegime regime;
  Method method;
  StudentSource source;
  std::uint64_t seed;
  auto operator<=>(const RunKey&) const = default;
};

class SuiteRuns {
 public:
  const TrainResult& get(NoiseRegime regime, Method method, std::uint64_t seed,
                         StudentSource source = StudentSource::smoothed) {
    const RunKey key{regime, method, source, seed};
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    const auto start = Clock::now();
    ExperimentSpec spec;
    SyntheticSpec data;
    data.seed = seed;
    spec.data = data;
    spec.regime = regime;
    spec.config.method = method;
    spec.config.seed = seed;
    spec.config.student_source = source;
    const DatasetSplits s = prepare_data(spec);
    TrainResult r = train(spec.config, s.train, s.val, s.test);
    seconds_[regime] += seconds_since(start);
    return cache_.emplace(key, std::move(r)).first->second;
  }
  double seconds(NoiseRegime regime) { return seconds_[regime]; }

 private:
  std::map<RunKey, TrainResult> cache_;
  std::map<NoiseRegime, double> seconds_;
};

constexpr std::uint64_t kSeeds[] = {0, 1, 2};

Outcome trigger_near_clean_peak(SuiteRuns& runs) {
  const std::size_t patience = TrainConfig{}.patience;
  bool pass = true;
  std::string detail;
  for (NoiseRegime regime : {NoiseRegime::random, NoiseRegime::dominant}) {
    int hits = 0;
    detail += std::string(to_string(regime)) + ":";
    for (std::uint64_t seed : kSeeds) {
      const TrainResult& r = runs.get(regime, Method::an, seed);
      std::size_t peak = 0;
      for (std::size_t k = 1; k < r.log.size(); ++k)
        if (r.log[k].clean_val_map > r.log[peak].clean_val_map) peak = k;
      if (!r.detector.trigger_epoch) {
        detail += fmt(" s%llu none/%zu", static_cast<unsigned long long>(seed), peak);
        continue;
      }
      const std::size_t trig = *r.detector.trigger_epoch;
      const std::size_t dist = trig > peak ? trig - peak : peak - trig;
      if (dist <= patience + 2) ++hits;
      detail += fmt(" s%llu %zu/%zu", static_cast<unsigned long long>(seed), trig, peak);
    }
    detail += fmt(" (%d/3)  ", hits);
    if (3 * hits < 2 * 3) pass = false;
  }
  return {pass, detail + "[trigger/clean-val argmax]"};
}

Outcome method_ordering(SuiteRuns& runs) {
  bool pass = true;
  std::string detail;
  for (NoiseRegime regime : {NoiseRegime::random, NoiseRegime::dominant}) {
    detail += std::string(to_string(regime)) + ":";
    for (std::uint64_t seed : kSeeds) {
      const double an = runs.get(regime, Method::an, seed).test_report.map;
      const double ada = runs.get(regime, Method::adagc, seed).test_report.map;
      if (regime == NoiseRegime::random) {
        const double gt = runs.get(regime, Method::gt, seed).test_report.map;
        pass = pass && gt > ada && ada > an;
        detail += fmt(" s%llu gt %.4f ada %.4f an %.4f;", static_cast<unsigned long long>(seed), gt, ada, an);
      } else {
        pass = pass && ada > an;
        detail += fmt(" s%llu ada %.4f an %.4f;", static_cast<unsigned long long>(seed), ada, an);
      }
    }
    const double t = runs.seconds(regime);
    pass = pass && t < 300.0;
    detail += fmt(" %.0f s  ", t);
  }
  return {pass, detail};
}

Outcome dual_ema_ablation(SuiteRuns& runs) {
  bool pass = true;
  std::string detail;
  for (NoiseRegime regime : {NoiseRegime::random, NoiseRegime::dominant}) {
    detail += std::string(to_string(regime)) + ":";
    for (std::uint64_t seed : kSeeds) {
      const double smoothed = runs.get(regime, Method::adagc, seed).test_report.map;
      const double raw = runs.get(regime, Method::adagc, seed, StudentSource::raw).test_report.map;
      pass = pass && smoothed - raw > 0.01;
      detail += fmt(" s%llu %.4f vs %.4f;", static_cast<unsigned long long>(seed), smoothed, raw);
    }
    detail += "  ";
  }
  return {pass, detail + "[dual-EMA vs raw student]"};
}

// ---------------------------------------------------------------- 10

Outcome ema_closed_form() {
  SeededRng rng(3);
  std::vector<double> teacher0(64), student(64);
  for (double& v : teacher0) v = rng.normal(0.0, 1.0);
  for (double& v : student) v = rng.normal(0.0, 1.0);
  const double beta = 0.999;
  DualEmaState s = DualEmaState::init(teacher0, 1, 1, beta, 0.8, 0.5);
  for (int k = 0; k < 100; ++k) ema_update_weights(s, student);
  double worst = 0.0;
  for (std::size_t j = 0; j < student.size(); ++j) {
    const double expected = student[j] + (teacher0[j] - student[j]) * std::pow(beta, 100);
    worst = std::max(worst, std::abs(s.teacher[j] - expected));
  }
  return {worst <= 1e-12, fmt("k=100, max deviation %.3g", worst)};
}

// ---------------------------------------------------------------- 11

Outcome mixup_distribution() {
  SeededRng rng(17);
  const std::size_t rows = 1000, cols = 6;
  M x(rows, 3), y(rows, cols), t(rows, cols);
  for (double& v : x.values()) v = rng.normal(0.0, 1.0);
  for (std::size_t i = 0; i < rows; ++i) y(i, rng.uniform_index(cols)) = 1.0;
  for (double& v : t.values()) v = rng.uniform();
  std::vector<double> phis;
  std::size_t violations = 0;
  while (phis.size() < 100000) {
    const MixupBatch b = mixup_batch(x, y, t, rng, 1.0);
    phis.insert(phis.end(), b.phi.begin(), b.phi.end());
    for (std::size_t i = 0; i < rows; ++i) {
      const std::size_t j = b.partner[i];
      for (std::size_t c = 0; c < cols; ++c) {
        const auto outside = [](double v, double a, double bb) { return v < std::min(a, bb) || v > std::max(a, bb); };
        if (outside(b.y(i, c), y(i, c), y(j, c)) || outside(b.t(i, c), t(i, c), t(j, c))) ++violations;
      }
    }
  }
  const double p = oracle::ks_uniform_pvalue(phis);
  return {p > 0.01 && violations == 0,
          fmt("%zu draws, KS p = %.3f, %zu convexity violations", phis.size(), p, violations)};
}

// ---------------------------------------------------------------- 12

std::string read_text(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "adagc_acceptance_determinism";
  fs::remove_all(root);
  bool pass = true;
  std::string detail;
  for (NoiseRegime regime : {NoiseRegime::random, NoiseRegime::dominant}) {
    std::string texts[2][2];
    for (int run = 0; run < 2; ++run) {
      ExperimentSpec spec;
      spec.regime = regime;
      spec.config.seed = 42;
      spec.output_dir = root / (std::string(to_string(regime)) + std::to_string(run));
      run_experiment(spec);
      texts[run][0] = read_text(spec.output_dir / "metrics.json");
      texts[run][1] = read_text(spec.output_dir / "curves.csv");
    }
    const bool same = !texts[0][0].empty() && texts[0][0] == texts[1][0] && !texts[0][1].empty() &&
                      texts[0][1] == texts[1][1];
    pass = pass && same;
    detail += std::string(to_string(regime)) + (same ? ": identical  " : ": differ  ");
  }
  fs::remove_all(root);
  return {pass, detail + "[metrics.json, curves.csv]"};
}

}  // namespace

int main() {
  SuiteRuns runs;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradient_correctness},
      {"GC gradient sign law", gc_sign_law},
      {"metric oracle equivalence", metric_oracles},
      {"noisy precision/recall identity", noisy_metric_identity},
      {"random-noise mAP underestimate", [] { return monte_carlo(NoiseRegime::random); }},
      {"dominant-noise mAP overestimate", [] { return monte_carlo(NoiseRegime::dominant); }},
      {"trigger near clean peak", [&] { return trigger_near_clean_peak(runs); }},
      {"method ordering", [&] { return method_ordering(runs); }},
      {"dual-EMA ablation", [&] { return dual_ema_ablation(runs); }},
      {"EMA closed form", ema_closed_form},
      {"Mixup distribution", mixup_distribution},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("[%s] %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
