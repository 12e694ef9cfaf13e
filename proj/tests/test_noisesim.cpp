#include <sstream>

#include "adagc/dataset.hpp"
#include "adagc/noisesim.hpp"
#include "doctest.h"
#include "support/oracles.hpp"

using namespace adagc;
using M = DenseMatrix;

namespace {

// Exactly one positive per row, and it is a true positive.
bool satisfies_single_positive_rule(const M& y_true, const M& y_obs) {
  if (!is_single_positive(y_obs)) return false;
  for (std::size_t k = 0; k < y_obs.size(); ++k)
    if (y_obs.values()[k] > y_true.values()[k]) return false;
  return true;
}

}  // namespace

TEST_CASE("regime names") {
  CHECK(parse_noise_regime("random") == NoiseRegime::random);
  CHECK(to_string(NoiseRegime::dominant) == "dominant");
  CHECK_THROWS_AS(parse_noise_regime("manual"), Error);
}

TEST_CASE("random simulator examples") {
  SeededRng rng(1);
  CHECK(simulate_random_spml(M::from_rows({{1, 0, 0}}), rng) == M::from_rows({{1, 0, 0}}));
  for (int k = 0; k < 20; ++k) {
    const M out = simulate_random_spml(M::from_rows({{1, 1, 0}}), rng);
    CHECK(satisfies_single_positive_rule(M::from_rows({{1, 1, 0}}), out));
  }
  CHECK_THROWS_AS(simulate_random_spml(M::from_rows({{0, 0}}), rng), Error);
}

TEST_CASE("random simulator is uniform over true positives") {
  SeededRng rng(2);
  const std::size_t n = 100000;
  const M two(n, 2, 1.0);
  const M out = simulate_random_spml(two, rng);
  double zero = 0.0;
  for (std::size_t i = 0; i < n; ++i) zero += out(i, 0);
  CHECK(zero / static_cast<double>(n) == doctest::Approx(0.5).epsilon(0.02));

  const M three(n, 3, 1.0);
  const M out3 = simulate_random_spml(three, rng);
  std::vector<double> counts(3, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < 3; ++c) counts[c] += out3(i, c);
  double chi = 0.0;
  const double expected = static_cast<double>(n) / 3.0;
  for (double c : counts) chi += (c - expected) * (c - expected) / expected;
  CHECK(oracle::chi_square_pvalue(chi, 2.0) > 0.01);
}

TEST_CASE("dominant simulator examples") {
  const M y = M::from_rows({{1, 1}});
  CHECK(simulate_dominant_spml(y, M::from_rows({{0.7, 0.3}})) == M::from_rows({{1, 0}}));
  CHECK(simulate_dominant_spml(y, M::from_rows({{0.5, 0.5}})) == M::from_rows({{1, 0}}));
  CHECK(simulate_dominant_spml(y, M::from_rows({{0.2, 0.8}})) == M::from_rows({{0, 1}}));
  CHECK_THROWS_AS(simulate_dominant_spml(y, M::from_rows({{1.0, 0.0}})), Error);
  CHECK_THROWS_AS(simulate_dominant_spml(M::from_rows({{1, 0}}), M::from_rows({{0.5, 0.5}})), Error);
}

TEST_CASE("dominant noise hits small-extent classes harder") {
  SyntheticSpec spec;
  spec.n = 1000;
  spec.dirichlet_concentration = 1.0;
  spec.seed = 4;
  const DatasetSplits s = generate_synthetic(spec);
  MultiLabelDataset all = s.train;
  const M obs = simulate_dominant_spml(all.y_true, all.extents);
  CHECK(satisfies_single_positive_rule(all.y_true, obs));
  CHECK(simulate_dominant_spml(all.y_true, all.extents) == obs);  // deterministic

  // Per class: mean extent among its positives vs its flip rate.
  const FlipRateTable t = compute_flip_rates(all.y_true, obs);
  std::vector<std::pair<double, double>> extent_beta;
  for (std::size_t c = 0; c < all.num_classes(); ++c) {
    if (!t.beta[c] || t.support[c] < 20) continue;
    double e = 0.0;
    for (std::size_t i = 0; i < all.size(); ++i) e += all.extents(i, c);
    extent_beta.emplace_back(e / static_cast<double>(t.support[c]), *t.beta[c]);
  }
  std::sort(extent_beta.begin(), extent_beta.end());
  REQUIRE(extent_beta.size() >= 4);
  CHECK(extent_beta.front().second > extent_beta.back().second);
}

TEST_CASE("flip rate examples") {
  const M y = M::from_rows({{1, 1, 0}, {0, 1, 1}, {1, 0, 0}});
  const FlipRateTable same = compute_flip_rates(y, y);
  for (const auto& b : same.beta) CHECK(b.value() == 0.0);
  CHECK(same.micro == 0.0);

  M ten(10, 2, 0.0), kept(10, 2, 0.0);
  for (std::size_t i = 0; i < 10; ++i) ten(i, 0) = 1.0;
  for (std::size_t i = 0; i < 3; ++i) kept(i, 0) = 1.0;
  const FlipRateTable t = compute_flip_rates(ten, kept);
  CHECK(t.beta[0].value() == doctest::Approx(0.7).epsilon(1e-15));
  CHECK_FALSE(t.beta[1].has_value());
  CHECK(t.macro == doctest::Approx(0.7).epsilon(1e-15));

  CHECK_THROWS_AS(compute_flip_rates(M::from_rows({{1, 0}}), M::from_rows({{0, 1}})), Error);
}

TEST_CASE("micro flip rate tracks mean cardinality") {
  SeededRng rng(5);
  const auto weights = class_frequency_weights(19, 0.5);
  const M y = sample_label_matrix(20000, 19, 2.9, weights, rng);
  const FlipRateTable t = compute_flip_rates(y, simulate_random_spml(y, rng));
  double positives = 0.0;
  for (double v : y.values()) positives += v;
  CHECK(t.micro == doctest::Approx(1.0 - 20000.0 / positives).epsilon(1e-12));
  CHECK(t.micro == doctest::Approx(1.0 - 1.0 / 2.9).epsilon(0.02));

  // Retained positives weighted by support sum to the row count.
  double retained = 0.0;
  for (std::size_t c = 0; c < 19; ++c)
    if (t.beta[c]) retained += (1.0 - *t.beta[c]) * static_cast<double>(t.support[c]);
  CHECK(retained == doctest::Approx(20000.0).epsilon(1e-9));
}

TEST_CASE("flip-rate CSV round trip") {
  const M y = M::from_rows({{1, 1, 0}, {0, 1, 0}, {1, 1, 0}});
  const M obs = M::from_rows({{0, 1, 0}, {0, 1, 0}, {1, 0, 0}});
  const FlipRateTable t = compute_flip_rates(y, obs);
  std::stringstream ss;
  write_flip_rates_csv(ss, t);
  CHECK(ss.str().rfind("class,beta,support\n", 0) == 0);
  CHECK(ss.str().find("\n2,,0") != std::string::npos);
  const FlipRateTable back = read_flip_rates_csv(ss);
  CHECK(back.beta == t.beta);
  CHECK(back.support == t.support);
}
