#include "adagc/noisesim.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

namespace adagc {

namespace {

void check_true_labels(const LabelMatrix& y_true, const char* op) {
  require(is_binary(y_true), ErrorKind::invalid_data, std::string(op) + ": labels must be binary");
  for (std::size_t i = 0; i < y_true.rows(); ++i) {
    bool any = false;
    for (double v : y_true.row(i)) any = any || v == 1.0;
    if (!any)
      throw Error(ErrorKind::invalid_data,
                  std::string(op) + ": row " + std::to_string(i) + " has no positive label");
  }
}

}  // namespace

std::string_view to_string(NoiseRegime regime) {
  switch (regime) {
    case NoiseRegime::none: return "none";
    case NoiseRegime::random: return "random";
    case NoiseRegime::dominant: return "dominant";
  }
  return "none";
}

NoiseRegime parse_noise_regime(std::string_view name) {
  if (name == "none") return NoiseRegime::none;
  if (name == "random") return NoiseRegime::random;
  if (name == "dominant") return NoiseRegime::dominant;
  throw Error(ErrorKind::invalid_argument, "unknown noise regime '" + std::string(name) + "'");
}

LabelMatrix simulate_random_spml(const LabelMatrix& y_true, SeededRng& rng) {
  check_true_labels(y_true, "simulate_random_spml");
  LabelMatrix out(y_true.rows(), y_true.cols());
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < y_true.rows(); ++i) {
    candidates.clear();
    for (std::size_t c = 0; c < y_true.cols(); ++c)
      if (y_true(i, c) == 1.0) candidates.push_back(c);
    const std::size_t pick = candidates.size() == 1 ? 0 : rng.uniform_index(candidates.size());
    out(i, candidates[pick]) = 1.0;
  }
  return out;
}

void validate_extents(const LabelMatrix& y_true, const ExtentMatrix& extents) {
  require_same_shape(y_true, extents, "extents vs labels");
  for (std::size_t i = 0; i < y_true.rows(); ++i) {
    double total = 0.0;
    for (std::size_t c = 0; c < y_true.cols(); ++c) {
      const double e = extents(i, c);
      const bool positive = y_true(i, c) == 1.0;
      if (!(e >= 0.0) || !std::isfinite(e))
        throw Error(ErrorKind::invalid_data, "extent at row " + std::to_string(i) + ", class " +
                                                 std::to_string(c) + " is negative or non-finite");
      if ((e > 0.0) != positive)
        throw Error(ErrorKind::invalid_data, "extent support differs from true labels at row " +
                                                 std::to_string(i) + ", class " + std::to_string(c));
      total += e;
    }
    if (std::abs(total - 1.0) > 1e-6)
      throw Error(ErrorKind::invalid_data,
                  "extents of row " + std::to_string(i) + " sum to " + std::to_string(total));
  }
}

LabelMatrix simulate_dominant_spml(const LabelMatrix& y_true, const ExtentMatrix& extents) {
  check_true_labels(y_true, "simulate_dominant_spml");
  validate_extents(y_true, extents);
  LabelMatrix out(y_true.rows(), y_true.cols());
  for (std::size_t i = 0; i < y_true.rows(); ++i) {
    std::size_t best = y_true.cols();
    for (std::size_t c = 0; c < y_true.cols(); ++c) {
      if (y_true(i, c) != 1.0) continue;
      if (best == y_true.cols() || extents(i, c) > extents(i, best)) best = c;
    }
    out(i, best) = 1.0;
  }
  return out;
}

FlipRateTable compute_flip_rates(const LabelMatrix& y_true, const LabelMatrix& y_observed) {
  require_same_shape(y_true, y_observed, "compute_flip_rates");
  require(is_binary(y_true) && is_binary(y_observed), ErrorKind::invalid_data,
          "compute_flip_rates: labels must be binary");
  const std::size_t C = y_true.cols();
  FlipRateTable t;
  t.support.assign(C, 0);
  t.observed.assign(C, 0);
  for (std::size_t i = 0; i < y_true.rows(); ++i) {
    for (std::size_t c = 0; c < C; ++c) {
      if (y_observed(i, c) > y_true(i, c))
        throw Error(ErrorKind::invalid_data, "observed positive at row " + std::to_string(i) +
                                                 ", class " + std::to_string(c) +
                                                 " is not a true positive");
      t.support[c] += y_true(i, c) == 1.0;
      t.observed[c] += y_observed(i, c) == 1.0;
    }
  }
  t.beta.resize(C);
  std::size_t total_true = 0, total_obs = 0, supported = 0;
  double beta_sum = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    total_true += t.support[c];
    total_obs += t.observed[c];
    if (t.support[c] == 0) continue;
    const double b =
        1.0 - static_cast<double>(t.observed[c]) / static_cast<double>(t.support[c]);
    t.beta[c] = b;
    beta_sum += b;
    ++supported;
  }
  t.micro = total_true == 0
                ? 0.0
                : 1.0 - static_cast<double>(total_obs) / static_cast<double>(total_true);
  t.macro = supported == 0 ? 0.0 : beta_sum / static_cast<double>(supported);
  return t;
}

void write_flip_rates_csv(std::ostream& os, const FlipRateTable& t) {
  os << "class,beta,support\n";
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t c = 0; c < t.support.size(); ++c) {
    os << c << ',';
    if (t.beta[c]) os << *t.beta[c];
    os << ',' << t.support[c] << '\n';
  }
}

FlipRateTable read_flip_rates_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "class,beta,support")
    throw Error(ErrorKind::invalid_data, "flip-rate CSV: missing header 'class,beta,support'");
  FlipRateTable t;
  std::size_t line_no = 1;
  double beta_sum = 0.0, weighted_obs = 0.0;
  std::size_t supported = 0, total = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cls, beta, support;
    if (!std::getline(ls, cls, ',') || !std::getline(ls, beta, ',') || !std::getline(ls, support))
      throw Error(ErrorKind::invalid_data, "flip-rate CSV line " + std::to_string(line_no) +
                                               ": expected 3 fields");
    try {
      const std::size_t s = std::stoul(support);
      t.support.push_back(s);
      if (beta.empty()) {
        t.beta.emplace_back();
        t.observed.push_back(0);
      } else {
        const double b = std::stod(beta);
        t.beta.emplace_back(b);
        const double obs = (1.0 - b) * static_cast<double>(s);
        t.observed.push_back(static_cast<std::size_t>(std::llround(obs)));
        beta_sum += b;
        weighted_obs += obs;
        ++supported;
        total += s;
      }
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::invalid_data,
                  "flip-rate CSV line " + std::to_string(line_no) + ": malformed number");
    }
  }
  t.macro = supported == 0 ? 0.0 : beta_sum / static_cast<double>(supported);
  t.micro = total == 0 ? 0.0 : 1.0 - weighted_obs / static_cast<double>(total);
  return t;
}

}  // namespace adagc
