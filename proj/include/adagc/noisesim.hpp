#pragma once

// Single-positive annotation simulators and flip-rate statistics.

#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include "adagc/losses.hpp"
#include "adagc/ndcore.hpp"

namespace adagc {

enum class NoiseRegime { none, random, dominant };

std::string_view to_string(NoiseRegime regime);
NoiseRegime parse_noise_regime(std::string_view name);

/// Row-normalized class extents: positive exactly on the true labels.
using ExtentMatrix = DenseMatrix;

struct FlipRateTable {
  std::vector<std::optional<double>> beta;  // absent for classes without support
  std::vector<std::size_t> support;         // true positives per class
  std::vector<std::size_t> observed;        // retained positives per class
  double micro = 0.0;
  double macro = 0.0;                       // mean over supported classes
};

/// Every row keeps one of its true positives, chosen uniformly.
LabelMatrix simulate_random_spml(const LabelMatrix& y_true, SeededRng& rng);

/// Every row keeps its true positive of largest extent (lowest index on ties).
LabelMatrix simulate_dominant_spml(const LabelMatrix& y_true, const ExtentMatrix& extents);

void validate_extents(const LabelMatrix& y_true, const ExtentMatrix& extents);

/// Requires y_observed <= y_true cellwise.
FlipRateTable compute_flip_rates(const LabelMatrix& y_true, const LabelMatrix& y_observed);

/// CSV with header "class,beta,support"; beta is empty for absent classes.
void write_flip_rates_csv(std::ostream& os, const FlipRateTable& table);
FlipRateTable read_flip_rates_csv(std::istream& is);

}  // namespace adagc
