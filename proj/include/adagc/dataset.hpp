#pragma once

// Multi-label datasets: synthetic generation and CSV exchange.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "adagc/losses.hpp"
#include "adagc/ndcore.hpp"
#include "adagc/noisesim.hpp"

namespace adagc {

struct MultiLabelDataset {
  DenseMatrix features;    // n x d'
  LabelMatrix y_true;      // n x C, binary, >= 1 positive per row
  ExtentMatrix extents;    // n x C or empty
  LabelMatrix y_observed;  // n x C single-positive, or empty

  std::size_t size() const { return features.rows(); }
  std::size_t feature_dim() const { return features.cols(); }
  std::size_t num_classes() const { return y_true.cols(); }
  bool has_extents() const { return !extents.empty(); }
  bool has_observed() const { return !y_observed.empty(); }

  MultiLabelDataset subset(std::span<const std::size_t> indices) const;
};

/// Checks shapes, label binarity, row positivity and extent support.
void validate(const MultiLabelDataset& ds);

struct SyntheticSpec {
  std::size_t n = 4000;              // split 2:1:1 into train/val/test
  std::size_t num_classes = 19;
  std::size_t feature_dim = 32;
  double separation = 20.0;          // prototype norm relative to unit noise
  double noise = 1.5;                // per-feature Gaussian noise stddev
  double mean_cardinality = 2.9;     // mean true positives per row
  double dirichlet_concentration = 8.0;
  double class_skew = 0.5;           // class frequency ~ (c+1)^-skew
  std::uint64_t seed = 0;
};

void validate(const SyntheticSpec& spec);

struct DatasetSplits {
  MultiLabelDataset train;
  MultiLabelDataset val;
  MultiLabelDataset test;
};

/// Cardinality 1 + Binomial(C-1, (m-1)/(C-1)); classes drawn without
/// replacement proportionally to class_weights.
LabelMatrix sample_label_matrix(std::size_t n, std::size_t num_classes, double mean_cardinality,
                                std::span<const double> class_weights, SeededRng& rng);

std::vector<double> class_frequency_weights(std::size_t num_classes, double skew);

/// Features are extent-weighted mixtures of per-class prototypes plus noise.
DatasetSplits generate_synthetic(const SyntheticSpec& spec);

// --- CSV ------------------------------------------------------------------

/// Headerless numeric CSV. Labels are written as integers.
void write_matrix_csv(std::ostream& os, const DenseMatrix& m, bool integral = false);
void write_matrix_csv(const std::filesystem::path& path, const DenseMatrix& m,
                      bool integral = false);

/// Parses a headerless numeric CSV; errors name the line and column.
DenseMatrix read_matrix_csv(std::istream& is, const std::string& source_name);
DenseMatrix read_matrix_csv(const std::filesystem::path& path);

MultiLabelDataset ingest_csv(const std::filesystem::path& features,
                             const std::filesystem::path& labels,
                             const std::optional<std::filesystem::path>& extents = std::nullopt);

/// Writes <prefix>_features.csv, <prefix>_labels.csv and, when present,
/// <prefix>_extents.csv and <prefix>_observed.csv.
void export_dataset(const std::filesystem::path& dir, const std::string& prefix,
                    const MultiLabelDataset& ds);

/// Inverse of export_dataset; optional files are picked up when they exist.
MultiLabelDataset load_dataset(const std::filesystem::path& dir, const std::string& prefix);

}  // namespace adagc
