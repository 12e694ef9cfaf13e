#pragma once

// One-directory-per-run experiment driver shared by the CLI and the
// acceptance suite.

#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "adagc/dataset.hpp"
#include "adagc/noisesim.hpp"
#include "adagc/trainer.hpp"

namespace adagc {

/// Directory written by export_dataset with prefixes train, val and test.
struct CsvSource {
  std::filesystem::path dir;
};

struct ExperimentSpec {
  std::variant<SyntheticSpec, CsvSource> data = SyntheticSpec{};
  NoiseRegime regime = NoiseRegime::random;
  TrainConfig config;
  std::optional<std::uint64_t> noise_seed;  // defaults to config.seed
  std::filesystem::path output_dir;
  bool emit_curves = true;
};

/// Replaces y_observed according to the regime. NoiseRegime::none leaves the
/// dataset untouched.
void apply_noise(MultiLabelDataset& ds, NoiseRegime regime, SeededRng& rng);

/// Loads or generates the splits and corrupts train and val for the regime.
DatasetSplits prepare_data(const ExperimentSpec& spec);

struct ExperimentResult {
  TrainResult train;
  FlipRateTable flip_rates;
};

/// Writes config.json, metrics.json, curves.csv, fliprates.csv and
/// checkpoint.json into spec.output_dir.
ExperimentResult run_experiment(const ExperimentSpec& spec);

void write_curves_csv(const std::filesystem::path& path, const std::vector<EpochLog>& log);
std::vector<EpochLog> read_curves_csv(const std::filesystem::path& path);

/// Assigns a TrainConfig field by its flag name (kebab or snake case).
void set_config_field(TrainConfig& config, std::string_view name, const std::string& value);

struct GridAxis {
  std::string key;
  std::vector<std::string> values;
};

/// Parses "key=v1,v2,...".
GridAxis parse_grid_axis(std::string_view text);

/// Runs the cartesian product of the axes, one subdirectory per cell named
/// "key=value" (joined with '_' for several axes). jobs > 1 runs cells
/// concurrently; every cell owns its RNG and output directory.
std::vector<std::filesystem::path> run_grid(const ExperimentSpec& base,
                                            const std::vector<GridAxis>& axes,
                                            std::size_t jobs = 1);

}  // namespace adagc
