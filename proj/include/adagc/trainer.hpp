#pragma once

// Two-stage training: a warm-up on the baseline loss while the teacher's
// noisy-validation mAP is watched, then gradient calibration on Mixup batches
// with dual-EMA pseudo-labels. Baseline methods run the warm-up stage only.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "adagc/dataset.hpp"
#include "adagc/dualema.hpp"
#include "adagc/losses.hpp"
#include "adagc/metrics.hpp"
#include "adagc/ndcore.hpp"
#include "json.hpp"

namespace adagc {

enum class Method { adagc, an, an_ls, wan, epr, iun, gt };

std::string_view to_string(Method method);
Method parse_method(std::string_view name);

/// Where the student half of the pseudo-label comes from.
enum class StudentSource { smoothed, raw };

struct TrainConfig {
  Method method = Method::adagc;
  double lambda = 10.0;
  double beta_t = 0.999;
  double beta_s = 0.8;
  double gamma = 0.5;
  double mixup_alpha = 1.0;
  std::size_t patience = 3;
  double eps_smooth = 0.1;
  std::optional<double> w_neg;       // default 1 / (C - 1)
  std::optional<double> k_expected;  // default: mean true cardinality of the training set
  double lambda_epr = 1.0;
  std::size_t epochs = 70;
  std::size_t batch_size = 32;
  double lr = 0.3;
  std::uint64_t seed = 0;
  double threshold = 0.5;
  std::size_t hidden = 64;  // 0 gives a linear model

  // Ablation switches.
  StudentSource student_source = StudentSource::smoothed;
  bool mixup = true;
  std::optional<std::size_t> fixed_warmup_epochs;  // replaces the detector when set
};

void validate(const TrainConfig& config);

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct DetectorState {
  double best_map = -1.0;
  std::size_t best_epoch = 0;
  std::size_t since_improvement = 0;
  std::size_t observed = 0;  // values seen so far
  bool triggered = false;
  std::optional<std::size_t> trigger_epoch;
};

/// Feeds one noisy-validation mAP value. A strict improvement resets the
/// patience counter; the detector fires once the counter reaches patience.
/// Values after the trigger are ignored.
DetectorState detect_early_learning(DetectorState state, double noisy_val_map,
                                    std::size_t patience);

struct MixupBatch {
  DenseMatrix x;
  LabelMatrix y;
  PseudoLabelMatrix t;
  std::vector<double> phi;
  std::vector<std::size_t> partner;
};

/// z~_i = phi_i z_i + (1 - phi_i) z_j for z in {x, y, t}; j uniform over the
/// batch and phi_i ~ Beta(alpha, alpha).
MixupBatch mixup_batch(const DenseMatrix& x, const LabelMatrix& y, const PseudoLabelMatrix& t,
                       SeededRng& rng, double alpha);

/// Mixup with given partners and coefficients.
MixupBatch mixup_with(const DenseMatrix& x, const LabelMatrix& y, const PseudoLabelMatrix& t,
                      std::vector<std::size_t> partner, std::vector<double> phi);

enum class Stage { warmup, gc };
std::string_view to_string(Stage stage);

struct EpochLog {
  std::size_t epoch = 0;
  Stage stage = Stage::warmup;
  double train_loss = 0.0;
  double noisy_val_map = 0.0;          // teacher, single-positive validation labels
  double student_noisy_val_map = 0.0;  // diagnostic
  double clean_val_map = 0.0;          // teacher on true labels, diagnostic only
  double wall_seconds = 0.0;
};

struct TrainState {
  TrainConfig config;
  std::size_t epoch = 0;  // completed epochs
  Stage stage = Stage::warmup;
  MlpModel student;
  DualEmaState ema;
  DetectorState detector;
  SeededRng rng;
  std::vector<EpochLog> log;
};

class Trainer {
 public:
  Trainer(TrainConfig config, const MultiLabelDataset& train, const MultiLabelDataset& val);
  /// Resumes from a saved state; datasets must match the ones it was built on.
  Trainer(TrainState state, const MultiLabelDataset& train, const MultiLabelDataset& val);

  void run_epoch();
  void run();
  bool finished() const { return state_.epoch >= state_.config.epochs; }

  const TrainState& state() const { return state_; }
  MlpModel teacher() const;
  /// The model that is evaluated and reported: the teacher for adagc, the
  /// student otherwise.
  MlpModel final_model() const;

 private:
  void setup(const MultiLabelDataset& train, const MultiLabelDataset& val);
  double warmup_step(std::span<const std::size_t> idx);
  double gc_step(std::span<const std::size_t> idx);
  LossValue baseline_loss(const DenseMatrix& p, std::span<const std::size_t> idx) const;

  TrainState state_;
  const MultiLabelDataset* train_ = nullptr;
  const MultiLabelDataset* val_ = nullptr;
  LabelMatrix train_targets_;  // observed labels, or true labels for gt
  LabelMatrix true_negatives_; // iun only
  LabelMatrix val_targets_;
  double w_neg_ = 1.0;
  double k_expected_ = 1.0;
};

struct TrainResult {
  MlpModel student;
  MlpModel teacher;
  std::vector<EpochLog> log;
  DetectorState detector;
  MetricReport test_report;
};

TrainResult train(const TrainConfig& config, const MultiLabelDataset& train_set,
                  const MultiLabelDataset& val_set, const MultiLabelDataset& test_set);

/// Probabilities of model on the dataset scored against its true labels.
MetricReport evaluate(const MlpModel& model, const MultiLabelDataset& dataset,
                      double threshold = 0.5);

}  // namespace adagc
