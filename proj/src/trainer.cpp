#include "adagc/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace adagc {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::adagc: return "adagc";
    case Method::an: return "an";
    case Method::an_ls: return "an_ls";
    case Method::wan: return "wan";
    case Method::epr: return "epr";
    case Method::iun: return "iun";
    case Method::gt: return "gt";
  }
  return "adagc";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::adagc, Method::an, Method::an_ls, Method::wan, Method::epr,
                   Method::iun, Method::gt})
    if (to_string(m) == name) return m;
  throw Error(ErrorKind::invalid_argument, "unknown method '" + std::string(name) + "'");
}

std::string_view to_string(Stage s) { return s == Stage::warmup ? "warmup" : "gc"; }

void validate(const TrainConfig& c) {
  const auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  require(c.lambda >= 0.0, ErrorKind::invalid_argument, "lambda must be >= 0");
  require(unit(c.beta_t) && unit(c.beta_s) && unit(c.gamma), ErrorKind::invalid_argument,
          "beta_t, beta_s and gamma must lie in [0,1]");
  require(c.method != Method::adagc || c.mixup_alpha > 0.0, ErrorKind::invalid_argument,
          "mixup_alpha must be > 0 for adagc");
  require(c.patience >= 1, ErrorKind::invalid_argument, "patience must be >= 1");
  require(c.eps_smooth >= 0.0 && c.eps_smooth < 0.5, ErrorKind::invalid_argument,
          "eps_smooth must lie in [0, 0.5)");
  require(!c.w_neg || (*c.w_neg > 0.0 && *c.w_neg <= 1.0), ErrorKind::invalid_argument,
          "w_neg must lie in (0, 1]");
  require(!c.k_expected || *c.k_expected > 0.0, ErrorKind::invalid_argument,
          "k_expected must be > 0");
  require(c.lambda_epr >= 0.0, ErrorKind::invalid_argument, "lambda_epr must be >= 0");
  require(c.epochs >= 1, ErrorKind::invalid_argument, "epochs must be >= 1");
  require(c.batch_size >= 1, ErrorKind::invalid_argument, "batch_size must be >= 1");
  require(c.lr > 0.0, ErrorKind::invalid_argument, "lr must be > 0");
  require(c.threshold > 0.0 && c.threshold < 1.0, ErrorKind::invalid_argument,
          "threshold must lie in (0,1)");
}

nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json j{{"method", to_string(c.method)},
                   {"lambda", c.lambda},
                   {"beta_t", c.beta_t},
                   {"beta_s", c.beta_s},
                   {"gamma", c.gamma},
                   {"mixup_alpha", c.mixup_alpha},
                   {"patience", c.patience},
                   {"eps_smooth", c.eps_smooth},
                   {"lambda_epr", c.lambda_epr},
                   {"epochs", c.epochs},
                   {"batch_size", c.batch_size},
                   {"lr", c.lr},
                   {"seed", c.seed},
                   {"threshold", c.threshold},
                   {"hidden", c.hidden},
                   {"student_source", c.student_source == StudentSource::smoothed ? "smoothed" : "raw"},
                   {"mixup", c.mixup}};
  j["w_neg"] = c.w_neg ? nlohmann::json(*c.w_neg) : nlohmann::json(nullptr);
  j["k_expected"] = c.k_expected ? nlohmann::json(*c.k_expected) : nlohmann::json(nullptr);
  j["fixed_warmup_epochs"] =
      c.fixed_warmup_epochs ? nlohmann::json(*c.fixed_warmup_epochs) : nlohmann::json(nullptr);
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.method = parse_method(j.at("method").get<std::string>());
    c.lambda = j.at("lambda");
    c.beta_t = j.at("beta_t");
    c.beta_s = j.at("beta_s");
    c.gamma = j.at("gamma");
    c.mixup_alpha = j.at("mixup_alpha");
    c.patience = j.at("patience");
    c.eps_smooth = j.at("eps_smooth");
    c.lambda_epr = j.at("lambda_epr");
    c.epochs = j.at("epochs");
    c.batch_size = j.at("batch_size");
    c.lr = j.at("lr");
    c.seed = j.at("seed");
    c.threshold = j.at("threshold");
    c.hidden = j.at("hidden");
    c.student_source =
        j.at("student_source").get<std::string>() == "raw" ? StudentSource::raw : StudentSource::smoothed;
    c.mixup = j.at("mixup");
    if (!j.at("w_neg").is_null()) c.w_neg = j.at("w_neg").get<double>();
    if (!j.at("k_expected").is_null()) c.k_expected = j.at("k_expected").get<double>();
    if (!j.at("fixed_warmup_epochs").is_null())
      c.fixed_warmup_epochs = j.at("fixed_warmup_epochs").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::invalid_data, std::string("malformed train config: ") + e.what());
  }
  validate(c);
  return c;
}

DetectorState detect_early_learning(DetectorState s, double map, std::size_t patience) {
  require(map >= 0.0 && map <= 1.0, ErrorKind::invalid_argument, "mAP must lie in [0,1]");
  require(patience >= 1, ErrorKind::invalid_argument, "patience must be >= 1");
  if (s.triggered) return s;
  const std::size_t epoch = s.observed++;
  if (map > s.best_map) {
    s.best_map = map;
    s.best_epoch = epoch;
    s.since_improvement = 0;
    return s;
  }
  if (++s.since_improvement >= patience) {
    s.triggered = true;
    s.trigger_epoch = epoch;
  }
  return s;
}

MixupBatch mixup_with(const DenseMatrix& x, const LabelMatrix& y, const PseudoLabelMatrix& t,
                      std::vector<std::size_t> partner, std::vector<double> phi) {
  const std::size_t n = x.rows();
  require(n > 0, ErrorKind::invalid_argument, "mixup of an empty batch");
  if (y.rows() != n) throw_dimension_mismatch("mixup labels rows", n, y.rows());
  if (t.rows() != n) throw_dimension_mismatch("mixup pseudo-label rows", n, t.rows());
  if (partner.size() != n) throw_dimension_mismatch("mixup partners", n, partner.size());
  if (phi.size() != n) throw_dimension_mismatch("mixup coefficients", n, phi.size());
  MixupBatch out{DenseMatrix(n, x.cols()), LabelMatrix(n, y.cols()), PseudoLabelMatrix(n, t.cols()),
                 std::move(phi), std::move(partner)};
  // Labels and pseudo-labels are clamped to the segment between their two
  // sources so rounding never leaves the convex hull.
  const auto blend = [](const DenseMatrix& src, DenseMatrix& dst, std::size_t i, std::size_t j,
                        double f, bool clamp) {
    auto a = src.row(i);
    auto b = src.row(j);
    auto d = dst.row(i);
    for (std::size_t k = 0; k < d.size(); ++k) {
      d[k] = f * a[k] + (1.0 - f) * b[k];
      if (clamp) d[k] = std::clamp(d[k], std::min(a[k], b[k]), std::max(a[k], b[k]));
    }
  };
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = out.partner[i];
    require(j < n, ErrorKind::invalid_argument, "mixup partner out of range");
    const double f = out.phi[i];
    require(f >= 0.0 && f <= 1.0, ErrorKind::invalid_argument, "mixup coefficient outside [0,1]");
    blend(x, out.x, i, j, f, false);
    blend(y, out.y, i, j, f, true);
    blend(t, out.t, i, j, f, true);
  }
  return out;
}

MixupBatch mixup_batch(const DenseMatrix& x, const LabelMatrix& y, const PseudoLabelMatrix& t,
                       SeededRng& rng, double alpha) {
  require(alpha > 0.0, ErrorKind::invalid_argument, "mixup alpha must be > 0");
  const std::size_t n = x.rows();
  require(n > 0, ErrorKind::invalid_argument, "mixup of an empty batch");
  std::vector<std::size_t> partner(n);
  std::vector<double> phi(n);
  for (std::size_t i = 0; i < n; ++i) {
    partner[i] = rng.uniform_index(n);
    phi[i] = rng.beta(alpha, alpha);
  }
  return mixup_with(x, y, t, std::move(partner), std::move(phi));
}

// ---------------------------------------------------------------------------

Trainer::Trainer(TrainConfig config, const MultiLabelDataset& train, const MultiLabelDataset& val) {
  validate(config);
  state_.config = std::move(config);
  state_.rng = SeededRng(state_.config.seed);
  std::vector<std::size_t> sizes{train.feature_dim()};
  if (state_.config.hidden > 0) sizes.push_back(state_.config.hidden);
  sizes.push_back(train.num_classes());
  state_.student = MlpModel::create(std::move(sizes), state_.rng);
  state_.ema = DualEmaState::init(state_.student.params, train.size(), train.num_classes(),
                                  state_.config.beta_t, state_.config.beta_s, state_.config.gamma);
  setup(train, val);
}

Trainer::Trainer(TrainState state, const MultiLabelDataset& train, const MultiLabelDataset& val)
    : state_(std::move(state)) {
  validate(state_.config);
  validate(state_.student);
  validate(state_.ema);
  require(state_.ema.smoothed.rows() == train.size(), ErrorKind::invalid_data,
          "checkpoint does not match the training set size");
  setup(train, val);
}

void Trainer::setup(const MultiLabelDataset& train, const MultiLabelDataset& val) {
  validate(train);
  validate(val);
  const TrainConfig& c = state_.config;
  require(train.size() > 0 && val.size() > 0, ErrorKind::invalid_data, "empty train or val set");
  require(train.feature_dim() == val.feature_dim() && train.num_classes() == val.num_classes(),
          ErrorKind::invalid_data, "train and val sets disagree on feature dim or class count");
  require(state_.student.input_size() == train.feature_dim() &&
              state_.student.output_size() == train.num_classes(),
          ErrorKind::invalid_data, "model shape does not match the dataset");
  train_ = &train;
  val_ = &val;
  if (c.method == Method::gt) {
    train_targets_ = train.y_true;
    val_targets_ = val.y_true;
  } else {
    require(train.has_observed() && val.has_observed(), ErrorKind::invalid_data,
            std::string(to_string(c.method)) +
                " needs single-positive observed labels on train and val");
    train_targets_ = train.y_observed;
    val_targets_ = val.y_observed;
  }
  if (c.method == Method::iun) {
    true_negatives_ = LabelMatrix(train.size(), train.num_classes());
    for (std::size_t k = 0; k < train.y_true.size(); ++k)
      true_negatives_.values()[k] = 1.0 - train.y_true.values()[k];
  }
  const std::size_t C = train.num_classes();
  w_neg_ = c.w_neg.value_or(C > 1 ? 1.0 / static_cast<double>(C - 1) : 1.0);
  if (c.k_expected) {
    k_expected_ = *c.k_expected;
  } else {
    const auto v = train.y_true.values();
    k_expected_ = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(train.size());
  }
  k_expected_ = std::min(k_expected_, static_cast<double>(C));
}

MlpModel Trainer::teacher() const {
  MlpModel t = state_.student;
  t.params = state_.ema.teacher;
  return t;
}

MlpModel Trainer::final_model() const {
  return state_.config.method == Method::adagc ? teacher() : state_.student;
}

LossValue Trainer::baseline_loss(const DenseMatrix& p, std::span<const std::size_t> idx) const {
  const LabelMatrix y = train_targets_.gather_rows(idx);
  const TrainConfig& c = state_.config;
  constexpr auto mean = Reduction::mean;
  switch (c.method) {
    case Method::adagc:
    case Method::an:
    case Method::gt: return loss_an(p, y, mean);
    case Method::an_ls: return loss_an_ls(p, y, c.eps_smooth, mean);
    case Method::wan: return loss_wan(p, y, w_neg_, mean);
    case Method::epr: return loss_epr(p, y, k_expected_, c.lambda_epr, mean);
    case Method::iun: return loss_iun(p, y, true_negatives_.gather_rows(idx), mean);
  }
  return loss_an(p, y, mean);
}

double Trainer::warmup_step(std::span<const std::size_t> idx) {
  const DenseMatrix x = train_->features.gather_rows(idx);
  const DenseMatrix p = sigmoid(forward(state_.student, x));
  ema_update_predictions(state_.ema, idx, p);
  const LossValue loss = baseline_loss(p, idx);
  const auto grad = backward(state_.student, x, loss.d_logits);
  sgd_step(state_.student, grad, state_.config.lr);
  ema_update_weights(state_.ema, state_.student.params);
  return loss.value;
}

double Trainer::gc_step(std::span<const std::size_t> idx) {
  const TrainConfig& c = state_.config;
  const DenseMatrix x = train_->features.gather_rows(idx);
  const LabelMatrix y = train_targets_.gather_rows(idx);

  // Pseudo-labels come from forward-only passes on the un-mixed batch.
  const DenseMatrix p_student = sigmoid(forward(state_.student, x));
  ema_update_predictions(state_.ema, idx, p_student);
  const DenseMatrix p_teacher = sigmoid(forward(teacher(), x));
  const PseudoLabelMatrix t = c.student_source == StudentSource::smoothed
                                  ? make_pseudo_labels(state_.ema, p_teacher, idx)
                                  : fuse_predictions(c.gamma, p_teacher, p_student);

  LossValue loss;
  DenseMatrix x_train;
  if (c.mixup) {
    MixupBatch mixed = mixup_batch(x, y, t, state_.rng, c.mixup_alpha);
    const DenseMatrix p = sigmoid(forward(state_.student, mixed.x));
    loss = loss_adagc(p, mixed.y, mixed.t, c.lambda, Reduction::mean);
    x_train = std::move(mixed.x);
  } else {
    const DenseMatrix p = sigmoid(forward(state_.student, x));
    loss = loss_adagc(p, y, t, c.lambda, Reduction::mean);
    x_train = x;
  }
  const auto grad = backward(state_.student, x_train, loss.d_logits);
  sgd_step(state_.student, grad, c.lr);
  ema_update_weights(state_.ema, state_.student.params);
  return loss.value;
}

void Trainer::run_epoch() {
  require(!finished(), ErrorKind::invalid_argument, "training already finished");
  const auto start = std::chrono::steady_clock::now();
  const TrainConfig& c = state_.config;
  const std::size_t n = train_->size();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  state_.rng.shuffle(order);

  double loss_sum = 0.0;
  for (std::size_t begin = 0; begin < n; begin += c.batch_size) {
    const std::size_t len = std::min(c.batch_size, n - begin);
    const std::span<const std::size_t> idx(order.data() + begin, len);
    const double l = state_.stage == Stage::gc ? gc_step(idx) : warmup_step(idx);
    loss_sum += l * static_cast<double>(len);
  }

  EpochLog entry;
  entry.epoch = state_.epoch;
  entry.stage = state_.stage;
  entry.train_loss = loss_sum / static_cast<double>(n);
  const DenseMatrix p_teacher = sigmoid(forward(teacher(), val_->features));
  const DenseMatrix p_student = sigmoid(forward(state_.student, val_->features));
  entry.noisy_val_map = mean_average_precision(p_teacher, val_targets_).map;
  entry.student_noisy_val_map = mean_average_precision(p_student, val_targets_).map;
  entry.clean_val_map = mean_average_precision(p_teacher, val_->y_true).map;

  state_.detector = detect_early_learning(state_.detector, entry.noisy_val_map, c.patience);
  if (c.method == Method::adagc && state_.stage == Stage::warmup) {
    const bool switch_now = c.fixed_warmup_epochs ? state_.epoch + 1 >= *c.fixed_warmup_epochs
                                                  : state_.detector.triggered;
    if (switch_now) state_.stage = Stage::gc;
  }
  entry.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  state_.log.push_back(entry);
  ++state_.epoch;
}

void Trainer::run() {
  while (!finished()) run_epoch();
}

MetricReport evaluate(const MlpModel& model, const MultiLabelDataset& ds, double threshold) {
  validate(ds);
  return compute_metric_report(sigmoid(forward(model, ds.features)), ds.y_true, threshold);
}

TrainResult train(const TrainConfig& config, const MultiLabelDataset& train_set,
                  const MultiLabelDataset& val_set, const MultiLabelDataset& test_set) {
  Trainer trainer(config, train_set, val_set);
  trainer.run();
  TrainResult r;
  r.student = trainer.state().student;
  r.teacher = trainer.teacher();
  r.log = trainer.state().log;
  r.detector = trainer.state().detector;
  r.test_report = evaluate(trainer.final_model(), test_set, config.threshold);
  return r;
}

}  // namespace adagc
