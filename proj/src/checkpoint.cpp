#include "adagc/checkpoint.hpp"

#include <fstream>

namespace adagc {

namespace {

nlohmann::json matrix_json(const DenseMatrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.storage()}};
}

DenseMatrix matrix_from(const nlohmann::json& j) {
  return DenseMatrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                     j.at("data").get<std::vector<double>>());
}

}  // namespace

nlohmann::json checkpoint_to_json(const TrainState& s) {
  nlohmann::json log = nlohmann::json::array();
  for (const EpochLog& e : s.log)
    log.push_back({{"epoch", e.epoch},
                   {"stage", to_string(e.stage)},
                   {"train_loss", e.train_loss},
                   {"noisy_val_map", e.noisy_val_map},
                   {"student_noisy_val_map", e.student_noisy_val_map},
                   {"clean_val_map", e.clean_val_map},
                   {"wall_seconds", e.wall_seconds}});
  std::vector<int> visited(s.ema.visited.begin(), s.ema.visited.end());
  nlohmann::json detector{{"best_map", s.detector.best_map},
                          {"best_epoch", s.detector.best_epoch},
                          {"since_improvement", s.detector.since_improvement},
                          {"observed", s.detector.observed},
                          {"triggered", s.detector.triggered}};
  detector["trigger_epoch"] = s.detector.trigger_epoch ? nlohmann::json(*s.detector.trigger_epoch)
                                                       : nlohmann::json(nullptr);
  return {{"format", "adagc-checkpoint"},
          {"version", kCheckpointVersion},
          {"config", to_json(s.config)},
          {"epoch", s.epoch},
          {"stage", to_string(s.stage)},
          {"layer_sizes", s.student.layer_sizes},
          {"hidden_activation", s.student.hidden_activation == Activation::tanh ? "tanh" : "identity"},
          {"student", s.student.params},
          {"teacher", s.ema.teacher},
          {"smoothed_predictions", matrix_json(s.ema.smoothed)},
          {"visited", visited},
          {"detector", detector},
          {"rng_seed", s.rng.seed()},
          {"rng_state", s.rng.save_state()},
          {"log", log}};
}

TrainState checkpoint_from_json(const nlohmann::json& j) {
  TrainState s;
  try {
    if (j.at("format") != "adagc-checkpoint")
      throw Error(ErrorKind::invalid_data, "not an adagc checkpoint");
    if (j.at("version") != kCheckpointVersion)
      throw Error(ErrorKind::invalid_data,
                  "unsupported checkpoint version " + j.at("version").dump());
    s.config = train_config_from_json(j.at("config"));
    s.epoch = j.at("epoch");
    s.stage = j.at("stage") == "gc" ? Stage::gc : Stage::warmup;
    s.student.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    s.student.hidden_activation =
        j.at("hidden_activation") == "tanh" ? Activation::tanh : Activation::identity;
    s.student.params = j.at("student").get<std::vector<double>>();
    validate(s.student);
    s.ema.teacher = j.at("teacher").get<std::vector<double>>();
    if (s.ema.teacher.size() != s.student.params.size())
      throw_dimension_mismatch("checkpoint teacher parameters", s.student.params.size(),
                               s.ema.teacher.size());
    s.ema.smoothed = matrix_from(j.at("smoothed_predictions"));
    const auto visited = j.at("visited").get<std::vector<int>>();
    s.ema.visited.assign(visited.begin(), visited.end());
    s.ema.beta_t = s.config.beta_t;
    s.ema.beta_s = s.config.beta_s;
    s.ema.gamma = s.config.gamma;
    validate(s.ema);
    const auto& d = j.at("detector");
    s.detector.best_map = d.at("best_map");
    s.detector.best_epoch = d.at("best_epoch");
    s.detector.since_improvement = d.at("since_improvement");
    s.detector.observed = d.at("observed");
    s.detector.triggered = d.at("triggered");
    if (!d.at("trigger_epoch").is_null()) s.detector.trigger_epoch = d.at("trigger_epoch").get<std::size_t>();
    s.rng = SeededRng(j.at("rng_seed").get<std::uint64_t>());
    s.rng.load_state(j.at("rng_state").get<std::string>());
    for (const auto& e : j.at("log")) {
      EpochLog entry;
      entry.epoch = e.at("epoch");
      entry.stage = e.at("stage") == "gc" ? Stage::gc : Stage::warmup;
      entry.train_loss = e.at("train_loss");
      entry.noisy_val_map = e.at("noisy_val_map");
      entry.student_noisy_val_map = e.at("student_noisy_val_map");
      entry.clean_val_map = e.at("clean_val_map");
      entry.wall_seconds = e.at("wall_seconds");
      s.log.push_back(entry);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::invalid_data, std::string("malformed checkpoint: ") + e.what());
  }
  return s;
}

void save_checkpoint(const std::filesystem::path& path, const TrainState& state) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::io, "cannot open '" + path.string() + "' for writing");
  os << checkpoint_to_json(state).dump() << '\n';
  if (!os) throw Error(ErrorKind::io, "failed writing '" + path.string() + "'");
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::io, "cannot open '" + path.string() + "'");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::invalid_data, path.string() + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace adagc
