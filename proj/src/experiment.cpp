#include "adagc/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <future>
#include <iomanip>
#include <limits>
#include <sstream>

#include "adagc/checkpoint.hpp"

namespace adagc {

void apply_noise(MultiLabelDataset& ds, NoiseRegime regime, SeededRng& rng) {
  switch (regime) {
    case NoiseRegime::none: return;
    case NoiseRegime::random: ds.y_observed = simulate_random_spml(ds.y_true, rng); return;
    case NoiseRegime::dominant:
      require(ds.has_extents(), ErrorKind::invalid_data,
              "dominant noise needs class extents for every sample");
      ds.y_observed = simulate_dominant_spml(ds.y_true, ds.extents);
      return;
  }
}

DatasetSplits prepare_data(const ExperimentSpec& spec) {
  DatasetSplits s;
  if (const auto* syn = std::get_if<SyntheticSpec>(&spec.data)) {
    s = generate_synthetic(*syn);
  } else {
    const auto& dir = std::get<CsvSource>(spec.data).dir;
    s.train = load_dataset(dir, "train");
    s.val = load_dataset(dir, "val");
    s.test = load_dataset(dir, "test");
  }
  SeededRng rng(spec.noise_seed.value_or(spec.config.seed));
  apply_noise(s.train, spec.regime, rng);
  apply_noise(s.val, spec.regime, rng);
  if (spec.regime == NoiseRegime::none && spec.config.method != Method::gt)
    require(s.train.has_observed() && s.val.has_observed(), ErrorKind::invalid_argument,
            "regime 'none' with method " + std::string(to_string(spec.config.method)) +
                " needs observed labels in the dataset files");
  return s;
}

void write_curves_csv(const std::filesystem::path& path, const std::vector<EpochLog>& log) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::io, "cannot open '" + path.string() + "' for writing");
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "epoch,stage,loss,noisy_val_map,student_noisy_val_map,clean_val_map\n";
  for (const EpochLog& e : log)
    os << e.epoch << ',' << to_string(e.stage) << ',' << e.train_loss << ',' << e.noisy_val_map
       << ',' << e.student_noisy_val_map << ',' << e.clean_val_map << '\n';
  if (!os) throw Error(ErrorKind::io, "failed writing '" + path.string() + "'");
}

std::vector<EpochLog> read_curves_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::io, "cannot open '" + path.string() + "'");
  std::string line;
  std::getline(is, line);
  if (line.rfind("epoch,stage,loss,noisy_val_map", 0) != 0)
    throw Error(ErrorKind::invalid_data, path.string() + ": unexpected header");
  std::vector<EpochLog> out;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string f[6];
    for (auto& field : f) std::getline(ls, field, ',');
    try {
      EpochLog e;
      e.epoch = std::stoul(f[0]);
      if (f[1] != "warmup" && f[1] != "gc") throw std::invalid_argument("stage");
      e.stage = f[1] == "gc" ? Stage::gc : Stage::warmup;
      e.train_loss = std::stod(f[2]);
      e.noisy_val_map = std::stod(f[3]);
      e.student_noisy_val_map = std::stod(f[4]);
      e.clean_val_map = std::stod(f[5]);
      out.push_back(e);
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::invalid_data,
                  path.string() + ": line " + std::to_string(line_no) + " is malformed");
    }
  }
  return out;
}

namespace {

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::io, "cannot open '" + path.string() + "' for writing");
  os << j.dump(2) << '\n';
  if (!os) throw Error(ErrorKind::io, "failed writing '" + path.string() + "'");
}

nlohmann::json source_json(const ExperimentSpec& spec) {
  if (const auto* s = std::get_if<SyntheticSpec>(&spec.data))
    return {{"kind", "synthetic"},
            {"n", s->n},
            {"num_classes", s->num_classes},
            {"feature_dim", s->feature_dim},
            {"separation", s->separation},
            {"noise", s->noise},
            {"mean_cardinality", s->mean_cardinality},
            {"dirichlet_concentration", s->dirichlet_concentration},
            {"class_skew", s->class_skew},
            {"seed", s->seed}};
  return {{"kind", "csv"}, {"dir", std::get<CsvSource>(spec.data).dir.string()}};
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  validate(spec.config);
  std::error_code ec;
  std::filesystem::create_directories(spec.output_dir, ec);
  if (ec)
    throw Error(ErrorKind::io, "cannot create output directory '" + spec.output_dir.string() +
                                   "': " + ec.message());

  const DatasetSplits data = prepare_data(spec);
  ExperimentResult result;
  Trainer trainer(spec.config, data.train, data.val);
  trainer.run();
  const TrainState& st = trainer.state();
  result.train.student = st.student;
  result.train.teacher = trainer.teacher();
  result.train.log = st.log;
  result.train.detector = st.detector;
  result.train.test_report = evaluate(trainer.final_model(), data.test, spec.config.threshold);
  const LabelMatrix& observed =
      data.train.has_observed() ? data.train.y_observed : data.train.y_true;
  result.flip_rates = compute_flip_rates(data.train.y_true, observed);

  const auto& out = spec.output_dir;
  nlohmann::json config{{"train", to_json(spec.config)},
                        {"regime", to_string(spec.regime)},
                        {"noise_seed", spec.noise_seed.value_or(spec.config.seed)},
                        {"data", source_json(spec)}};
  write_json(out / "config.json", config);
  nlohmann::json metrics = to_json(result.train.test_report);
  metrics["trigger_epoch"] = st.detector.trigger_epoch ? nlohmann::json(*st.detector.trigger_epoch)
                                                       : nlohmann::json(nullptr);
  write_json(out / "metrics.json", metrics);
  if (spec.emit_curves) write_curves_csv(out / "curves.csv", st.log);
  {
    std::ofstream os(out / "fliprates.csv");
    if (!os) throw Error(ErrorKind::io, "cannot write '" + (out / "fliprates.csv").string() + "'");
    write_flip_rates_csv(os, result.flip_rates);
  }
  save_checkpoint(out / "checkpoint.json", st);
  return result;
}

void set_config_field(TrainConfig& c, std::string_view raw_name, const std::string& value) {
  std::string name(raw_name);
  std::replace(name.begin(), name.end(), '-', '_');
  const auto real = [&] {
    try {
      std::size_t used = 0;
      const double v = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
      return v;
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::invalid_argument, "'" + value + "' is not a number for " + name);
    }
  };
  const auto count = [&] {
    const double v = real();
    if (v < 0.0 || v != static_cast<double>(static_cast<std::uint64_t>(v)))
      throw Error(ErrorKind::invalid_argument, "'" + value + "' is not a count for " + name);
    return static_cast<std::uint64_t>(v);
  };
  if (name == "method") c.method = parse_method(value);
  else if (name == "lambda") c.lambda = real();
  else if (name == "beta_t") c.beta_t = real();
  else if (name == "beta_s") c.beta_s = real();
  else if (name == "gamma") c.gamma = real();
  else if (name == "mixup_alpha") c.mixup_alpha = real();
  else if (name == "patience") c.patience = count();
  else if (name == "eps_smooth") c.eps_smooth = real();
  else if (name == "w_neg") c.w_neg = real();
  else if (name == "k_expected") c.k_expected = real();
  else if (name == "lambda_epr") c.lambda_epr = real();
  else if (name == "epochs") c.epochs = count();
  else if (name == "batch_size") c.batch_size = count();
  else if (name == "lr") c.lr = real();
  else if (name == "seed") c.seed = count();
  else if (name == "threshold") c.threshold = real();
  else if (name == "hidden") c.hidden = count();
  else if (name == "student_source") {
    if (value != "smoothed" && value != "raw")
      throw Error(ErrorKind::invalid_argument, "student_source must be smoothed or raw");
    c.student_source = value == "raw" ? StudentSource::raw : StudentSource::smoothed;
  } else if (name == "mixup") {
    if (value != "true" && value != "false" && value != "1" && value != "0")
      throw Error(ErrorKind::invalid_argument, "mixup must be true or false");
    c.mixup = value == "true" || value == "1";
  } else if (name == "fixed_warmup_epochs") c.fixed_warmup_epochs = count();
  else throw Error(ErrorKind::invalid_argument, "unknown config field '" + std::string(raw_name) + "'");
}

GridAxis parse_grid_axis(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos || eq == 0 || eq + 1 == text.size())
    throw Error(ErrorKind::invalid_argument,
                "grid axis must look like key=v1,v2: '" + std::string(text) + "'");
  GridAxis axis{std::string(text.substr(0, eq)), {}};
  std::string rest(text.substr(eq + 1));
  std::istringstream is(rest);
  std::string v;
  while (std::getline(is, v, ',')) {
    if (v.empty()) throw Error(ErrorKind::invalid_argument, "empty value in grid axis");
    axis.values.push_back(v);
  }
  TrainConfig probe;
  set_config_field(probe, axis.key, axis.values.front());  // rejects unknown keys early
  return axis;
}

std::vector<std::filesystem::path> run_grid(const ExperimentSpec& base,
                                            const std::vector<GridAxis>& axes, std::size_t jobs) {
  require(!axes.empty(), ErrorKind::invalid_argument, "grid needs at least one axis");
  std::vector<ExperimentSpec> cells{base};
  std::vector<std::string> names{""};
  for (const GridAxis& axis : axes) {
    std::vector<ExperimentSpec> next_cells;
    std::vector<std::string> next_names;
    for (std::size_t k = 0; k < cells.size(); ++k) {
      for (const std::string& v : axis.values) {
        ExperimentSpec cell = cells[k];
        set_config_field(cell.config, axis.key, v);
        next_cells.push_back(std::move(cell));
        next_names.push_back((names[k].empty() ? "" : names[k] + "_") + axis.key + "=" + v);
      }
    }
    cells = std::move(next_cells);
    names = std::move(next_names);
  }
  std::vector<std::filesystem::path> dirs;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    cells[k].output_dir = base.output_dir / names[k];
    validate(cells[k].config);
    dirs.push_back(cells[k].output_dir);
  }
  jobs = std::max<std::size_t>(jobs, 1);
  for (std::size_t begin = 0; begin < cells.size(); begin += jobs) {
    const std::size_t end = std::min(cells.size(), begin + jobs);
    if (end - begin == 1) {
      run_experiment(cells[begin]);
      continue;
    }
    std::vector<std::future<ExperimentResult>> running;
    for (std::size_t k = begin; k < end; ++k)
      running.push_back(std::async(std::launch::async, run_experiment, std::cref(cells[k])));
    for (auto& f : running) f.get();
  }
  return dirs;
}

}  // namespace adagc
