// adagc command-line entry point: gen, corrupt, train, eval, grid.

#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "adagc/checkpoint.hpp"
#include "adagc/error.hpp"
#include "adagc/experiment.hpp"
#include "json.hpp"

namespace {

using namespace adagc;
namespace fs = std::filesystem;

const std::vector<std::string> kConfigFields = {
    "method",     "lambda",     "beta-t",    "beta-s",         "gamma",
    "mixup-alpha", "patience",  "eps-smooth", "w-neg",         "k-expected",
    "lambda-epr", "epochs",     "batch-size", "lr",            "seed",
    "threshold",  "hidden",     "student-source", "mixup",     "fixed-warmup-epochs"};

struct ConfigFlags {
  std::map<std::string, std::string> values;

  void attach(CLI::App* app) {
    for (const std::string& f : kConfigFields)
      app->add_option("--" + f, values[f], "TrainConfig." + f);
  }
  TrainConfig resolve() const {
    TrainConfig c;
    for (const auto& [k, v] : values)
      if (!v.empty()) set_config_field(c, k, v);
    return c;
  }
};

struct SyntheticFlags {
  SyntheticSpec spec;

  void attach(CLI::App* app) {
    app->add_option("--n", spec.n, "samples before the 2:1:1 split");
    app->add_option("--num-classes", spec.num_classes);
    app->add_option("--feature-dim", spec.feature_dim);
    app->add_option("--separation", spec.separation);
    app->add_option("--noise", spec.noise);
    app->add_option("--mean-cardinality", spec.mean_cardinality);
    app->add_option("--dirichlet", spec.dirichlet_concentration);
    app->add_option("--class-skew", spec.class_skew);
    app->add_option("--data-seed", spec.seed);
  }
};

struct RunFlags {
  ConfigFlags config;
  SyntheticFlags synthetic;
  std::string data_dir;
  std::string regime = "random";
  std::optional<std::uint64_t> noise_seed;
  std::string out;
  bool no_curves = false;

  void attach(CLI::App* app) {
    config.attach(app);
    synthetic.attach(app);
    app->add_option("--data", data_dir, "directory written by gen (default: synthetic)");
    app->add_option("--regime", regime, "random | dominant | none");
    app->add_option("--noise-seed", noise_seed);
    app->add_option("--out", out)->required();
    app->add_flag("--no-curves", no_curves);
  }
  ExperimentSpec resolve() const {
    ExperimentSpec s;
    if (data_dir.empty()) s.data = synthetic.spec;
    else s.data = CsvSource{data_dir};
    s.regime = parse_noise_regime(regime);
    s.config = config.resolve();
    s.noise_seed = noise_seed;
    s.output_dir = out;
    s.emit_curves = !no_curves;
    return s;
  }
};

void print_json(const nlohmann::json& j) { std::cout << j.dump(2) << '\n'; }

void cmd_gen(const SyntheticFlags& f, const std::string& out) {
  validate(f.spec);
  const DatasetSplits s = generate_synthetic(f.spec);
  fs::create_directories(out);
  export_dataset(out, "train", s.train);
  export_dataset(out, "val", s.val);
  export_dataset(out, "test", s.test);
  print_json({{"out", out}, {"train", s.train.size()}, {"val", s.val.size()},
              {"test", s.test.size()}});
}

void cmd_corrupt(const std::string& data, const std::string& out_arg, const std::string& regime,
                 std::uint64_t seed) {
  const NoiseRegime r = parse_noise_regime(regime);
  require(r != NoiseRegime::none, ErrorKind::invalid_argument,
          "corrupt needs regime random or dominant");
  const fs::path out = out_arg.empty() ? fs::path(data) : fs::path(out_arg);
  fs::create_directories(out);
  SeededRng rng(seed);
  nlohmann::json summary{{"out", out.string()}, {"regime", regime}};
  for (const std::string prefix : {"train", "val", "test"}) {
    MultiLabelDataset ds = load_dataset(data, prefix);
    apply_noise(ds, r, rng);
    export_dataset(out, prefix, ds);
    const FlipRateTable table = compute_flip_rates(ds.y_true, ds.y_observed);
    std::ofstream os(out / (prefix + "_fliprates.csv"));
    if (!os) throw Error(ErrorKind::io, "cannot write flip rates into '" + out.string() + "'");
    write_flip_rates_csv(os, table);
    summary[prefix] = {{"micro_flip_rate", table.micro}, {"macro_flip_rate", table.macro}};
  }
  print_json(summary);
}

void cmd_train(const RunFlags& f) {
  const ExperimentSpec spec = f.resolve();
  const ExperimentResult r = run_experiment(spec);
  nlohmann::json j = to_json(r.train.test_report);
  j["out"] = spec.output_dir.string();
  print_json(j);
}

void cmd_eval(const std::string& checkpoint, const std::string& data, const std::string& split,
              std::optional<double> threshold, const std::string& out) {
  const TrainState st = load_checkpoint(checkpoint);
  const MultiLabelDataset ds = load_dataset(data, split);
  MlpModel model = st.student;
  if (st.config.method == Method::adagc) model.params = st.ema.teacher;
  const MetricReport report = evaluate(model, ds, threshold.value_or(st.config.threshold));
  const nlohmann::json j = to_json(report);
  if (!out.empty()) {
    std::ofstream os(out);
    if (!os) throw Error(ErrorKind::io, "cannot open '" + out + "' for writing");
    os << j.dump(2) << '\n';
  }
  print_json(j);
}

void cmd_grid(const RunFlags& f, const std::vector<std::string>& axes_text, std::size_t jobs) {
  std::vector<GridAxis> axes;
  for (const std::string& a : axes_text) axes.push_back(parse_grid_axis(a));
  const auto dirs = run_grid(f.resolve(), axes, jobs);
  nlohmann::json j = nlohmann::json::array();
  for (const auto& d : dirs) j.push_back(d.string());
  print_json({{"cells", j}});
}

int report_error(std::string_view kind, const std::string& message, int code) {
  std::cerr << nlohmann::json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AdaGC single-positive multi-label training toolkit"};
  app.require_subcommand(1);

  SyntheticFlags gen_flags;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset as CSV");
  gen_flags.attach(gen);
  gen->add_option("--out", gen_out)->required();

  std::string cor_data, cor_out, cor_regime = "random";
  std::uint64_t cor_seed = 0;
  auto* corrupt = app.add_subcommand("corrupt", "apply a noise regime, emit observed labels");
  corrupt->add_option("--data", cor_data)->required();
  corrupt->add_option("--out", cor_out, "defaults to --data");
  corrupt->add_option("--regime", cor_regime, "random | dominant");
  corrupt->add_option("--seed", cor_seed);

  RunFlags train_flags;
  auto* train = app.add_subcommand("train", "run one experiment");
  train_flags.attach(train);

  std::string ev_ckpt, ev_data, ev_split = "test", ev_out;
  std::optional<double> ev_threshold;
  auto* eval = app.add_subcommand("eval", "score a checkpoint on a CSV split");
  eval->add_option("--checkpoint", ev_ckpt)->required();
  eval->add_option("--data", ev_data)->required();
  eval->add_option("--split", ev_split, "train | val | test");
  eval->add_option("--threshold", ev_threshold);
  eval->add_option("--out", ev_out, "optional metrics.json path");

  RunFlags grid_flags;
  std::vector<std::string> grid_axes;
  std::size_t grid_jobs = 1;
  auto* grid = app.add_subcommand("grid", "run the cartesian product of config axes");
  grid_flags.attach(grid);
  grid->add_option("--grid", grid_axes, "key=v1,v2 (repeatable)")->required();
  grid->add_option("--jobs", grid_jobs);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what(), 2);
  }

  try {
    if (gen->parsed()) cmd_gen(gen_flags, gen_out);
    else if (corrupt->parsed()) cmd_corrupt(cor_data, cor_out, cor_regime, cor_seed);
    else if (train->parsed()) cmd_train(train_flags);
    else if (eval->parsed()) cmd_eval(ev_ckpt, ev_data, ev_split, ev_threshold, ev_out);
    else if (grid->parsed()) cmd_grid(grid_flags, grid_axes, grid_jobs);
  } catch (const Error& e) {
    return report_error(to_string(e.kind()), e.what(), 1);
  } catch (const std::filesystem::filesystem_error& e) {
    return report_error("io", e.what(), 1);
  } catch (const std::exception& e) {
    return report_error("internal", e.what(), 1);
  }
  return 0;
}
