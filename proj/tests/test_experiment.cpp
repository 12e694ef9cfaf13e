#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "adagc/checkpoint.hpp"
#include "adagc/experiment.hpp"
#include "doctest.h"

using namespace adagc;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("adagc_exp_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string read_text(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

ExperimentSpec small_spec(const fs::path& out, Method method = Method::an) {
  ExperimentSpec spec;
  SyntheticSpec data;
  data.n = 200;
  spec.data = data;
  spec.config.method = method;
  spec.config.epochs = 10;
  spec.output_dir = out;
  return spec;
}

struct CliResult {
  int code;
  std::string out, err;
};

CliResult cli(const std::string& args, const fs::path& scratch) {
  const fs::path out = scratch / "stdout.txt", err = scratch / "stderr.txt";
  const std::string cmd = std::string("\"") + ADAGC_CLI_PATH + "\" " + args + " >\"" + out.string() +
                          "\" 2>\"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return {code, read_text(out), read_text(err)};
}

}  // namespace

TEST_CASE("run_experiment writes every artifact quickly") {
  const fs::path dir = fresh_dir("run");
  const auto start = std::chrono::steady_clock::now();
  const ExperimentResult r = run_experiment(small_spec(dir));
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(seconds < 10.0);
  for (const char* f : {"config.json", "metrics.json", "curves.csv", "fliprates.csv", "checkpoint.json"})
    CHECK(fs::exists(dir / f));

  const nlohmann::json metrics = nlohmann::json::parse(read_text(dir / "metrics.json"));
  CHECK(metrics.at("map").get<double>() == r.train.test_report.map);
  CHECK(metrics.contains("trigger_epoch"));

  const nlohmann::json config = nlohmann::json::parse(read_text(dir / "config.json"));
  CHECK(to_json(train_config_from_json(config.at("train"))) == to_json(small_spec(dir).config));
  CHECK(config.at("regime") == "random");

  const std::vector<EpochLog> curves = read_curves_csv(dir / "curves.csv");
  REQUIRE(curves.size() == 10);
  for (std::size_t k = 0; k < curves.size(); ++k) {
    CHECK(curves[k].epoch == k);
    CHECK(curves[k].noisy_val_map == r.train.log[k].noisy_val_map);
    CHECK(curves[k].train_loss == r.train.log[k].train_loss);
  }

  std::ifstream fr(dir / "fliprates.csv");
  const FlipRateTable table = read_flip_rates_csv(fr);
  CHECK(table.beta == r.flip_rates.beta);

  const TrainState ckpt = load_checkpoint(dir / "checkpoint.json");
  CHECK(ckpt.student.params == r.train.student.params);
}

TEST_CASE("reruns are byte-identical") {
  const fs::path a = fresh_dir("rerun_a"), b = fresh_dir("rerun_b");
  ExperimentSpec sa = small_spec(a, Method::adagc), sb = small_spec(b, Method::adagc);
  sa.config.fixed_warmup_epochs = sb.config.fixed_warmup_epochs = 4;
  run_experiment(sa);
  run_experiment(sb);
  CHECK(read_text(a / "metrics.json") == read_text(b / "metrics.json"));
  CHECK(read_text(a / "curves.csv") == read_text(b / "curves.csv"));
  nlohmann::json ca = nlohmann::json::parse(read_text(a / "checkpoint.json"));
  nlohmann::json cb = nlohmann::json::parse(read_text(b / "checkpoint.json"));
  for (auto* c : {&ca, &cb})
    for (auto& e : c->at("log")) e.erase("wall_seconds");
  CHECK(ca == cb);
}

TEST_CASE("noise regimes and data preparation") {
  ExperimentSpec spec = small_spec("unused");
  const DatasetSplits random = prepare_data(spec);
  CHECK(is_single_positive(random.train.y_observed));
  CHECK(is_single_positive(random.val.y_observed));
  CHECK_FALSE(random.test.has_observed());

  spec.regime = NoiseRegime::dominant;
  const DatasetSplits dominant = prepare_data(spec);
  CHECK(dominant.train.y_observed == simulate_dominant_spml(dominant.train.y_true, dominant.train.extents));

  spec.regime = NoiseRegime::none;
  CHECK_THROWS_AS(prepare_data(spec), Error);
  spec.config.method = Method::gt;
  CHECK_NOTHROW(prepare_data(spec));
}

TEST_CASE("config fields by flag name") {
  TrainConfig c;
  set_config_field(c, "beta-t", "0.99");
  set_config_field(c, "beta_s", "0.5");
  set_config_field(c, "method", "epr");
  set_config_field(c, "student-source", "raw");
  set_config_field(c, "epochs", "7");
  CHECK(c.beta_t == 0.99);
  CHECK(c.beta_s == 0.5);
  CHECK(c.method == Method::epr);
  CHECK(c.student_source == StudentSource::raw);
  CHECK(c.epochs == 7);
  CHECK_THROWS_AS(set_config_field(c, "warp", "1"), Error);
  CHECK_THROWS_AS(set_config_field(c, "epochs", "seven"), Error);
  CHECK_THROWS_AS(set_config_field(c, "epochs", "-1"), Error);

  const GridAxis axis = parse_grid_axis("gamma=0,0.5,1");
  CHECK(axis.key == "gamma");
  CHECK(axis.values == std::vector<std::string>{"0", "0.5", "1"});
  CHECK_THROWS_AS(parse_grid_axis("gamma"), Error);
  CHECK_THROWS_AS(parse_grid_axis("nope=1"), Error);
  CHECK_THROWS_AS(parse_grid_axis("gamma="), Error);
}

TEST_CASE("grid writes one directory per cell and is repeatable") {
  const fs::path dir = fresh_dir("grid");
  ExperimentSpec spec = small_spec(dir, Method::adagc);
  spec.config.fixed_warmup_epochs = 3;
  const auto cells = run_grid(spec, {parse_grid_axis("gamma=0,0.5,1")}, 3);
  REQUIRE(cells.size() == 3);
  for (const char* name : {"gamma=0", "gamma=0.5", "gamma=1"}) CHECK(fs::exists(dir / name / "metrics.json"));
  const nlohmann::json cfg = nlohmann::json::parse(read_text(dir / "gamma=0.5" / "config.json"));
  CHECK(cfg.at("train").at("gamma").get<double>() == 0.5);

  const fs::path again = fresh_dir("grid_again");
  spec.output_dir = again;
  run_grid(spec, {parse_grid_axis("gamma=0,0.5,1")}, 1);
  for (const char* name : {"gamma=0", "gamma=0.5", "gamma=1"})
    CHECK(read_text(dir / name / "metrics.json") == read_text(again / name / "metrics.json"));

  const fs::path two = fresh_dir("grid_two");
  spec.output_dir = two;
  CHECK(run_grid(spec, {parse_grid_axis("gamma=0,1"), parse_grid_axis("lambda=0,2")}, 2).size() == 4);
  CHECK(fs::exists(two / "gamma=1_lambda=2" / "curves.csv"));
}

TEST_CASE("command line round trip") {
  const fs::path dir = fresh_dir("cli");
  const std::string d = "\"" + (dir / "data").string() + "\"";

  CliResult r = cli("gen --out " + d + " --n 200 --data-seed 3", dir);
  REQUIRE(r.code == 0);
  CHECK(nlohmann::json::parse(r.out).at("train") == 100);
  CHECK(fs::exists(dir / "data" / "train_extents.csv"));

  r = cli("corrupt --data " + d + " --regime dominant --seed 1", dir);
  REQUIRE(r.code == 0);
  CHECK(fs::exists(dir / "data" / "train_observed.csv"));
  CHECK(fs::exists(dir / "data" / "val_fliprates.csv"));

  const std::string run = "\"" + (dir / "run").string() + "\"";
  r = cli("train --data " + d + " --regime none --method adagc --epochs 6 --fixed-warmup-epochs 2 --out " + run, dir);
  REQUIRE(r.code == 0);
  const double trained = nlohmann::json::parse(r.out).at("map").get<double>();

  r = cli("eval --checkpoint \"" + (dir / "run" / "checkpoint.json").string() + "\" --data " + d +
              " --split test",
          dir);
  REQUIRE(r.code == 0);
  CHECK(nlohmann::json::parse(r.out).at("map").get<double>() == trained);

  r = cli("train --out " + run + " --method sorcery", dir);
  CHECK(r.code != 0);
  const nlohmann::json err = nlohmann::json::parse(r.err);
  CHECK(err.at("error").at("kind") == "invalid_argument");

  r = cli("eval --checkpoint \"" + (dir / "missing.json").string() + "\" --data " + d, dir);
  CHECK(r.code == 1);
  CHECK(nlohmann::json::parse(r.err).at("error").at("kind") == "io");

  r = cli("train --bogus-flag", dir);
  CHECK(r.code == 2);
  CHECK(nlohmann::json::parse(r.err).at("error").at("kind") == "usage");
}
