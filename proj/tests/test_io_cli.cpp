// Copyright 2026 The Autoeval Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>
#include <sys/wait.h>
#include <unistd.h>

#include "autoeval/cli.hpp"
#include "autoeval/csv_io.hpp"
#include "autoeval/harness.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path temp_dir() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() /
                 ("autoeval_test_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli_env(const std::string& env, const std::string& args,
                const fs::path& stdout_path) {
  std::string command = env + (env.empty() ? "" : " ") + AUTOEVAL_CLI_PATH + " " +
                        args + " > " + stdout_path.string() + " 2> " +
                        (stdout_path.string() + ".err");
  int status = std::system(command.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

int run_cli(const std::string& args, const fs::path& stdout_path) {
  return run_cli_env("", args, stdout_path);
}

autoeval::MetricPopulation small_population(std::uint64_t seed, int rows, int models) {
  autoeval::GaussianMetricDgp dgp;
  dgp.true_mu.resize(models);
  for (int j = 0; j < models; ++j) dgp.true_mu(j) = 0.3 + 0.2 * j;
  dgp.rho = 0.8;
  autoeval::Rng rng(seed);
  return autoeval::generate(dgp, rows, rng);
}

}  // namespace

TEST_CASE("metric csv round trip preserves estimates exactly") {
  auto pop = small_population(199, 60, 2);
  autoeval::Rng rng(211);
  autoeval::EvalDataset ds = autoeval::split_trial(pop, 20, rng);

  fs::path labeled = temp_dir() / "metric_labeled.csv";
  fs::path unlabeled = temp_dir() / "metric_unlabeled.csv";
  autoeval::write_labeled_metric_csv(labeled.string(), ds.labeled_phi,
                                     ds.labeled_ehat, ds.model_names);
  autoeval::write_unlabeled_metric_csv(unlabeled.string(), ds.unlabeled_ehat,
                                       ds.model_names);

  autoeval::MetricPopulation lab = autoeval::read_labeled_metric_csv(labeled.string());
  autoeval::UnlabeledMetricFile unl =
      autoeval::read_unlabeled_metric_csv(unlabeled.string());
  autoeval::EvalDataset loaded = autoeval::make_eval_dataset(lab, unl);

  for (auto mode : {autoeval::EstimatorMode::kClassical, autoeval::EstimatorMode::kPpi,
                    autoeval::EstimatorMode::kPpiPlusPlus}) {
    autoeval::PpiEstimate in_memory = autoeval::estimate(ds, mode);
    autoeval::PpiEstimate from_disk = autoeval::estimate(loaded, mode);
    REQUIRE((in_memory.mu_hat - from_disk.mu_hat).cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE((in_memory.v_hat - from_disk.v_hat).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("metric loader joins columns by model name, not position") {
  fs::path labeled = temp_dir() / "byname_labeled.csv";
  fs::path unlabeled = temp_dir() / "byname_unlabeled.csv";
  write_file(labeled,
             "id,phi_a,ehat_a,phi_b,ehat_b\n"
             "0,1,0.9,0,0.1\n"
             "1,0,0.2,1,0.8\n");
  // Unlabeled file lists model b first.
  write_file(unlabeled,
             "id,ehat_b,ehat_a\n"
             "0,0.7,0.4\n");
  auto ds = autoeval::make_eval_dataset(
      autoeval::read_labeled_metric_csv(labeled.string()),
      autoeval::read_unlabeled_metric_csv(unlabeled.string()));
  REQUIRE(ds.model_names == std::vector<std::string>{"a", "b"});
  REQUIRE(ds.unlabeled_ehat(0, 0) == 0.4);
  REQUIRE(ds.unlabeled_ehat(0, 1) == 0.7);
}

TEST_CASE("metric loader reports schema violations with line numbers") {
  fs::path bad = temp_dir() / "bad_metric.csv";
  write_file(bad, "id,phi_a\n0,1\n");
  try {
    autoeval::read_labeled_metric_csv(bad.string());
    FAIL("expected CsvError");
  } catch (const autoeval::CsvError& e) {
    REQUIRE(std::string(e.what()).find("ehat_a") != std::string::npos);
  }

  fs::path nan_file = temp_dir() / "nan_metric.csv";
  write_file(nan_file, "id,phi_a,ehat_a\n0,1,0.5\n1,oops,0.5\n");
  try {
    autoeval::read_labeled_metric_csv(nan_file.string());
    FAIL("expected CsvError");
  } catch (const autoeval::CsvError& e) {
    REQUIRE(e.line() == 3);
  }
}

TEST_CASE("comparison csv round trip and reference pinning") {
  fs::path labeled = temp_dir() / "cmp_labeled.csv";
  fs::path unlabeled = temp_dir() / "cmp_unlabeled.csv";
  write_file(labeled,
             "id,model_a,model_b,y,y_hat\n"
             "0,alpha,beta,1,1\n"
             "1,beta,gamma,0,0.25\n");
  write_file(unlabeled,
             "id,model_a,model_b,y_hat\n"
             "0,gamma,alpha,0.5\n");
  auto rows_l = autoeval::read_comparison_csv(labeled.string(), true);
  auto rows_u = autoeval::read_comparison_csv(unlabeled.string(), false);

  auto by_default = autoeval::make_comparison_dataset(rows_l, rows_u, std::nullopt);
  REQUIRE(by_default.model_names == std::vector<std::string>{"alpha", "beta", "gamma"});

  auto pinned = autoeval::make_comparison_dataset(rows_l, rows_u, std::string("gamma"));
  REQUIRE(pinned.model_names[0] == "gamma");
  REQUIRE(pinned.data.labeled[1].b == 0);

  REQUIRE_THROWS_AS(
      autoeval::make_comparison_dataset(rows_l, rows_u, std::string("delta")),
      autoeval::InvalidInput);
}

TEST_CASE("comparison csv rejects out-of-range labels and self-comparisons") {
  fs::path bad = temp_dir() / "cmp_bad.csv";
  write_file(bad, "id,model_a,model_b,y,y_hat\n0,a,b,1.5,0.5\n");
  REQUIRE_THROWS_AS(autoeval::read_comparison_csv(bad.string(), true),
                    autoeval::CsvError);
  write_file(bad, "id,model_a,model_b,y,y_hat\n0,a,a,1,0.5\n");
  REQUIRE_THROWS_AS(autoeval::read_comparison_csv(bad.string(), true),
                    autoeval::CsvError);
}

TEST_CASE("cli metric-eval classical equals column means and exits zero") {
  auto pop = small_population(223, 40, 2);
  fs::path labeled = temp_dir() / "cli_labeled.csv";
  fs::path unlabeled = temp_dir() / "cli_unlabeled.csv";
  autoeval::Rng rng(227);
  autoeval::EvalDataset ds = autoeval::split_trial(pop, 25, rng);
  autoeval::write_labeled_metric_csv(labeled.string(), ds.labeled_phi,
                                     ds.labeled_ehat, ds.model_names);
  autoeval::write_unlabeled_metric_csv(unlabeled.string(), ds.unlabeled_ehat,
                                       ds.model_names);

  fs::path out = temp_dir() / "cli_metric.json";
  int code = run_cli("metric-eval --labeled " + labeled.string() + " --unlabeled " +
                         unlabeled.string() + " --mode classical --out " + out.string(),
                     temp_dir() / "stdout.txt");
  REQUIRE(code == 0);
  json report = json::parse(read_file(out));
  REQUIRE(report["mode"] == "classical");
  for (int m = 0; m < 2; ++m) {
    double expected = ds.labeled_phi.col(m).mean();
    REQUIRE(std::abs(report["models"][m]["estimate"].get<double>() - expected) < 1e-12);
    REQUIRE(std::abs(report["models"][m]["ess"].get<double>() - 25.0) < 1e-9);
  }

  // A fixed lambda of zero in ppi mode is the classical estimator.
  fs::path out0 = temp_dir() / "cli_metric_ppi0.json";
  REQUIRE(run_cli("metric-eval --labeled " + labeled.string() + " --unlabeled " +
                      unlabeled.string() + " --mode ppi --lambda 0 --out " +
                      out0.string(),
                  temp_dir() / "s15.txt") == 0);
  json ppi0 = json::parse(read_file(out0));
  REQUIRE(ppi0["mode"] == "classical");
  for (int m = 0; m < 2; ++m) {
    REQUIRE(ppi0["models"][m]["estimate"] == report["models"][m]["estimate"]);
  }
}

TEST_CASE("cli metric-eval rejects malformed headers with exit 2") {
  fs::path bad = temp_dir() / "cli_bad.csv";
  write_file(bad, "id,phi_a\n0,1\n");
  fs::path unlabeled = temp_dir() / "cli_bad_unl.csv";
  write_file(unlabeled, "id,ehat_a\n0,0.5\n");
  fs::path err_out = temp_dir() / "cli_bad.json";
  int code = run_cli("metric-eval --labeled " + bad.string() + " --unlabeled " +
                         unlabeled.string() + " --out " + err_out.string(),
                     temp_dir() / "stdout2.txt");
  REQUIRE(code == 2);
  std::string message = read_file(temp_dir() / "stdout2.txt.err");
  REQUIRE(message.find("ehat_a") != std::string::npos);
}

TEST_CASE("cli maps statistical failures to exit 3") {
  fs::path labeled = temp_dir() / "tiny_labeled.csv";
  fs::path unlabeled = temp_dir() / "tiny_unlabeled.csv";
  write_file(labeled, "id,phi_a,ehat_a\n0,1,0.5\n");  // n = 1: not estimable
  write_file(unlabeled, "id,ehat_a\n0,0.5\n");
  int code = run_cli("metric-eval --labeled " + labeled.string() + " --unlabeled " +
                         unlabeled.string() + " --out " +
                         (temp_dir() / "tiny.json").string(),
                     temp_dir() / "s11.txt");
  REQUIRE(code == 3);

  // Perfect separation is a statistical failure that names the model.
  fs::path sep_l = temp_dir() / "sep_labeled.csv";
  fs::path sep_u = temp_dir() / "sep_unlabeled.csv";
  write_file(sep_l,
             "id,model_a,model_b,y,y_hat\n"
             "0,base,ace,1,1\n"
             "1,base,ace,1,1\n"
             "2,base,ace,1,1\n");
  write_file(sep_u, "id,model_a,model_b,y_hat\n0,base,ace,1\n");
  code = run_cli("bt-eval --labeled " + sep_l.string() + " --unlabeled " +
                     sep_u.string() + " --mode classical --out " +
                     (temp_dir() / "sep.json").string(),
                 temp_dir() / "s12.txt");
  REQUIRE(code == 3);
  std::string message = read_file(temp_dir() / "s12.txt.err");
  REQUIRE(message.find("ace") != std::string::npos);
}

TEST_CASE("cli bt-eval ppi with lambda zero matches classical output") {
  autoeval::Rng rng(229);
  autoeval::BtArenaDgp dgp;
  dgp.true_zeta.resize(3);
  dgp.true_zeta << 0.0, 0.6, 1.2;
  dgp.flip_prob = 0.1;
  autoeval::ComparisonPopulation pop = autoeval::generate(dgp, 300, rng);
  autoeval::ComparisonDataset ds = autoeval::split_trial(pop, 120, rng);

  fs::path labeled = temp_dir() / "cli_bt_labeled.csv";
  fs::path unlabeled = temp_dir() / "cli_bt_unlabeled.csv";
  autoeval::write_comparison_csv(labeled.string(), ds.labeled, pop.model_names, true);
  autoeval::write_comparison_csv(unlabeled.string(), ds.unlabeled, pop.model_names, false);

  fs::path out_classical = temp_dir() / "bt_classical.json";
  fs::path out_ppi0 = temp_dir() / "bt_ppi0.json";
  std::string base = "bt-eval --labeled " + labeled.string() + " --unlabeled " +
                     unlabeled.string() + " --out ";
  REQUIRE(run_cli(base + out_classical.string() + " --mode classical",
                  temp_dir() / "s3.txt") == 0);
  REQUIRE(run_cli(base + out_ppi0.string() + " --mode ppi --lambda 0",
                  temp_dir() / "s4.txt") == 0);

  json classical = json::parse(read_file(out_classical));
  json ppi0 = json::parse(read_file(out_ppi0));
  for (int m = 0; m < 3; ++m) {
    double a = classical["models"][m]["zeta"].get<double>();
    double b = ppi0["models"][m]["zeta"].get<double>();
    REQUIRE(std::abs(a - b) < 1e-8);
  }
}

TEST_CASE("cli bt-eval rejects a labeled file without y_hat in ppi mode") {
  fs::path labeled = temp_dir() / "noyhat_labeled.csv";
  fs::path unlabeled = temp_dir() / "noyhat_unlabeled.csv";
  write_file(labeled,
             "id,model_a,model_b,y\n"
             "0,a,b,1\n"
             "1,a,b,0\n");
  write_file(unlabeled, "id,model_a,model_b,y_hat\n0,a,b,1\n");
  int code = run_cli("bt-eval --labeled " + labeled.string() + " --unlabeled " +
                         unlabeled.string() + " --mode ppi --out " +
                         (temp_dir() / "noyhat.json").string(),
                     temp_dir() / "s16.txt");
  REQUIRE(code == 2);
  REQUIRE(read_file(temp_dir() / "s16.txt.err").find("y_hat") != std::string::npos);
}

TEST_CASE("cli experiment dgp defaults give the documented shapes") {
  fs::path out = temp_dir() / "exp_defaults.json";
  REQUIRE(run_cli("experiment --dgp gaussian:rho=0.9 --n-labeled 300 --trials 25 "
                  "--seed 31 --modes classical,ppi++ --out " + out.string(),
                  temp_dir() / "s17.txt") == 0);
  json report = json::parse(read_file(out));
  REQUIRE(report["model_names"].size() == 3);  // default m
  REQUIRE(report["trials_aggregated"] == 25);
  // Default total is 11 * n_labeled, so N = 10n and a 0.9-correlated
  // annotator lifts the effective sample size well past n.
  const auto& tuned = report["modes"][1];
  for (int m = 0; m < 3; ++m) {
    REQUIRE(tuned["ess"][m].get<double>() / 300.0 >= 1.2);
  }
}

TEST_CASE("cli bt-eval on the three-of-four dataset returns log 3") {
  fs::path labeled = temp_dir() / "bt34_labeled.csv";
  fs::path unlabeled = temp_dir() / "bt34_unlabeled.csv";
  write_file(labeled,
             "id,model_a,model_b,y,y_hat\n"
             "0,ref,champ,1,1\n"
             "1,ref,champ,1,1\n"
             "2,ref,champ,1,1\n"
             "3,ref,champ,0,0\n");
  write_file(unlabeled, "id,model_a,model_b,y_hat\n0,ref,champ,1\n");
  fs::path out = temp_dir() / "bt34.json";
  REQUIRE(run_cli("bt-eval --labeled " + labeled.string() + " --unlabeled " +
                      unlabeled.string() + " --reference ref --mode classical --out " +
                      out.string(),
                  temp_dir() / "s5.txt") == 0);
  json report = json::parse(read_file(out));
  REQUIRE(report["models"][1]["name"] == "champ");
  REQUIRE(std::abs(report["models"][1]["zeta"].get<double>() - std::log(3.0)) < 1e-6);
  REQUIRE(report["models"][0]["ci_lo"].is_null());
}

TEST_CASE("cli winrate handles modes and unknown targets") {
  fs::path labeled = temp_dir() / "wr_labeled.csv";
  fs::path unlabeled = temp_dir() / "wr_unlabeled.csv";
  write_file(labeled,
             "id,model_a,model_b,y,y_hat\n"
             "0,alpha,beta,1,1\n"
             "1,beta,alpha,0,0\n"
             "2,alpha,beta,0,0\n");
  write_file(unlabeled,
             "id,model_a,model_b,y_hat\n"
             "0,alpha,beta,1\n"
             "1,beta,alpha,0.25\n");

  fs::path out = temp_dir() / "wr.json";
  REQUIRE(run_cli("winrate --labeled " + labeled.string() + " --unlabeled " +
                      unlabeled.string() + " --target beta --mode classical --out " +
                      out.string(),
                  temp_dir() / "s6.txt") == 0);
  json report = json::parse(read_file(out));
  // beta wins rows 0 and 1, loses row 2.
  REQUIRE(report["estimate"].get<double>() == Catch::Approx(2.0 / 3.0));

  int code = run_cli("winrate --labeled " + labeled.string() + " --unlabeled " +
                         unlabeled.string() + " --target nobody --out " + out.string(),
                     temp_dir() / "s7.txt");
  REQUIRE(code == 2);
}

TEST_CASE("cli experiment outputs are byte-identical across runs and schedules") {
  fs::path out1 = temp_dir() / "exp1.json";
  fs::path out2 = temp_dir() / "exp2.json";
  std::string args =
      "experiment --dgp gaussian:rho=0.8,m=2,total=300 --n-labeled 50 --trials 8 "
      "--seed 7 --out ";
  // AUTOEVAL_THREADS caps trial parallelism; it must not change the bytes.
  REQUIRE(run_cli_env("AUTOEVAL_THREADS=1", args + out1.string(), temp_dir() / "s8.txt") == 0);
  REQUIRE(run_cli_env("AUTOEVAL_THREADS=2", args + out2.string(), temp_dir() / "s9.txt") == 0);
  REQUIRE(read_file(out1) == read_file(out2));
  REQUIRE(read_file(temp_dir() / "exp1.csv") == read_file(temp_dir() / "exp2.csv"));
  REQUIRE(!read_file(temp_dir() / "exp1.csv").empty());
}

TEST_CASE("cli experiment re-splits fixed datasets of either kind") {
  auto pop = small_population(241, 120, 2);
  fs::path metric_data = temp_dir() / "exp_metric_data.csv";
  autoeval::write_labeled_metric_csv(metric_data.string(), pop.phi, pop.ehat,
                                     pop.model_names);
  fs::path out = temp_dir() / "exp_metric_report.json";
  REQUIRE(run_cli("experiment --data " + metric_data.string() +
                      " --n-labeled 40 --trials 6 --seed 5 --out " + out.string(),
                  temp_dir() / "s13.txt") == 0);
  json report = json::parse(read_file(out));
  REQUIRE(report["trials_aggregated"] == 6);
  REQUIRE(report["model_names"].size() == 2);

  autoeval::Rng rng(251);
  autoeval::BtArenaDgp dgp;
  dgp.true_zeta.resize(3);
  dgp.true_zeta << 0.0, 0.5, 1.0;
  dgp.flip_prob = 0.1;
  autoeval::ComparisonPopulation arena = autoeval::generate(dgp, 400, rng);
  fs::path bt_data = temp_dir() / "exp_bt_data.csv";
  autoeval::write_comparison_csv(bt_data.string(), arena.records, arena.model_names,
                                 true);
  fs::path bt_out = temp_dir() / "exp_bt_report.json";
  REQUIRE(run_cli("experiment --data " + bt_data.string() +
                      " --n-labeled 150 --trials 4 --seed 5 --modes classical,ppi++"
                      " --out " + bt_out.string(),
                  temp_dir() / "s14.txt") == 0);
  json bt_report = json::parse(read_file(bt_out));
  REQUIRE(bt_report["modes"].size() == 2);
  REQUIRE(bt_report["ground_truth"][0] == 0.0);
}

TEST_CASE("cli outputs conform to the published schemas") {
  // Structural check mirroring docs/schemas/*.schema.json: required keys and
  // their JSON types.
  auto pop = small_population(233, 30, 2);
  fs::path labeled = temp_dir() / "schema_labeled.csv";
  fs::path unlabeled = temp_dir() / "schema_unlabeled.csv";
  autoeval::Rng rng(239);
  autoeval::EvalDataset ds = autoeval::split_trial(pop, 20, rng);
  autoeval::write_labeled_metric_csv(labeled.string(), ds.labeled_phi,
                                     ds.labeled_ehat, ds.model_names);
  autoeval::write_unlabeled_metric_csv(unlabeled.string(), ds.unlabeled_ehat,
                                       ds.model_names);
  fs::path out = temp_dir() / "schema_metric.json";
  REQUIRE(run_cli("metric-eval --labeled " + labeled.string() + " --unlabeled " +
                      unlabeled.string() + " --simultaneous --out " + out.string(),
                  temp_dir() / "s10.txt") == 0);
  json report = json::parse(read_file(out));
  for (const char* key : {"command", "mode", "alpha", "n", "N", "lambda", "models"}) {
    REQUIRE(report.contains(key));
  }
  REQUIRE(report["models"].is_array());
  for (const auto& model : report["models"]) {
    REQUIRE(model["name"].is_string());
    for (const char* key : {"estimate", "ci_lo", "ci_hi", "lambda", "ess"}) {
      REQUIRE(model[key].is_number());
    }
  }
  REQUIRE(report["simultaneous"]["center"].is_array());
  REQUIRE(report["simultaneous"]["shape"].is_array());
  REQUIRE(report["simultaneous"]["radius"].is_number());
}
