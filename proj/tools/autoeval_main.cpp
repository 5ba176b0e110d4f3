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

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "autoeval/cli.hpp"

namespace {

void add_lambda_option(CLI::App* cmd, std::optional<double>& slot) {
  cmd->add_option_function<double>(
      "--lambda", [&slot](double v) { slot = v; },
      "fixed lambda override (ppi mode only)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "autoeval: unbiased low-variance model evaluation from a small "
      "human-labeled set plus a large AI-labeled set"};
  app.require_subcommand(1);

  autoeval::cli::MetricEvalOptions metric_opt;
  CLI::App* metric = app.add_subcommand(
      "metric-eval", "point estimates, CIs and ESS for per-model mean metrics");
  metric->add_option("--labeled", metric_opt.labeled_path, "labeled metric CSV")->required();
  metric->add_option("--unlabeled", metric_opt.unlabeled_path, "unlabeled metric CSV")->required();
  metric->add_option("--mode", metric_opt.mode, "classical | ppi | ppi++");
  metric->add_option("--alpha", metric_opt.alpha, "miscoverage level (default 0.1)");
  metric->add_flag("--simultaneous", metric_opt.simultaneous,
                   "include the chi-squared simultaneous region");
  add_lambda_option(metric, metric_opt.lambda_override);
  metric->add_option("--out", metric_opt.out_path, "output JSON path ('-' = stdout)");

  autoeval::cli::BtEvalOptions bt_opt;
  std::string bt_reference;
  CLI::App* bt = app.add_subcommand(
      "bt-eval", "Bradley-Terry coefficients with CIs and a CI-based ranking");
  bt->add_option("--labeled", bt_opt.labeled_path, "labeled comparison CSV")->required();
  bt->add_option("--unlabeled", bt_opt.unlabeled_path, "unlabeled comparison CSV")->required();
  CLI::Option* ref_opt = bt->add_option("--reference", bt_reference,
                                        "model pinned to zeta = 0 (default: first seen)");
  bt->add_option("--mode", bt_opt.mode, "classical | ppi | ppi++");
  bt->add_option("--alpha", bt_opt.alpha, "miscoverage level (default 0.1)");
  add_lambda_option(bt, bt_opt.lambda_override);
  bt->add_option("--out", bt_opt.out_path, "output JSON path ('-' = stdout)");

  autoeval::cli::WinrateOptions win_opt;
  CLI::App* win = app.add_subcommand(
      "winrate", "average win rate of one model across its pairwise comparisons");
  win->add_option("--labeled", win_opt.labeled_path, "labeled comparison CSV")->required();
  win->add_option("--unlabeled", win_opt.unlabeled_path, "unlabeled comparison CSV")->required();
  win->add_option("--target", win_opt.target, "model whose win rate to estimate")->required();
  win->add_option("--mode", win_opt.mode, "classical | ppi | ppi++");
  win->add_option("--alpha", win_opt.alpha, "miscoverage level (default 0.1)");
  add_lambda_option(win, win_opt.lambda_override);
  win->add_option("--out", win_opt.out_path, "output JSON path ('-' = stdout)");

  autoeval::cli::ExperimentOptions exp_opt;
  std::string exp_data, exp_dgp;
  long long exp_n_labeled = 0;
  CLI::App* exp = app.add_subcommand(
      "experiment", "Monte Carlo estimator comparison over repeated random splits");
  CLI::Option* data_opt = exp->add_option("--data", exp_data, "fully labeled CSV to re-split");
  CLI::Option* dgp_opt = exp->add_option(
      "--dgp", exp_dgp, "synthetic DGP spec, e.g. gaussian:rho=0.9 or bt:flip=0.1");
  data_opt->excludes(dgp_opt);
  exp->add_option("--n-labeled", exp_n_labeled, "labeled points per trial")->required();
  exp->add_option("--trials", exp_opt.trials, "number of Monte Carlo trials (default 250)");
  exp->add_option("--seed", exp_opt.seed, "master RNG seed (default 0)");
  exp->add_option("--alpha", exp_opt.alpha, "miscoverage level (default 0.1)");
  exp->add_option("--modes", exp_opt.modes,
                  "comma-separated subset of classical,ppi,ppi++");
  exp->add_option("--out", exp_opt.out_path, "output JSON path (CSV lands next to it)")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? autoeval::cli::kExitOk : autoeval::cli::kExitInput;
  }

  if (metric->parsed()) return autoeval::cli::cmd_metric_eval(metric_opt);
  if (bt->parsed()) {
    if (ref_opt->count() > 0) bt_opt.reference = bt_reference;
    return autoeval::cli::cmd_bt_eval(bt_opt);
  }
  if (win->parsed()) return autoeval::cli::cmd_winrate(win_opt);
  if (exp->parsed()) {
    if (data_opt->count() > 0) exp_opt.data_path = exp_data;
    if (dgp_opt->count() > 0) exp_opt.dgp_spec = exp_dgp;
    exp_opt.n_labeled = static_cast<Eigen::Index>(exp_n_labeled);
    return autoeval::cli::cmd_experiment(exp_opt);
  }
  return autoeval::cli::kExitInput;
}
