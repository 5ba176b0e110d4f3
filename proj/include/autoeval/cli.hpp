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
//
// Command implementations behind the autoeval binary. Exit codes:
//   0 success, 2 input/usage error, 3 statistical/numerical failure,
//   4 internal invariant violation.

#ifndef AUTOEVAL_CLI_HPP_
#define AUTOEVAL_CLI_HPP_

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "autoeval/bradley_terry.hpp"
#include "autoeval/csv_io.hpp"
#include "autoeval/errors.hpp"
#include "autoeval/harness.hpp"
#include "autoeval/inference.hpp"
#include "autoeval/ppi_mean.hpp"

namespace autoeval {
namespace cli {

using json = nlohmann::ordered_json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitStatistical = 3;
inline constexpr int kExitInternal = 4;

inline EstimatorMode parse_mode(const std::string& mode) {
  if (mode == "classical") return EstimatorMode::kClassical;
  if (mode == "ppi") return EstimatorMode::kPpi;
  if (mode == "ppi++") return EstimatorMode::kPpiPlusPlus;
  throw InvalidInput("unknown mode '" + mode + "' (expected classical, ppi, or ppi++)");
}

inline std::vector<EstimatorMode> parse_modes(const std::string& csv_list) {
  std::vector<EstimatorMode> modes;
  std::string current;
  std::istringstream in(csv_list);
  while (std::getline(in, current, ',')) {
    if (!current.empty()) modes.push_back(parse_mode(current));
  }
  if (modes.empty()) throw InvalidInput("--modes must name at least one mode");
  return modes;
}

inline int max_threads_from_env() {
  const char* env = std::getenv("AUTOEVAL_THREADS");
  if (env == nullptr || *env == '\0') return 0;
  char* end = nullptr;
  long value = std::strtol(env, &end, 10);
  if (end == nullptr || *end != '\0' || value < 1) {
    throw InvalidInput("AUTOEVAL_THREADS must be a positive integer");
  }
  return static_cast<int>(value);
}

inline void write_output(const std::string& out_path, const std::string& payload) {
  if (out_path.empty() || out_path == "-") {
    std::cout << payload;
    if (payload.empty() || payload.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw InvalidInput("cannot open '" + out_path + "' for writing");
  out << payload;
  if (payload.empty() || payload.back() != '\n') out << '\n';
}

namespace detail {

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const StatisticalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStatistical;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

inline json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

inline json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

// Effective estimation lambda for a command: a --lambda override is only
// meaningful in ppi mode.
inline std::optional<double> effective_lambda(EstimatorMode mode,
                                              const std::optional<double>& override_value) {
  if (override_value) {
    if (mode != EstimatorMode::kPpi) {
      throw InvalidInput("--lambda is only accepted with --mode ppi");
    }
    if (!(*override_value >= 0.0 && *override_value <= 1.0)) {
      throw InvalidInput("--lambda must lie in [0,1]");
    }
    return override_value;
  }
  return std::nullopt;
}

}  // namespace detail

// --- metric-eval -------------------------------------------------------------

struct MetricEvalOptions {
  std::string labeled_path;
  std::string unlabeled_path;
  std::string mode = "ppi++";
  double alpha = 0.1;
  bool simultaneous = false;
  std::optional<double> lambda_override;
  std::string out_path = "-";
};

inline int cmd_metric_eval(const MetricEvalOptions& opt) {
  return detail::guarded([&]() {
    if (!(opt.alpha > 0.0 && opt.alpha < 1.0)) {
      throw InvalidInput("--alpha must lie in (0,1)");
    }
    EstimatorMode mode = parse_mode(opt.mode);
    std::optional<double> lambda = detail::effective_lambda(mode, opt.lambda_override);

    MetricPopulation labeled = read_labeled_metric_csv(opt.labeled_path);
    UnlabeledMetricFile unlabeled = read_unlabeled_metric_csv(opt.unlabeled_path);
    EvalDataset data = make_eval_dataset(labeled, unlabeled);

    PpiEstimate classical = classical_estimate(data);
    PpiEstimate est = lambda ? estimate_with_lambda(data, *lambda)
                             : estimate(data, mode);
    std::vector<ConfidenceInterval> cis = marginal_ci(est, opt.alpha);
    Eigen::VectorXd ess = effective_sample_size(est, classical);

    json out;
    out["command"] = "metric-eval";
    out["mode"] = mode_name(est.mode);
    out["alpha"] = opt.alpha;
    out["n"] = est.n;
    out["N"] = est.N;
    out["lambda"] = est.lambda;
    json models = json::array();
    for (Eigen::Index m = 0; m < est.mu_hat.size(); ++m) {
      json entry;
      entry["name"] = data.model_names[static_cast<std::size_t>(m)];
      entry["estimate"] = est.mu_hat(m);
      entry["ci_lo"] = cis[static_cast<std::size_t>(m)].lo;
      entry["ci_hi"] = cis[static_cast<std::size_t>(m)].hi;
      entry["lambda"] = est.lambda;
      entry["ess"] = ess(m);
      models.push_back(std::move(entry));
    }
    out["models"] = std::move(models);
    if (opt.simultaneous) {
      ChiSquaredRegion region = simultaneous_region(est, opt.alpha);
      json reg;
      reg["center"] = detail::vector_to_json(region.center());
      reg["shape"] = detail::matrix_to_json(region.shape());
      reg["radius"] = region.radius();
      reg["n"] = region.n();
      out["simultaneous"] = std::move(reg);
    }
    write_output(opt.out_path, out.dump(2));
    return kExitOk;
  });
}

// --- bt-eval -----------------------------------------------------------------

struct BtEvalOptions {
  std::string labeled_path;
  std::string unlabeled_path;
  std::optional<std::string> reference;
  std::string mode = "ppi++";
  double alpha = 0.1;
  std::optional<double> lambda_override;
  std::string out_path = "-";
};

inline int cmd_bt_eval(const BtEvalOptions& opt) {
  return detail::guarded([&]() {
    if (!(opt.alpha > 0.0 && opt.alpha < 1.0)) {
      throw InvalidInput("--alpha must lie in (0,1)");
    }
    EstimatorMode mode = parse_mode(opt.mode);
    std::optional<double> lambda = detail::effective_lambda(mode, opt.lambda_override);

    auto labeled_rows = read_comparison_csv(opt.labeled_path, true);
    auto unlabeled_rows = read_comparison_csv(opt.unlabeled_path, false);
    NamedComparisons named = make_comparison_dataset(labeled_rows, unlabeled_rows, opt.reference);

    BtFit fit;
    try {
      switch (mode) {
        case EstimatorMode::kClassical:
          fit = fit_classical(named.data);
          break;
        case EstimatorMode::kPpi:
          fit = fit_ppi(named.data, lambda ? *lambda : 1.0);
          break;
        case EstimatorMode::kPpiPlusPlus:
          fit = fit_ppi(named.data, std::nullopt);
          break;
      }
    } catch (const PerfectSeparation& e) {
      throw PerfectSeparation(
          "perfect separation for model '" +
              named.model_names[static_cast<std::size_t>(e.model_index())] + "'",
          e.model_index());
    } catch (const Unidentifiable& e) {
      std::string listing;
      for (int idx : e.model_indices()) {
        listing += (listing.empty() ? "" : ", ") +
                   named.model_names[static_cast<std::size_t>(idx)];
      }
      throw Unidentifiable("models {" + listing + "} are not connected to the reference",
                           e.model_indices());
    }
    if (!fit.converged) {
      throw ConvergenceFailure("bt fit did not converge within the iteration cap");
    }

    const int m = named.data.num_models;
    const double z = normal_quantile(1.0 - opt.alpha / (2.0 * (m - 1)));
    std::vector<ConfidenceInterval> bonf;
    bonf.push_back(ConfidenceInterval{0.0, 0.0, 1.0, 0});
    for (int c = 1; c < m; ++c) {
      double sd = std::sqrt(fit.sandwich(c - 1, c - 1));
      bonf.push_back(ConfidenceInterval{fit.zeta(c) - z * sd, fit.zeta(c) + z * sd,
                                        1.0 - opt.alpha / (m - 1), c});
    }
    Ranking ranking = rank_models(bonf, true);

    json out;
    out["command"] = "bt-eval";
    out["mode"] = mode_name(mode);
    out["alpha"] = opt.alpha;
    out["lambda"] = fit.lambda;
    out["reference"] = named.model_names[0];
    out["n"] = named.data.labeled.size();
    out["N"] = named.data.unlabeled.size();
    out["iterations"] = fit.iterations;
    out["grad_norm"] = fit.grad_norm;
    json models = json::array();
    for (int c = 0; c < m; ++c) {
      json entry;
      entry["name"] = named.model_names[static_cast<std::size_t>(c)];
      entry["zeta"] = fit.zeta(c);
      if (c == 0) {
        entry["ci_lo"] = nullptr;
        entry["ci_hi"] = nullptr;
      } else {
        entry["ci_lo"] = bonf[static_cast<std::size_t>(c)].lo;
        entry["ci_hi"] = bonf[static_cast<std::size_t>(c)].hi;
      }
      entry["rank"] = ranking.ranks[static_cast<std::size_t>(c)];
      models.push_back(std::move(entry));
    }
    out["models"] = std::move(models);
    write_output(opt.out_path, out.dump(2));
    return kExitOk;
  });
}

// --- winrate -----------------------------------------------------------------

struct WinrateOptions {
  std::string labeled_path;
  std::string unlabeled_path;
  std::string target;
  std::string mode = "ppi++";
  double alpha = 0.1;
  std::optional<double> lambda_override;
  std::string out_path = "-";
};

inline int cmd_winrate(const WinrateOptions& opt) {
  return detail::guarded([&]() {
    if (!(opt.alpha > 0.0 && opt.alpha < 1.0)) {
      throw InvalidInput("--alpha must lie in (0,1)");
    }
    EstimatorMode mode = parse_mode(opt.mode);
    std::optional<double> lambda = detail::effective_lambda(mode, opt.lambda_override);

    auto labeled_rows = read_comparison_csv(opt.labeled_path, true);
    auto unlabeled_rows = read_comparison_csv(opt.unlabeled_path, false);
    NamedComparisons named = make_comparison_dataset(labeled_rows, unlabeled_rows, std::nullopt);

    int target = -1;
    for (std::size_t i = 0; i < named.model_names.size(); ++i) {
      if (named.model_names[i] == opt.target) target = static_cast<int>(i);
    }
    if (target < 0) {
      throw InvalidInput("target model '" + opt.target + "' does not appear in the data");
    }

    EvalDataset reduced =
        win_rate_dataset(named.data, target, mode != EstimatorMode::kClassical);
    PpiEstimate est = lambda ? estimate_with_lambda(reduced, *lambda)
                             : estimate(reduced, mode);
    PpiEstimate classical = classical_estimate(reduced);
    std::vector<ConfidenceInterval> cis = marginal_ci(est, opt.alpha);
    Eigen::VectorXd ess = effective_sample_size(est, classical);

    json out;
    out["command"] = "winrate";
    out["target"] = opt.target;
    out["mode"] = mode_name(est.mode);
    out["alpha"] = opt.alpha;
    out["estimate"] = est.mu_hat(0);
    out["ci_lo"] = cis[0].lo;
    out["ci_hi"] = cis[0].hi;
    out["lambda"] = est.lambda;
    out["ess"] = ess(0);
    out["n"] = est.n;
    out["N"] = est.N;
    write_output(opt.out_path, out.dump(2));
    return kExitOk;
  });
}

// --- experiment --------------------------------------------------------------

struct ExperimentOptions {
  std::optional<std::string> data_path;
  std::optional<std::string> dgp_spec;
  Eigen::Index n_labeled = 0;
  int trials = 250;
  std::uint64_t seed = 0;
  double alpha = 0.1;
  std::string modes = "classical,ppi,ppi++";
  std::string out_path;  // JSON path; the flat CSV lands next to it
};

namespace detail {

// DGP spec grammar:
//   gaussian:rho=<r>[,sd=<s>][,m=<k>][,mu=<v|v|...>][,total=<T>]
//   bt:[flip=<q>][,m=<k>][,zeta=<v|v|...>][,total=<T>]
// `total` defaults to 11 * n_labeled (so N = 10n). Unset mu/zeta default to
// an evenly spaced grid.
struct DgpSpec {
  std::optional<GaussianMetricDgp> gaussian;
  std::optional<BtArenaDgp> bt;
  Eigen::Index n_total = 0;
};

inline double strict_double(const std::string& text) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
    throw InvalidInput("bad numeric value '" + text + "'");
  }
  return value;
}

inline long strict_long(const std::string& text) {
  long value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
    throw InvalidInput("bad integer value '" + text + "'");
  }
  return value;
}

inline std::vector<double> parse_value_list(const std::string& text) {
  std::vector<double> values;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, '|')) {
    values.push_back(strict_double(item));
  }
  if (values.empty()) throw InvalidInput("empty numeric list in --dgp");
  return values;
}

inline DgpSpec parse_dgp_spec(const std::string& spec, Eigen::Index n_labeled) {
  auto colon = spec.find(':');
  std::string kind = spec.substr(0, colon);
  std::map<std::string, std::string> kv;
  if (colon != std::string::npos) {
    std::string item;
    std::istringstream in(spec.substr(colon + 1));
    while (std::getline(in, item, ',')) {
      auto eq = item.find('=');
      if (eq == std::string::npos) throw InvalidInput("bad --dgp entry '" + item + "'");
      kv[item.substr(0, eq)] = item.substr(eq + 1);
    }
  }
  auto take_double = [&](const std::string& key, double fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    double v = strict_double(it->second);
    kv.erase(it);
    return v;
  };
  auto take_int = [&](const std::string& key, long fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    long v = strict_long(it->second);
    kv.erase(it);
    return v;
  };

  DgpSpec out;
  out.n_total = static_cast<Eigen::Index>(take_int("total", 11 * n_labeled));
  if (kind == "gaussian") {
    GaussianMetricDgp dgp;
    dgp.rho = take_double("rho", 0.0);
    dgp.noise_sd = take_double("sd", 1.0);
    long m = take_int("m", 3);
    if (auto it = kv.find("mu"); it != kv.end()) {
      auto values = parse_value_list(it->second);
      kv.erase(it);
      dgp.true_mu = Eigen::Map<Eigen::VectorXd>(values.data(),
                                                static_cast<Eigen::Index>(values.size()));
    } else {
      if (m < 1) throw InvalidInput("--dgp gaussian needs m >= 1");
      dgp.true_mu.resize(m);
      for (long j = 0; j < m; ++j) {
        dgp.true_mu(j) = (m == 1) ? 0.5 : 0.2 + 0.6 * static_cast<double>(j) / (m - 1);
      }
    }
    out.gaussian = std::move(dgp);
  } else if (kind == "bt") {
    BtArenaDgp dgp;
    dgp.flip_prob = take_double("flip", 0.1);
    long m = take_int("m", 4);
    if (auto it = kv.find("zeta"); it != kv.end()) {
      auto values = parse_value_list(it->second);
      kv.erase(it);
      dgp.true_zeta = Eigen::Map<Eigen::VectorXd>(values.data(),
                                                  static_cast<Eigen::Index>(values.size()));
    } else {
      if (m < 2) throw InvalidInput("--dgp bt needs m >= 2");
      dgp.true_zeta.resize(m);
      for (long j = 0; j < m; ++j) dgp.true_zeta(j) = 0.5 * static_cast<double>(j);
    }
    out.bt = std::move(dgp);
  } else {
    throw InvalidInput("unknown --dgp kind '" + kind + "' (expected gaussian or bt)");
  }
  if (!kv.empty()) {
    throw InvalidInput("unknown --dgp key '" + kv.begin()->first + "'");
  }
  return out;
}

inline json report_to_json(const TrialReport& report) {
  json out;
  out["command"] = "experiment";
  out["n_labeled"] = report.n_labeled;
  out["alpha"] = report.alpha;
  out["seed"] = report.seed;
  out["trials_attempted"] = report.trials_attempted;
  out["trials_aggregated"] = report.trials_aggregated;
  json exclusions = json::object();
  for (const auto& [reason, count] : report.exclusions) exclusions[reason] = count;
  out["exclusions"] = std::move(exclusions);
  out["model_names"] = report.model_names;
  out["ground_truth"] = vector_to_json(report.ground_truth);
  json modes = json::array();
  for (const ModeReport& mr : report.modes) {
    json entry;
    entry["mode"] = mode_name(mr.mode);
    entry["mse"] = vector_to_json(mr.mse);
    entry["mse_se"] = vector_to_json(mr.mse_se);
    entry["ess"] = vector_to_json(mr.ess);
    entry["ess_se"] = vector_to_json(mr.ess_se);
    entry["coverage"] = vector_to_json(mr.coverage);
    entry["coverage_se"] = vector_to_json(mr.coverage_se);
    entry["mean_width"] = vector_to_json(mr.mean_width);
    entry["mean_width_se"] = vector_to_json(mr.mean_width_se);
    entry["rank_corr"] = mr.rank_corr;
    entry["rank_corr_se"] = mr.rank_corr_se;
    entry["mean_lambda"] = mr.mean_lambda;
    entry["mean_lambda_se"] = mr.mean_lambda_se;
    entry["fully_tied_trials"] = mr.fully_tied_trials;
    modes.push_back(std::move(entry));
  }
  out["modes"] = std::move(modes);
  return out;
}

// One row per mode x model, plot-ready.
inline std::string report_to_csv(const TrialReport& report) {
  std::ostringstream out;
  out << "mode,model,mse,mse_se,ess,ess_se,coverage,coverage_se,mean_width,"
         "mean_width_se,rank_corr,rank_corr_se,mean_lambda,mean_lambda_se\n";
  for (const ModeReport& mr : report.modes) {
    for (Eigen::Index m = 0; m < mr.mse.size(); ++m) {
      out << mode_name(mr.mode) << ',' << report.model_names[static_cast<std::size_t>(m)]
          << ',' << csv::format_double(mr.mse(m)) << ',' << csv::format_double(mr.mse_se(m))
          << ',' << csv::format_double(mr.ess(m)) << ',' << csv::format_double(mr.ess_se(m))
          << ',' << csv::format_double(mr.coverage(m)) << ','
          << csv::format_double(mr.coverage_se(m)) << ','
          << csv::format_double(mr.mean_width(m)) << ','
          << csv::format_double(mr.mean_width_se(m)) << ','
          << csv::format_double(mr.rank_corr) << ',' << csv::format_double(mr.rank_corr_se)
          << ',' << csv::format_double(mr.mean_lambda) << ','
          << csv::format_double(mr.mean_lambda_se) << "\n";
    }
  }
  return out.str();
}

inline std::string sibling_csv_path(const std::string& json_path) {
  auto dot = json_path.find_last_of('.');
  auto slash = json_path.find_last_of('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) {
    return json_path + ".csv";
  }
  return json_path.substr(0, dot) + ".csv";
}

// Detect the --data schema from the header: comparison files carry model_a.
inline bool looks_like_comparison_csv(const std::string& path) {
  csv::Table table = csv::read_table(path);
  for (const auto& h : table.header) {
    if (h == "model_a") return true;
  }
  return false;
}

}  // namespace detail

inline int cmd_experiment(const ExperimentOptions& opt) {
  return detail::guarded([&]() {
    if (opt.data_path.has_value() == opt.dgp_spec.has_value()) {
      throw InvalidInput("exactly one of --data and --dgp is required");
    }
    if (opt.out_path.empty() || opt.out_path == "-") {
      throw InvalidInput("experiment requires --out (a JSON file path)");
    }

    TrialConfig config;
    config.n_labeled = opt.n_labeled;
    config.num_trials = opt.trials;
    config.alpha = opt.alpha;
    config.seed = opt.seed;
    config.modes = parse_modes(opt.modes);
    config.max_threads = max_threads_from_env();

    TrialReport report;
    if (opt.dgp_spec) {
      detail::DgpSpec spec = detail::parse_dgp_spec(*opt.dgp_spec, opt.n_labeled);
      config.n_total = spec.n_total;
      report = spec.gaussian ? run_experiment(*spec.gaussian, config)
                             : run_experiment(*spec.bt, config);
    } else if (detail::looks_like_comparison_csv(*opt.data_path)) {
      auto rows = read_comparison_csv(*opt.data_path, true);
      NamedComparisons named = make_comparison_dataset(rows, {}, std::nullopt);
      ComparisonPopulation pop;
      pop.records = named.data.labeled;
      pop.num_models = named.data.num_models;
      pop.model_names = named.model_names;
      report = run_experiment(pop, config);
    } else {
      MetricPopulation pop = read_labeled_metric_csv(*opt.data_path);
      report = run_experiment(pop, config);
    }

    write_output(opt.out_path, detail::report_to_json(report).dump(2));
    std::ofstream csv_out(detail::sibling_csv_path(opt.out_path), std::ios::binary);
    if (!csv_out) {
      throw InvalidInput("cannot open '" + detail::sibling_csv_path(opt.out_path) +
                         "' for writing");
    }
    csv_out << detail::report_to_csv(report);
    return kExitOk;
  });
}

}  // namespace cli
}  // namespace autoeval

#endif  // AUTOEVAL_CLI_HPP_
