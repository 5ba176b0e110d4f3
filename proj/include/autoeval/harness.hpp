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
// Monte Carlo experiment protocol: repeated random labeled/unlabeled splits,
// estimator comparison, and aggregation into MSE / ESS / coverage / width /
// rank-correlation summaries, plus the synthetic data generators used by the
// acceptance suite. Trials run on independent RNG streams and aggregation is
// a reduction ordered by trial index, so reports are identical regardless of
// the thread schedule.

#ifndef AUTOEVAL_HARNESS_HPP_
#define AUTOEVAL_HARNESS_HPP_

#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "autoeval/bradley_terry.hpp"
#include "autoeval/errors.hpp"
#include "autoeval/inference.hpp"
#include "autoeval/metrics.hpp"
#include "autoeval/ppi_mean.hpp"
#include "autoeval/rng.hpp"

namespace autoeval {

// Gaussian per-point metrics: phi and e_hat share mean mu_m and standard
// deviation noise_sd, with correlation rho between them. rho = 1 makes the
// annotator expectations coincide with the realized metric.
struct GaussianMetricDgp {
  Eigen::VectorXd true_mu;
  double noise_sd = 1.0;
  double rho = 0.0;
};

// Pairwise-comparison arena: uniformly random model pairs, y drawn from the
// Bradley-Terry probability, y_hat equal to y flipped with flip_prob.
struct BtArenaDgp {
  Eigen::VectorXd true_zeta;
  double flip_prob = 0.0;
};

using SyntheticDgp = std::variant<GaussianMetricDgp, BtArenaDgp>;

// Fully labeled populations from which trials sample labeled subsets.
struct MetricPopulation {
  Eigen::MatrixXd phi;   // rows x M
  Eigen::MatrixXd ehat;  // rows x M
  std::vector<std::string> model_names;

  Eigen::Index rows() const { return phi.rows(); }
};

struct ComparisonPopulation {
  std::vector<ComparisonRecord> records;  // all carry y and y_hat
  int num_models = 0;
  std::vector<std::string> model_names;

  Eigen::Index rows() const { return static_cast<Eigen::Index>(records.size()); }
};

inline MetricPopulation generate(const GaussianMetricDgp& dgp, Eigen::Index n_total,
                                 Rng& rng) {
  if (!(dgp.rho >= -1.0 && dgp.rho <= 1.0)) {
    throw InvalidInput("gaussian dgp: rho must lie in [-1,1]");
  }
  if (!(dgp.noise_sd >= 0.0)) throw InvalidInput("gaussian dgp: noise_sd must be >= 0");
  const Eigen::Index m = dgp.true_mu.size();
  MetricPopulation pop;
  pop.phi.resize(n_total, m);
  pop.ehat.resize(n_total, m);
  const double tail = std::sqrt(std::max(0.0, 1.0 - dgp.rho * dgp.rho));
  for (Eigen::Index i = 0; i < n_total; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      double z1 = rng.normal();
      double z2 = rng.normal();
      pop.phi(i, j) = dgp.true_mu(j) + dgp.noise_sd * z1;
      pop.ehat(i, j) = dgp.true_mu(j) + dgp.noise_sd * (dgp.rho * z1 + tail * z2);
    }
  }
  pop.model_names.reserve(static_cast<std::size_t>(m));
  for (Eigen::Index j = 0; j < m; ++j) {
    pop.model_names.push_back("model_" + std::to_string(j));
  }
  return pop;
}

inline ComparisonPopulation generate(const BtArenaDgp& dgp, Eigen::Index n_total,
                                     Rng& rng) {
  if (!(dgp.flip_prob >= 0.0 && dgp.flip_prob <= 0.5)) {
    throw InvalidInput("bt arena dgp: flip probability must lie in [0, 0.5]");
  }
  const int m = static_cast<int>(dgp.true_zeta.size());
  if (m < 2) throw InvalidInput("bt arena dgp: needs at least two models");
  Eigen::VectorXd zeta = dgp.true_zeta.array() - dgp.true_zeta(0);

  ComparisonPopulation pop;
  pop.num_models = m;
  pop.records.reserve(static_cast<std::size_t>(n_total));
  for (Eigen::Index i = 0; i < n_total; ++i) {
    int a = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(m)));
    int b = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(m - 1)));
    if (b >= a) ++b;
    double y = rng.bernoulli(sigmoid(zeta(b) - zeta(a))) ? 1.0 : 0.0;
    double y_hat = rng.bernoulli(dgp.flip_prob) ? 1.0 - y : y;
    pop.records.push_back(ComparisonRecord{a, b, y, y_hat});
  }
  for (int j = 0; j < m; ++j) {
    pop.model_names.push_back("model_" + std::to_string(j));
  }
  return pop;
}

// Uniform without-replacement split: n_labeled points keep their ground-truth
// labels, the rest are stripped to annotator expectations only.
inline EvalDataset split_trial(const MetricPopulation& pop, Eigen::Index n_labeled,
                               Rng& rng) {
  const Eigen::Index total = pop.rows();
  if (n_labeled >= total) {
    throw InsufficientData("split_trial: n_labeled must be smaller than the dataset");
  }
  auto chosen = rng.sample_without_replacement(static_cast<std::size_t>(total),
                                               static_cast<std::size_t>(n_labeled));
  std::vector<bool> is_labeled(static_cast<std::size_t>(total), false);
  for (std::size_t idx : chosen) is_labeled[idx] = true;

  EvalDataset ds;
  ds.labeled_phi.resize(n_labeled, pop.phi.cols());
  ds.labeled_ehat.resize(n_labeled, pop.phi.cols());
  ds.unlabeled_ehat.resize(total - n_labeled, pop.phi.cols());
  ds.model_names = pop.model_names;
  Eigen::Index li = 0, ui = 0;
  for (Eigen::Index i = 0; i < total; ++i) {
    if (is_labeled[static_cast<std::size_t>(i)]) {
      ds.labeled_phi.row(li) = pop.phi.row(i);
      ds.labeled_ehat.row(li) = pop.ehat.row(i);
      ++li;
    } else {
      ds.unlabeled_ehat.row(ui) = pop.ehat.row(i);
      ++ui;
    }
  }
  return ds;
}

inline ComparisonDataset split_trial(const ComparisonPopulation& pop,
                                     Eigen::Index n_labeled, Rng& rng) {
  const Eigen::Index total = pop.rows();
  if (n_labeled >= total) {
    throw InsufficientData("split_trial: n_labeled must be smaller than the dataset");
  }
  auto chosen = rng.sample_without_replacement(static_cast<std::size_t>(total),
                                               static_cast<std::size_t>(n_labeled));
  std::vector<bool> is_labeled(static_cast<std::size_t>(total), false);
  for (std::size_t idx : chosen) is_labeled[idx] = true;

  ComparisonDataset ds;
  ds.num_models = pop.num_models;
  for (Eigen::Index i = 0; i < total; ++i) {
    const ComparisonRecord& r = pop.records[static_cast<std::size_t>(i)];
    if (is_labeled[static_cast<std::size_t>(i)]) {
      ds.labeled.push_back(r);
    } else {
      ds.unlabeled.push_back(ComparisonRecord{r.a, r.b, std::nullopt, r.y_hat});
    }
  }
  return ds;
}

struct TrialConfig {
  Eigen::Index n_labeled = 0;
  Eigen::Index n_total = 0;  // population drawn per trial for DGP inputs
  int num_trials = 250;
  double alpha = 0.1;
  std::uint64_t seed = 0;
  std::vector<EstimatorMode> modes = {EstimatorMode::kClassical, EstimatorMode::kPpi,
                                      EstimatorMode::kPpiPlusPlus};
  int max_threads = 0;  // 0 = hardware concurrency

  void validate() const {
    if (n_labeled < 2) throw InvalidInput("trial config: n_labeled must be >= 2");
    if (num_trials < 1) throw InvalidInput("trial config: num_trials must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidProbability("trial config: alpha must lie in (0,1)");
    if (modes.empty()) throw InvalidInput("trial config: at least one mode required");
  }
};

struct ModeReport {
  EstimatorMode mode = EstimatorMode::kClassical;
  Eigen::VectorXd mse, mse_se;
  Eigen::VectorXd ess, ess_se;
  Eigen::VectorXd coverage, coverage_se;
  Eigen::VectorXd mean_width, mean_width_se;
  double rank_corr = 0.0, rank_corr_se = 0.0;
  double mean_lambda = 0.0, mean_lambda_se = 0.0;
  int fully_tied_trials = 0;
};

struct TrialReport {
  std::vector<ModeReport> modes;
  int trials_attempted = 0;
  int trials_aggregated = 0;
  std::map<std::string, int> exclusions;  // reason -> count
  Eigen::VectorXd ground_truth;
  std::vector<std::string> model_names;
  Eigen::Index n_labeled = 0;
  double alpha = 0.1;
  std::uint64_t seed = 0;
};

namespace detail {

struct TrialOutcome {
  // Index-aligned with the requested modes.
  std::vector<Eigen::VectorXd> points;
  std::vector<Eigen::VectorXd> variances;  // estimator variance per coordinate
  std::vector<double> lambdas;
  Eigen::VectorXd classical_variance;
};

inline std::string exclusion_reason(const StatisticalError& e) {
  if (dynamic_cast<const PerfectSeparation*>(&e)) return "perfect_separation";
  if (dynamic_cast<const Unidentifiable*>(&e)) return "unidentifiable";
  if (dynamic_cast<const ConvergenceFailure*>(&e)) return "nonconvergence";
  if (dynamic_cast<const InsufficientData*>(&e)) return "insufficient_data";
  if (dynamic_cast<const SingularHessian*>(&e)) return "singular_hessian";
  if (dynamic_cast<const SingularCovariance*>(&e)) return "singular_covariance";
  if (dynamic_cast<const DegenerateInput*>(&e)) return "degenerate_input";
  return "statistical_error";
}

inline int resolve_threads(int requested, int num_trials) {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  int threads = (requested > 0) ? requested : hw;
  return std::max(1, std::min(threads, num_trials));
}

// Running mean / standard-error accumulator driven in trial order.
class MomentAccumulator {
 public:
  explicit MomentAccumulator(Eigen::Index dim)
      : sum_(Eigen::VectorXd::Zero(dim)), sumsq_(Eigen::VectorXd::Zero(dim)) {}

  void add(const Eigen::VectorXd& x) {
    sum_ += x;
    sumsq_ += x.cwiseProduct(x);
    ++count_;
  }

  Eigen::VectorXd mean() const {
    return count_ > 0 ? (sum_ / count_).eval() : Eigen::VectorXd::Zero(sum_.size());
  }

  // Monte Carlo standard error of the mean.
  Eigen::VectorXd standard_error() const {
    if (count_ < 2) return Eigen::VectorXd::Zero(sum_.size());
    Eigen::VectorXd var =
        (sumsq_ - sum_.cwiseProduct(sum_) / count_) / (count_ - 1.0);
    return (var.cwiseMax(0.0) / count_).cwiseSqrt();
  }

 private:
  Eigen::VectorXd sum_, sumsq_;
  double count_ = 0;
};

using TrialFn = std::function<TrialOutcome(Rng& rng)>;

inline TrialReport run_trials(const TrialConfig& config, const Eigen::VectorXd& truth,
                              const std::vector<bool>& fixed_coordinate,
                              const std::vector<std::string>& model_names,
                              const TrialFn& trial_fn) {
  config.validate();
  const Eigen::Index m = truth.size();
  const int num_trials = config.num_trials;
  const std::size_t num_modes = config.modes.size();

  struct Slot {
    bool ok = false;
    TrialOutcome outcome;
    std::string reason;
  };
  std::vector<Slot> slots(static_cast<std::size_t>(num_trials));

  const int threads = resolve_threads(config.max_threads, num_trials);
  std::atomic<int> next{0};
  std::exception_ptr fatal;
  std::mutex fatal_mutex;
  auto worker = [&]() {
    for (;;) {
      int t = next.fetch_add(1);
      if (t >= num_trials) return;
      Rng rng = Rng::stream(config.seed, static_cast<std::uint64_t>(t));
      Slot& slot = slots[static_cast<std::size_t>(t)];
      try {
        slot.outcome = trial_fn(rng);
        slot.ok = true;
      } catch (const StatisticalError& e) {
        slot.reason = exclusion_reason(e);
      } catch (...) {
        std::lock_guard<std::mutex> lock(fatal_mutex);
        if (!fatal) fatal = std::current_exception();
        return;
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (fatal) std::rethrow_exception(fatal);

  const double z = normal_quantile(1.0 - config.alpha / 2.0);
  int num_free = 0;
  for (bool f : fixed_coordinate) num_free += f ? 0 : 1;
  const double z_bonf =
      normal_quantile(1.0 - config.alpha / (2.0 * std::max(1, num_free)));

  std::vector<MomentAccumulator> mse_acc(num_modes, MomentAccumulator(m));
  std::vector<MomentAccumulator> ess_acc(num_modes, MomentAccumulator(m));
  std::vector<MomentAccumulator> cover_acc(num_modes, MomentAccumulator(m));
  std::vector<MomentAccumulator> width_acc(num_modes, MomentAccumulator(m));
  std::vector<MomentAccumulator> corr_acc(num_modes, MomentAccumulator(1));
  std::vector<MomentAccumulator> lambda_acc(num_modes, MomentAccumulator(1));
  std::vector<int> tied(num_modes, 0);

  TrialReport report;
  report.trials_attempted = num_trials;
  report.ground_truth = truth;
  report.model_names = model_names;
  report.n_labeled = config.n_labeled;
  report.alpha = config.alpha;
  report.seed = config.seed;

  const double n = static_cast<double>(config.n_labeled);
  for (const Slot& slot : slots) {
    if (!slot.ok) {
      report.exclusions[slot.reason] += 1;
      continue;
    }
    report.trials_aggregated += 1;
    for (std::size_t j = 0; j < num_modes; ++j) {
      const Eigen::VectorXd& point = slot.outcome.points[j];
      const Eigen::VectorXd& variance = slot.outcome.variances[j];
      Eigen::VectorXd err = point - truth;
      mse_acc[j].add(err.cwiseProduct(err));

      Eigen::VectorXd cover(m), width(m), ess(m);
      std::vector<ConfidenceInterval> bonf;
      bonf.reserve(static_cast<std::size_t>(m));
      for (Eigen::Index c = 0; c < m; ++c) {
        const bool fixed = fixed_coordinate[static_cast<std::size_t>(c)];
        double sd = fixed ? 0.0 : std::sqrt(variance(c));
        double half = z * sd;
        cover(c) = std::abs(err(c)) <= half ? 1.0 : 0.0;
        width(c) = 2.0 * half;
        ess(c) = fixed ? n
                       : (variance(c) > 0.0
                              ? n * slot.outcome.classical_variance(c) / variance(c)
                              : std::numeric_limits<double>::infinity());
        double half_b = z_bonf * sd;
        bonf.push_back(ConfidenceInterval{
            point(c) - half_b, point(c) + half_b,
            1.0 - config.alpha / std::max(1, num_free), static_cast<int>(c)});
      }
      cover_acc[j].add(cover);
      width_acc[j].add(width);
      ess_acc[j].add(ess);

      Ranking ranking = rank_models(bonf, true);
      RankCorrelation rc = rank_correlation(ranking, truth);
      if (rc.degenerate) tied[j] += 1;
      corr_acc[j].add(Eigen::VectorXd::Constant(1, rc.rho));
      lambda_acc[j].add(Eigen::VectorXd::Constant(1, slot.outcome.lambdas[j]));
    }
  }

  for (std::size_t j = 0; j < num_modes; ++j) {
    ModeReport mr;
    mr.mode = config.modes[j];
    mr.mse = mse_acc[j].mean();
    mr.mse_se = mse_acc[j].standard_error();
    mr.ess = ess_acc[j].mean();
    mr.ess_se = ess_acc[j].standard_error();
    mr.coverage = cover_acc[j].mean();
    mr.coverage_se = cover_acc[j].standard_error();
    mr.mean_width = width_acc[j].mean();
    mr.mean_width_se = width_acc[j].standard_error();
    mr.rank_corr = corr_acc[j].mean()(0);
    mr.rank_corr_se = corr_acc[j].standard_error()(0);
    mr.mean_lambda = lambda_acc[j].mean()(0);
    mr.mean_lambda_se = lambda_acc[j].standard_error()(0);
    mr.fully_tied_trials = tied[j];
    report.modes.push_back(std::move(mr));
  }
  if (report.trials_aggregated == 0) {
    throw InsufficientData("run_experiment: every trial was excluded");
  }
  return report;
}

inline TrialOutcome metric_trial_outcome(const EvalDataset& ds,
                                         const std::vector<EstimatorMode>& modes) {
  TrialOutcome out;
  PpiEstimate classical = classical_estimate(ds);
  const double n = static_cast<double>(classical.n);
  out.classical_variance = classical.v_hat.diagonal() / n;
  for (EstimatorMode mode : modes) {
    PpiEstimate est =
        (mode == EstimatorMode::kClassical) ? classical : estimate(ds, mode);
    out.points.push_back(est.mu_hat);
    out.variances.push_back(est.v_hat.diagonal() / n);
    out.lambdas.push_back(est.lambda);
  }
  return out;
}

inline TrialOutcome comparison_trial_outcome(const ComparisonDataset& ds,
                                             const std::vector<EstimatorMode>& modes) {
  TrialOutcome out;
  const Eigen::Index m = ds.num_models;
  auto expand = [&](const BtFit& fit, Eigen::VectorXd& variance) {
    if (!fit.converged) {
      throw ConvergenceFailure("bt fit did not converge within the iteration cap");
    }
    variance = Eigen::VectorXd::Zero(m);
    variance.tail(m - 1) = fit.sandwich.diagonal();
  };

  BtFit classical = fit_classical(ds);
  Eigen::VectorXd classical_var;
  expand(classical, classical_var);
  out.classical_variance = classical_var;

  for (EstimatorMode mode : modes) {
    BtFit fit;
    switch (mode) {
      case EstimatorMode::kClassical:
        fit = classical;
        break;
      case EstimatorMode::kPpi:
        fit = fit_ppi(ds, 1.0);
        break;
      case EstimatorMode::kPpiPlusPlus:
        fit = fit_ppi(ds, std::nullopt);
        break;
    }
    Eigen::VectorXd variance;
    expand(fit, variance);
    out.points.push_back(fit.zeta);
    out.variances.push_back(variance);
    out.lambdas.push_back(fit.lambda);
  }
  return out;
}

}  // namespace detail

// --- DGP-driven experiments: a fresh population is drawn each trial and the
// --- ground truth is the true parameter vector.

inline TrialReport run_experiment(const GaussianMetricDgp& dgp, const TrialConfig& config) {
  config.validate();
  if (config.n_total <= config.n_labeled) {
    throw InvalidInput("run_experiment: dgp runs need n_total > n_labeled");
  }
  const Eigen::Index m = dgp.true_mu.size();
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < m; ++j) names.push_back("model_" + std::to_string(j));
  std::vector<bool> fixed(static_cast<std::size_t>(m), false);
  return detail::run_trials(
      config, dgp.true_mu, fixed, names, [&](Rng& rng) {
        MetricPopulation pop = generate(dgp, config.n_total, rng);
        EvalDataset ds = split_trial(pop, config.n_labeled, rng);
        return detail::metric_trial_outcome(ds, config.modes);
      });
}

inline TrialReport run_experiment(const BtArenaDgp& dgp, const TrialConfig& config) {
  config.validate();
  if (config.n_total <= config.n_labeled) {
    throw InvalidInput("run_experiment: dgp runs need n_total > n_labeled");
  }
  const Eigen::Index m = dgp.true_zeta.size();
  Eigen::VectorXd truth = dgp.true_zeta.array() - dgp.true_zeta(0);
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < m; ++j) names.push_back("model_" + std::to_string(j));
  std::vector<bool> fixed(static_cast<std::size_t>(m), false);
  fixed[0] = true;
  return detail::run_trials(
      config, truth, fixed, names, [&](Rng& rng) {
        ComparisonPopulation pop = generate(dgp, config.n_total, rng);
        ComparisonDataset ds = split_trial(pop, config.n_labeled, rng);
        return detail::comparison_trial_outcome(ds, config.modes);
      });
}

// --- Fixed-dataset experiments: each trial re-splits the population and the
// --- ground truth is the full-data classical estimate.

inline TrialReport run_experiment(const MetricPopulation& pop, const TrialConfig& config) {
  config.validate();
  if (pop.rows() <= config.n_labeled) {
    throw InsufficientData("run_experiment: n_labeled must be smaller than the dataset");
  }
  Eigen::VectorXd truth = pop.phi.colwise().mean();
  std::vector<bool> fixed(pop.model_names.size(), false);
  return detail::run_trials(
      config, truth, fixed, pop.model_names, [&](Rng& rng) {
        EvalDataset ds = split_trial(pop, config.n_labeled, rng);
        return detail::metric_trial_outcome(ds, config.modes);
      });
}

inline TrialReport run_experiment(const ComparisonPopulation& pop,
                                  const TrialConfig& config) {
  config.validate();
  if (pop.rows() <= config.n_labeled) {
    throw InsufficientData("run_experiment: n_labeled must be smaller than the dataset");
  }
  ComparisonDataset full;
  full.num_models = pop.num_models;
  full.labeled = pop.records;
  BtFit full_fit = fit_classical(full);
  if (!full_fit.converged) {
    throw ConvergenceFailure("run_experiment: full-data reference fit did not converge");
  }
  std::vector<bool> fixed(static_cast<std::size_t>(pop.num_models), false);
  fixed[0] = true;
  return detail::run_trials(
      config, full_fit.zeta, fixed, pop.model_names, [&](Rng& rng) {
        ComparisonDataset ds = split_trial(pop, config.n_labeled, rng);
        return detail::comparison_trial_outcome(ds, config.modes);
      });
}

}  // namespace autoeval

#endif  // AUTOEVAL_HARNESS_HPP_
