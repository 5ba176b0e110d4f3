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
// Bradley-Terry strength estimation from pairwise comparisons. A comparison
// of models (a, b) wins for b with probability sigmoid(zeta_b - zeta_a);
// model 0 is the reference with zeta_0 pinned to 0. The classical fit is the
// logistic-regression MLE on the human-labeled comparisons; the
// prediction-powered fit minimizes
//
//   (1/n) sum_i [ loss(x_i, y_i) - lambda * loss(x_i, yhat_i) ]
//     + (lambda/N) sum_i loss(x_i^u, yhat_i^u)
//
// whose Hessian is (1-lambda) * H_labeled + lambda * H_unlabeled (the
// logistic Hessian does not depend on labels), hence convex for lambda in
// [0,1]. Coefficient covariance is the sandwich H^{-1} Sigma H^{-1} / n.

#ifndef AUTOEVAL_BRADLEY_TERRY_HPP_
#define AUTOEVAL_BRADLEY_TERRY_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "autoeval/errors.hpp"
#include "autoeval/ppi_mean.hpp"

namespace autoeval {

// One pairwise comparison; y = 1 means model b's answer was preferred.
// Labels may be soft (averaged annotators), anywhere in [0,1].
struct ComparisonRecord {
  int a = 0;
  int b = 0;
  std::optional<double> y;      // human preference
  std::optional<double> y_hat;  // AI preference
};

struct ComparisonDataset {
  std::vector<ComparisonRecord> labeled;    // carry y (and y_hat for PPI)
  std::vector<ComparisonRecord> unlabeled;  // carry y_hat
  int num_models = 0;

  void validate() const {
    if (num_models < 2) throw InsufficientData("comparison dataset needs at least two models");
    auto check_indices = [&](const ComparisonRecord& r) {
      if (r.a < 0 || r.a >= num_models || r.b < 0 || r.b >= num_models) {
        throw InvalidComparison("comparison refers to an unknown model index");
      }
      if (r.a == r.b) throw InvalidComparison("comparison must involve two distinct models");
    };
    auto check_unit = [](const std::optional<double>& v, const char* what) {
      if (v && !(*v >= 0.0 && *v <= 1.0)) {
        throw InvalidComparison(std::string(what) + " must lie in [0,1]");
      }
    };
    for (const auto& r : labeled) {
      check_indices(r);
      if (!r.y) throw InvalidComparison("labeled comparison is missing y");
      check_unit(r.y, "y");
      check_unit(r.y_hat, "y_hat");
    }
    for (const auto& r : unlabeled) {
      check_indices(r);
      if (!r.y_hat) throw InvalidComparison("unlabeled comparison is missing y_hat");
      check_unit(r.y_hat, "y_hat");
    }
  }
};

// Two-hot design vector over the free coordinates 1..M-1 (model 0 dropped):
// -1 at a, +1 at b.
inline Eigen::VectorXd encode_design(const ComparisonRecord& record, int num_models) {
  if (record.a == record.b) {
    throw InvalidComparison("encode_design: comparison must involve two distinct models");
  }
  if (record.a < 0 || record.a >= num_models || record.b < 0 || record.b >= num_models) {
    throw InvalidComparison("encode_design: model index out of range");
  }
  Eigen::VectorXd x = Eigen::VectorXd::Zero(num_models - 1);
  if (record.a > 0) x(record.a - 1) = -1.0;
  if (record.b > 0) x(record.b - 1) = 1.0;
  return x;
}

inline double sigmoid(double t) {
  if (t >= 0.0) {
    return 1.0 / (1.0 + std::exp(-t));
  }
  double e = std::exp(t);
  return e / (1.0 + e);
}

namespace detail {

// softplus(t) = log(1 + e^t), stable for large |t|.
inline double softplus(double t) {
  return (t > 0.0) ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

// Binary cross-entropy at margin t: -y log s - (1-y) log(1-s), s = sigmoid(t).
inline double bce(double t, double y) {
  return y * softplus(-t) + (1.0 - y) * softplus(t);
}

}  // namespace detail

// Binary cross-entropy loss of the comparison (x, y) at coefficients
// zeta_free (coordinates 1..M-1), with gradient and Hessian companions.
inline double logistic_loss(const Eigen::VectorXd& zeta_free,
                            const Eigen::VectorXd& x, double y) {
  return detail::bce(x.dot(zeta_free), y);
}

inline Eigen::VectorXd logistic_loss_gradient(const Eigen::VectorXd& zeta_free,
                                              const Eigen::VectorXd& x, double y) {
  return (sigmoid(x.dot(zeta_free)) - y) * x;
}

// Label-independent: sigma (1 - sigma) x x^T.
inline Eigen::MatrixXd logistic_loss_hessian(const Eigen::VectorXd& zeta_free,
                                             const Eigen::VectorXd& x) {
  double s = sigmoid(x.dot(zeta_free));
  return s * (1.0 - s) * (x * x.transpose());
}

struct BtFit {
  Eigen::VectorXd zeta;      // M coefficients, zeta(0) == 0 exactly
  double lambda = 0.0;
  Eigen::MatrixXd sandwich;  // (M-1) x (M-1) covariance of zeta_free
  int iterations = 0;
  double grad_norm = std::numeric_limits<double>::infinity();
  bool converged = false;
};

namespace detail {

constexpr double kBtGradTol = 1e-8;
constexpr int kBtMaxIterations = 100;
constexpr double kBtSeparationBound = 30.0;
constexpr double kArmijoConstant = 1e-4;

struct BtObjective {
  double value = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

// Objective, gradient and (optionally) Hessian of the prediction-powered
// loss at full coefficient vector zeta. lambda == 0 never touches y_hat.
inline BtObjective eval_bt_objective(const ComparisonDataset& data, double lambda,
                                     const Eigen::VectorXd& zeta, bool want_hess) {
  const int mfree = data.num_models - 1;
  BtObjective out;
  out.grad = Eigen::VectorXd::Zero(mfree);
  if (want_hess) out.hess = Eigen::MatrixXd::Zero(mfree, mfree);

  auto scatter = [&](int a, int b, double coeff, double weight, bool hess) {
    // coeff multiplies the two-hot design (-1 at a, +1 at b).
    if (b > 0) out.grad(b - 1) += coeff;
    if (a > 0) out.grad(a - 1) -= coeff;
    if (!hess) return;
    if (b > 0) out.hess(b - 1, b - 1) += weight;
    if (a > 0) out.hess(a - 1, a - 1) += weight;
    if (a > 0 && b > 0) {
      out.hess(a - 1, b - 1) -= weight;
      out.hess(b - 1, a - 1) -= weight;
    }
  };

  const double n = static_cast<double>(data.labeled.size());
  for (const auto& r : data.labeled) {
    double t = zeta(r.b) - zeta(r.a);
    double s = sigmoid(t);
    double y = *r.y;
    double yh = (lambda > 0.0) ? *r.y_hat : 0.0;
    out.value += (bce(t, y) - lambda * bce(t, yh)) / n;
    scatter(r.a, r.b, ((1.0 - lambda) * s - y + lambda * yh) / n,
            (1.0 - lambda) * s * (1.0 - s) / n, want_hess);
  }
  if (lambda > 0.0) {
    const double big_n = static_cast<double>(data.unlabeled.size());
    for (const auto& r : data.unlabeled) {
      double t = zeta(r.b) - zeta(r.a);
      double s = sigmoid(t);
      double yh = *r.y_hat;
      out.value += lambda * bce(t, yh) / big_n;
      scatter(r.a, r.b, lambda * (s - yh) / big_n,
              lambda * s * (1.0 - s) / big_n, want_hess);
    }
  }
  return out;
}

// Every model must be reachable from the reference in the comparison graph,
// otherwise its coefficient is unidentifiable.
inline void check_connected(const ComparisonDataset& data, bool include_unlabeled) {
  std::vector<std::vector<int>> adjacency(static_cast<std::size_t>(data.num_models));
  auto add = [&](const ComparisonRecord& r) {
    adjacency[static_cast<std::size_t>(r.a)].push_back(r.b);
    adjacency[static_cast<std::size_t>(r.b)].push_back(r.a);
  };
  for (const auto& r : data.labeled) add(r);
  if (include_unlabeled) {
    for (const auto& r : data.unlabeled) add(r);
  }

  std::vector<bool> seen(static_cast<std::size_t>(data.num_models), false);
  std::vector<int> stack = {0};
  seen[0] = true;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int w : adjacency[static_cast<std::size_t>(v)]) {
      if (!seen[static_cast<std::size_t>(w)]) {
        seen[static_cast<std::size_t>(w)] = true;
        stack.push_back(w);
      }
    }
  }
  std::vector<int> missing;
  std::string listing;
  for (int m = 0; m < data.num_models; ++m) {
    if (!seen[static_cast<std::size_t>(m)]) {
      listing += (listing.empty() ? "" : ", ") + std::to_string(m);
      missing.push_back(m);
    }
  }
  if (!missing.empty()) {
    throw Unidentifiable("comparison graph does not connect models {" + listing +
                             "} to the reference",
                         missing);
  }
}

inline void check_separation(const Eigen::VectorXd& zeta) {
  Eigen::Index worst = 0;
  double mag = zeta.cwiseAbs().maxCoeff(&worst);
  if (mag > kBtSeparationBound) {
    throw PerfectSeparation(
        "perfect separation: coefficient of model " + std::to_string(worst) +
            " diverged during optimization",
        static_cast<int>(worst));
  }
}

// The objective is convex, so if its directional derivative still points
// downhill in the limit zeta_m -> +/-inf, the minimizer along that ray lies
// at infinity and the coefficient is separated. The limit is computable
// exactly: every sigmoid saturates to the comparison's winner indicator.
inline void check_limit_separation(const ComparisonDataset& data, double lambda) {
  const double n = static_cast<double>(data.labeled.size());
  const double big_n = static_cast<double>(data.unlabeled.size());
  for (int m = 1; m < data.num_models; ++m) {
    for (double direction : {1.0, -1.0}) {
      double limit = 0.0;
      for (const auto& r : data.labeled) {
        if (r.a != m && r.b != m) continue;
        // sigma(zeta_b - zeta_a) in the limit along direction * e_m.
        double s_lim = (r.b == m) == (direction > 0.0) ? 1.0 : 0.0;
        double yh = (lambda > 0.0) ? *r.y_hat : 0.0;
        double coeff = ((1.0 - lambda) * s_lim - *r.y + lambda * yh) / n;
        limit += direction * (r.b == m ? coeff : -coeff);
      }
      if (lambda > 0.0) {
        for (const auto& r : data.unlabeled) {
          if (r.a != m && r.b != m) continue;
          double s_lim = (r.b == m) == (direction > 0.0) ? 1.0 : 0.0;
          double coeff = lambda * (s_lim - *r.y_hat) / big_n;
          limit += direction * (r.b == m ? coeff : -coeff);
        }
      }
      if (limit <= 1e-12) {
        throw PerfectSeparation(
            "perfect separation: model " + std::to_string(m) +
                (direction > 0.0 ? " never loses" : " never wins") +
                " in the weighted comparisons, so its coefficient diverges",
            m);
      }
    }
  }
}

// Damped Newton from zeta = 0 with step-halving Armijo line search. The
// Hessian at the returned iterate is stored in *final_hess when requested.
inline BtFit newton_fit(const ComparisonDataset& data, double lambda,
                        Eigen::MatrixXd* final_hess = nullptr) {
  check_limit_separation(data, lambda);
  const int mfree = data.num_models - 1;
  BtFit fit;
  fit.lambda = lambda;
  fit.zeta = Eigen::VectorXd::Zero(data.num_models);

  BtObjective cur = eval_bt_objective(data, lambda, fit.zeta, true);
  for (int iter = 0; iter < kBtMaxIterations; ++iter) {
    fit.iterations = iter;
    fit.grad_norm = cur.grad.lpNorm<Eigen::Infinity>();
    if (fit.grad_norm <= kBtGradTol) {
      fit.converged = true;
      if (final_hess != nullptr) *final_hess = cur.hess;
      return fit;
    }

    Eigen::LDLT<Eigen::MatrixXd> ldlt(cur.hess);
    Eigen::VectorXd direction(mfree);
    bool usable = ldlt.info() == Eigen::Success;
    if (usable) {
      direction = -ldlt.solve(cur.grad);
      usable = direction.allFinite() && cur.grad.dot(direction) < 0.0;
    }
    if (!usable) direction = -cur.grad;

    const double slope = cur.grad.dot(direction);
    // Near the optimum the true decrease falls below floating-point
    // resolution of the objective; the noise allowance keeps the Newton
    // step acceptable there.
    const double noise = 1e-14 * std::max(1.0, std::abs(cur.value));
    double step = 1.0;
    Eigen::VectorXd candidate(data.num_models);
    BtObjective next;
    bool accepted = false;
    for (int halving = 0; halving < 60; ++halving) {
      candidate.setZero();
      candidate.tail(mfree) = fit.zeta.tail(mfree) + step * direction;
      next = eval_bt_objective(data, lambda, candidate, true);
      if (next.value <= cur.value + kArmijoConstant * step * slope + noise) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      fit.grad_norm = cur.grad.lpNorm<Eigen::Infinity>();
      if (final_hess != nullptr) *final_hess = cur.hess;
      return fit;  // stalled; reported as non-converged
    }
    fit.zeta = candidate;
    cur = next;
    check_separation(fit.zeta);
  }
  fit.iterations = kBtMaxIterations;
  fit.grad_norm = cur.grad.lpNorm<Eigen::Infinity>();
  if (final_hess != nullptr) *final_hess = cur.hess;
  return fit;
}

}  // namespace detail

namespace detail {

// H^{-1} Sigma H^{-1} / n with a caller-provided objective Hessian H.
inline Eigen::MatrixXd sandwich_from_hessian(const BtFit& fit,
                                             const ComparisonDataset& data,
                                             const Eigen::MatrixXd& hess) {
  const int mfree = data.num_models - 1;
  const Eigen::Index n = static_cast<Eigen::Index>(data.labeled.size());
  const Eigen::Index big_n = static_cast<Eigen::Index>(data.unlabeled.size());
  if (n < 2) throw InsufficientData("sandwich_covariance: needs n >= 2 labeled comparisons");
  const double lambda = fit.lambda;

  Eigen::MatrixXd labeled_grads = Eigen::MatrixXd::Zero(n, mfree);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = data.labeled[static_cast<std::size_t>(i)];
    double s = sigmoid(fit.zeta(r.b) - fit.zeta(r.a));
    double yh = (lambda > 0.0) ? *r.y_hat : 0.0;
    double coeff = (1.0 - lambda) * s - *r.y + lambda * yh;
    if (r.b > 0) labeled_grads(i, r.b - 1) = coeff;
    if (r.a > 0) labeled_grads(i, r.a - 1) = -coeff;
  }
  Eigen::MatrixXd sigma = detail::row_sample_covariance(labeled_grads);

  if (lambda > 0.0) {
    if (big_n < 2) {
      throw InsufficientData("sandwich_covariance: lambda > 0 needs N >= 2");
    }
    Eigen::MatrixXd unlabeled_grads = Eigen::MatrixXd::Zero(big_n, mfree);
    for (Eigen::Index i = 0; i < big_n; ++i) {
      const auto& r = data.unlabeled[static_cast<std::size_t>(i)];
      double s = sigmoid(fit.zeta(r.b) - fit.zeta(r.a));
      double coeff = s - *r.y_hat;
      if (r.b > 0) unlabeled_grads(i, r.b - 1) = coeff;
      if (r.a > 0) unlabeled_grads(i, r.a - 1) = -coeff;
    }
    sigma += lambda * lambda *
             (static_cast<double>(n) / static_cast<double>(big_n)) *
             detail::row_sample_covariance(unlabeled_grads);
  }

  Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
  if (ldlt.info() != Eigen::Success) {
    throw SingularHessian("sandwich_covariance: objective Hessian is singular");
  }
  Eigen::MatrixXd hinv = ldlt.solve(Eigen::MatrixXd::Identity(mfree, mfree));
  if (!hinv.allFinite()) {
    throw SingularHessian("sandwich_covariance: objective Hessian is singular");
  }
  Eigen::MatrixXd cov = hinv * sigma * hinv / static_cast<double>(n);
  return 0.5 * (cov + cov.transpose());
}

}  // namespace detail

// Sandwich covariance H^{-1} Sigma H^{-1} / n at the fitted coefficients,
// where H is the objective Hessian and Sigma the sample covariance of the
// per-comparison gradient contributions:
//   Sigma = Cov(grad_i^labeled) + lambda^2 (n/N) Cov(grad_i^unlabeled).
inline Eigen::MatrixXd sandwich_covariance(const BtFit& fit,
                                           const ComparisonDataset& data) {
  if (!fit.converged) {
    throw InvalidInput("sandwich_covariance: fit has not converged");
  }
  data.validate();
  detail::BtObjective at_opt =
      detail::eval_bt_objective(data, fit.lambda, fit.zeta, true);
  return detail::sandwich_from_hessian(fit, data, at_opt.hess);
}

namespace detail {

inline BtFit fit_at_lambda(const ComparisonDataset& data, double lambda) {
  Eigen::MatrixXd hess;
  BtFit fit = newton_fit(data, lambda, &hess);
  if (fit.converged) fit.sandwich = sandwich_from_hessian(fit, data, hess);
  return fit;
}

// Trace of the sandwich at lambda; +infinity marks an infeasible probe
// (separation or a stalled fit), so the search simply avoids it.
inline double sandwich_trace_objective(const ComparisonDataset& data, double lambda) {
  try {
    BtFit fit = fit_at_lambda(data, lambda);
    if (!fit.converged) return std::numeric_limits<double>::infinity();
    return fit.sandwich.trace();
  } catch (const StatisticalError&) {
    return std::numeric_limits<double>::infinity();
  }
}

// Golden-section search for the lambda in [0,1] minimizing the sandwich
// trace; endpoints are probed as well and the best candidate wins.
inline double golden_section_lambda(const ComparisonDataset& data) {
  constexpr double kInvPhi = 0.6180339887498949;
  constexpr double kTol = 1e-3;
  double lo = 0.0, hi = 1.0;
  double x1 = hi - kInvPhi * (hi - lo);
  double x2 = lo + kInvPhi * (hi - lo);
  double f1 = sandwich_trace_objective(data, x1);
  double f2 = sandwich_trace_objective(data, x2);
  while (hi - lo > kTol) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kInvPhi * (hi - lo);
      f1 = sandwich_trace_objective(data, x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kInvPhi * (hi - lo);
      f2 = sandwich_trace_objective(data, x2);
    }
  }
  double best = 0.5 * (lo + hi);
  double best_value = sandwich_trace_objective(data, best);
  for (double candidate : {0.0, 1.0}) {
    double value = sandwich_trace_objective(data, candidate);
    if (value < best_value) {
      best_value = value;
      best = candidate;
    }
  }
  if (!std::isfinite(best_value)) {
    throw ConvergenceFailure("auto lambda: no feasible lambda in [0,1]");
  }
  return best;
}

}  // namespace detail

// Maximum-likelihood Bradley-Terry fit on the labeled comparisons.
inline BtFit fit_classical(const ComparisonDataset& data) {
  data.validate();
  if (data.labeled.size() < 2) {
    throw InsufficientData("fit_classical: needs at least two labeled comparisons");
  }
  detail::check_connected(data, false);
  return detail::fit_at_lambda(data, 0.0);
}

// Prediction-powered fit. `lambda` empty selects lambda automatically by
// minimizing the sandwich-covariance trace over [0,1].
inline BtFit fit_ppi(const ComparisonDataset& data, std::optional<double> lambda) {
  data.validate();
  if (data.labeled.size() < 2) {
    throw InsufficientData("fit_ppi: needs at least two labeled comparisons");
  }
  for (const auto& r : data.labeled) {
    if (!r.y_hat) throw InvalidComparison("fit_ppi: labeled comparison is missing y_hat");
  }
  if (lambda && !(*lambda >= 0.0 && *lambda <= 1.0)) {
    throw InvalidLambda("fit_ppi: lambda must lie in [0,1]");
  }
  detail::check_connected(data, !lambda || *lambda > 0.0);
  double chosen = lambda ? *lambda : detail::golden_section_lambda(data);
  return detail::fit_at_lambda(data, chosen);
}

// Restriction of the comparisons to those involving `target`, reduced to a
// one-model mean-estimation dataset: phi is the (possibly soft) indicator
// that the target wins, e_hat the AI preference probability that it wins.
inline EvalDataset win_rate_dataset(const ComparisonDataset& data, int target,
                                    bool needs_yhat) {
  data.validate();
  if (target < 0 || target >= data.num_models) {
    throw InvalidInput("win_rate_dataset: unknown target model");
  }

  std::vector<double> phi;
  std::vector<double> ehat;
  for (const auto& r : data.labeled) {
    if (r.a != target && r.b != target) continue;
    auto oriented = [&](double v) { return r.b == target ? v : 1.0 - v; };
    phi.push_back(oriented(*r.y));
    if (needs_yhat && !r.y_hat) {
      throw InvalidComparison("win_rate_dataset: labeled comparison is missing y_hat");
    }
    ehat.push_back(r.y_hat ? oriented(*r.y_hat) : 0.0);
  }
  std::vector<double> unlabeled;
  for (const auto& r : data.unlabeled) {
    if (r.a != target && r.b != target) continue;
    unlabeled.push_back(r.b == target ? *r.y_hat : 1.0 - *r.y_hat);
  }
  if (phi.empty() && unlabeled.empty()) {
    throw InsufficientData("win_rate_dataset: no comparisons involve the target");
  }

  EvalDataset mean_data;
  mean_data.labeled_phi =
      Eigen::Map<Eigen::VectorXd>(phi.data(), static_cast<Eigen::Index>(phi.size()));
  mean_data.labeled_ehat =
      Eigen::Map<Eigen::VectorXd>(ehat.data(), static_cast<Eigen::Index>(ehat.size()));
  mean_data.unlabeled_ehat = Eigen::Map<Eigen::VectorXd>(
      unlabeled.data(), static_cast<Eigen::Index>(unlabeled.size()));
  mean_data.model_names = {"win_rate"};
  return mean_data;
}

inline PpiEstimate win_rate_estimate(const ComparisonDataset& data, int target,
                                     EstimatorMode mode) {
  return estimate(
      win_rate_dataset(data, target, mode != EstimatorMode::kClassical), mode);
}

}  // namespace autoeval

#endif  // AUTOEVAL_BRADLEY_TERRY_HPP_
