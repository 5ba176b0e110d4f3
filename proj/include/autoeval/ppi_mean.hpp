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
// Prediction-powered point estimates of per-model mean metrics. The estimator
// for model m with discount factor lambda in [0,1] is
//
//   mu_hat_m = lambda * mean(unlabeled e_hat_m)
//            + mean(labeled phi_m - lambda * labeled e_hat_m)
//
// which recovers the classical labeled-only mean at lambda = 0, and whose
// plug-in covariance is
//
//   V_hat = (n/N) lambda^2 Cov(unlabeled e_hat rows) + Cov(labeled residual rows),
//
// with Cov(mu_hat) estimated as V_hat / n.

#ifndef AUTOEVAL_PPI_MEAN_HPP_
#define AUTOEVAL_PPI_MEAN_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "autoeval/errors.hpp"

namespace autoeval {

enum class EstimatorMode { kClassical, kPpi, kPpiPlusPlus };

inline const char* mode_name(EstimatorMode mode) {
  switch (mode) {
    case EstimatorMode::kClassical: return "classical";
    case EstimatorMode::kPpi: return "ppi";
    case EstimatorMode::kPpiPlusPlus: return "ppi++";
  }
  return "unknown";
}

// Paired labeled/unlabeled metric samples across M models. Column m of every
// matrix refers to the same model.
struct EvalDataset {
  Eigen::MatrixXd labeled_phi;     // n x M realized metrics
  Eigen::MatrixXd labeled_ehat;    // n x M annotator expectations
  Eigen::MatrixXd unlabeled_ehat;  // N x M annotator expectations
  std::vector<std::string> model_names;

  Eigen::Index num_labeled() const { return labeled_phi.rows(); }
  Eigen::Index num_unlabeled() const { return unlabeled_ehat.rows(); }
  Eigen::Index num_models() const { return labeled_phi.cols(); }

  void validate() const {
    if (num_models() < 1) throw InsufficientData("dataset has no models");
    if (num_labeled() < 2) throw InsufficientData("dataset needs n >= 2 labeled points");
    if (num_unlabeled() < 1) throw InsufficientData("dataset needs N >= 1 unlabeled points");
    if (labeled_ehat.rows() != num_labeled() || labeled_ehat.cols() != num_models() ||
        unlabeled_ehat.cols() != num_models()) {
      throw InvalidInput("dataset matrices have inconsistent shapes");
    }
    if (model_names.size() != static_cast<std::size_t>(num_models())) {
      throw InvalidInput("dataset needs one name per model");
    }
    if (!labeled_phi.allFinite() || !labeled_ehat.allFinite() ||
        !unlabeled_ehat.allFinite()) {
      throw NonFiniteInput("dataset entries must all be finite");
    }
  }
};

struct PpiEstimate {
  Eigen::VectorXd mu_hat;  // M point estimates
  double lambda = 0.0;
  Eigen::MatrixXd v_hat;   // M x M; Cov(mu_hat) is estimated as v_hat / n
  Eigen::Index n = 0;
  Eigen::Index N = 0;
  EstimatorMode mode = EstimatorMode::kClassical;
};

namespace detail {

// Sample covariance of the rows of x, n-1 denominator, symmetrized.
inline Eigen::MatrixXd row_sample_covariance(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  if (n < 2) throw InsufficientData("sample covariance needs at least two rows");
  Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  Eigen::MatrixXd cov =
      (centered.transpose() * centered) / static_cast<double>(n - 1);
  return 0.5 * (cov + cov.transpose());
}

// Zero-width intervals from constant data are prevented by flooring the
// covariance diagonal ahead of CI construction.
inline constexpr double kVarianceFloor = 1e-15;

inline void floor_diagonal(Eigen::MatrixXd& v) {
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    if (v(i, i) < kVarianceFloor) v(i, i) = kVarianceFloor;
  }
}

}  // namespace detail

// Labeled-only baseline: column means of phi with their sample covariance.
inline PpiEstimate classical_estimate(const EvalDataset& data) {
  data.validate();
  PpiEstimate est;
  est.mu_hat = data.labeled_phi.colwise().mean();
  est.lambda = 0.0;
  est.v_hat = detail::row_sample_covariance(data.labeled_phi);
  detail::floor_diagonal(est.v_hat);
  est.n = data.num_labeled();
  est.N = data.num_unlabeled();
  est.mode = EstimatorMode::kClassical;
  return est;
}

inline Eigen::VectorXd ppi_point_estimate(const EvalDataset& data, double lambda) {
  data.validate();
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw InvalidLambda("ppi_point_estimate: lambda must lie in [0,1]");
  }
  Eigen::VectorXd synthetic = data.unlabeled_ehat.colwise().mean();
  Eigen::VectorXd correction =
      (data.labeled_phi - lambda * data.labeled_ehat).colwise().mean();
  return lambda * synthetic + correction;
}

inline Eigen::MatrixXd ppi_covariance(const EvalDataset& data, double lambda) {
  data.validate();
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw InvalidLambda("ppi_covariance: lambda must lie in [0,1]");
  }
  Eigen::MatrixXd residuals = data.labeled_phi - lambda * data.labeled_ehat;
  Eigen::MatrixXd v = detail::row_sample_covariance(residuals);
  if (lambda > 0.0) {
    if (data.num_unlabeled() < 2) {
      throw InsufficientData("ppi_covariance: lambda > 0 needs N >= 2");
    }
    const double ratio = static_cast<double>(data.num_labeled()) /
                         static_cast<double>(data.num_unlabeled());
    v += ratio * lambda * lambda *
         detail::row_sample_covariance(data.unlabeled_ehat);
  }
  return v;
}

// Variance-minimizing discount factor, clipped to [0,1]:
//
//   lambda_hat = sum_m Cov(phi_m, e_hat_m) / ((1 + n/N) * sum_m Var(e_hat_m)),
//
// all moments estimated on the labeled set with the n-1 denominator. Constant
// e_hat carries no signal and yields 0.
inline double tune_lambda(const EvalDataset& data) {
  data.validate();
  const Eigen::Index n = data.num_labeled();
  const Eigen::Index N = data.num_unlabeled();
  if (N < 2) throw InsufficientData("tune_lambda: needs N >= 2");

  Eigen::MatrixXd phi_c = data.labeled_phi.rowwise() - data.labeled_phi.colwise().mean();
  Eigen::MatrixXd ehat_c = data.labeled_ehat.rowwise() - data.labeled_ehat.colwise().mean();
  const double denom_scale = static_cast<double>(n - 1);
  double cov_sum = (phi_c.array() * ehat_c.array()).sum() / denom_scale;
  double var_sum = ehat_c.array().square().sum() / denom_scale;

  const double ratio = static_cast<double>(n) / static_cast<double>(N);
  const double denominator = (1.0 + ratio) * var_sum;
  if (!(denominator > 0.0)) return 0.0;
  return std::clamp(cov_sum / denominator, 0.0, 1.0);
}

// Fixed-lambda estimate. The mode label is normalized by the effective
// lambda so the Classical <=> 0 and Ppi <=> 1 invariants always hold.
inline PpiEstimate estimate_with_lambda(const EvalDataset& data, double lambda) {
  if (lambda == 0.0) return classical_estimate(data);
  PpiEstimate est;
  est.mu_hat = ppi_point_estimate(data, lambda);
  est.lambda = lambda;
  est.v_hat = ppi_covariance(data, lambda);
  detail::floor_diagonal(est.v_hat);
  est.n = data.num_labeled();
  est.N = data.num_unlabeled();
  est.mode = (lambda == 1.0) ? EstimatorMode::kPpi : EstimatorMode::kPpiPlusPlus;
  return est;
}

inline PpiEstimate estimate(const EvalDataset& data, EstimatorMode mode) {
  switch (mode) {
    case EstimatorMode::kClassical:
      return classical_estimate(data);
    case EstimatorMode::kPpi:
      return estimate_with_lambda(data, 1.0);
    case EstimatorMode::kPpiPlusPlus:
      // A tuned lambda that clips to exactly 0 or 1 relabels the estimate as
      // classical or plain PPI, keeping the mode <=> lambda invariants.
      return estimate_with_lambda(data, tune_lambda(data));
  }
  throw InvalidInput("unknown estimator mode");
}

// Equivalent number of labeled points the classical estimator would need to
// match the given estimator's precision: n * Var_classical / Var_est per
// coordinate. A zero variance yields +infinity as a signal value.
inline Eigen::VectorXd effective_sample_size(const PpiEstimate& ppi,
                                             const PpiEstimate& classical) {
  if (ppi.n != classical.n || ppi.mu_hat.size() != classical.mu_hat.size()) {
    throw InvalidInput("effective_sample_size: estimates come from different datasets");
  }
  const Eigen::Index m = ppi.mu_hat.size();
  Eigen::VectorXd ess(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    double denom = ppi.v_hat(i, i);
    ess(i) = (denom > 0.0)
                 ? static_cast<double>(ppi.n) * classical.v_hat(i, i) / denom
                 : std::numeric_limits<double>::infinity();
  }
  return ess;
}

}  // namespace autoeval

#endif  // AUTOEVAL_PPI_MEAN_HPP_
