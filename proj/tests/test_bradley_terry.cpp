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

#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Eigenvalues>

#include "autoeval/bradley_terry.hpp"
#include "autoeval/harness.hpp"
#include "autoeval/rng.hpp"
#include "support/oracles.hpp"

using autoeval::BtFit;
using autoeval::ComparisonDataset;
using autoeval::ComparisonRecord;
using autoeval::encode_design;
using autoeval::EstimatorMode;
using autoeval::fit_classical;
using autoeval::fit_ppi;
using autoeval::logistic_loss;
using autoeval::logistic_loss_gradient;
using autoeval::logistic_loss_hessian;
using autoeval::sandwich_covariance;
using autoeval::sigmoid;
using autoeval::win_rate_estimate;

namespace {

ComparisonRecord rec(int a, int b, double y, double y_hat) {
  return ComparisonRecord{a, b, y, y_hat};
}

// Uniform random pairs; y ~ BT(zeta), y_hat = y flipped with probability q.
ComparisonDataset simulate(autoeval::Rng& rng, const Eigen::VectorXd& zeta, int n,
                           int big_n, double flip) {
  ComparisonDataset ds;
  ds.num_models = static_cast<int>(zeta.size());
  auto draw = [&](bool labeled) {
    int a = static_cast<int>(rng.uniform_int(zeta.size()));
    int b = static_cast<int>(rng.uniform_int(zeta.size() - 1));
    if (b >= a) ++b;
    double y = rng.bernoulli(sigmoid(zeta(b) - zeta(a))) ? 1.0 : 0.0;
    double yh = rng.bernoulli(flip) ? 1.0 - y : y;
    if (labeled) {
      ds.labeled.push_back(rec(a, b, y, yh));
    } else {
      ds.unlabeled.push_back(ComparisonRecord{a, b, std::nullopt, yh});
    }
  };
  for (int i = 0; i < n; ++i) draw(true);
  for (int i = 0; i < big_n; ++i) draw(false);
  return ds;
}

}  // namespace

TEST_CASE("two-hot design encoding") {
  Eigen::VectorXd x = encode_design(rec(0, 1, 1, 1), 3);
  REQUIRE(x(0) == 1.0);
  REQUIRE(x(1) == 0.0);

  x = encode_design(rec(1, 2, 1, 1), 3);
  REQUIRE(x(0) == -1.0);
  REQUIRE(x(1) == 1.0);

  // Reference as winner leaves only the -1 entry.
  x = encode_design(rec(2, 0, 0, 0), 4);
  REQUIRE(x(0) == 0.0);
  REQUIRE(x(1) == -1.0);
  REQUIRE(x(2) == 0.0);

  REQUIRE_THROWS_AS(encode_design(rec(1, 1, 1, 1), 3), autoeval::InvalidComparison);
}

TEST_CASE("logistic loss at zero coefficients is log 2") {
  Eigen::VectorXd zeta = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd x = encode_design(rec(0, 1, 1, 1), 3);
  REQUIRE(logistic_loss(zeta, x, 1.0) == Catch::Approx(M_LN2).margin(1e-15));
  REQUIRE(logistic_loss(zeta, x, 0.0) == Catch::Approx(M_LN2).margin(1e-15));
}

TEST_CASE("equal strengths give an even win probability") {
  REQUIRE(sigmoid(0.0) == 0.5);
}

TEST_CASE("logistic gradient and hessian match finite differences") {
  autoeval::Rng rng(107);
  for (int trial = 0; trial < 40; ++trial) {
    const int m = 3 + static_cast<int>(rng.uniform_int(3));
    int a = static_cast<int>(rng.uniform_int(m));
    int b = static_cast<int>(rng.uniform_int(m - 1));
    if (b >= a) ++b;
    Eigen::VectorXd x = encode_design(rec(a, b, 1, 1), m);
    double y = rng.uniform01();
    Eigen::VectorXd zeta(m - 1);
    for (int i = 0; i < m - 1; ++i) zeta(i) = rng.normal();

    auto loss_at = [&](const std::vector<double>& z) {
      Eigen::VectorXd zv =
          Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
      return logistic_loss(zv, x, y);
    };
    std::vector<double> z0(zeta.data(), zeta.data() + zeta.size());
    auto grad_fd = oracles::fd_gradient(loss_at, z0, 1e-5);
    Eigen::VectorXd grad = logistic_loss_gradient(zeta, x, y);
    for (int i = 0; i < m - 1; ++i) {
      REQUIRE(grad(i) == Catch::Approx(grad_fd[static_cast<std::size_t>(i)]).margin(1e-6));
    }
    auto hess_fd = oracles::fd_hessian(loss_at, z0, 1e-4);
    Eigen::MatrixXd hess = logistic_loss_hessian(zeta, x);
    for (int i = 0; i < m - 1; ++i) {
      for (int j = 0; j < m - 1; ++j) {
        REQUIRE(hess(i, j) ==
                Catch::Approx(hess_fd[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)])
                    .margin(1e-5));
      }
    }
  }
}

TEST_CASE("two-model MLE has the logit closed form") {
  ComparisonDataset ds;
  ds.num_models = 2;
  ds.labeled = {rec(0, 1, 1, 1), rec(0, 1, 1, 1), rec(0, 1, 1, 1), rec(0, 1, 0, 0)};
  BtFit fit = fit_classical(ds);
  REQUIRE(fit.converged);
  REQUIRE(fit.zeta(0) == 0.0);
  REQUIRE(fit.zeta(1) == Catch::Approx(std::log(3.0)).margin(1e-6));
  REQUIRE(fit.grad_norm <= 1e-8);
}

TEST_CASE("symmetric comparisons give zero coefficients") {
  ComparisonDataset ds;
  ds.num_models = 3;
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      if (a == b) continue;
      ds.labeled.push_back(rec(a, b, 1, 1));
      ds.labeled.push_back(rec(a, b, 0, 0));
    }
  }
  BtFit fit = fit_classical(ds);
  REQUIRE(fit.converged);
  REQUIRE(fit.zeta.cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("a model that always wins triggers perfect separation") {
  ComparisonDataset ds;
  ds.num_models = 2;
  for (int i = 0; i < 10; ++i) ds.labeled.push_back(rec(0, 1, 1, 1));
  REQUIRE_THROWS_AS(fit_classical(ds), autoeval::PerfectSeparation);
}

TEST_CASE("a disconnected comparison graph is unidentifiable") {
  ComparisonDataset ds;
  ds.num_models = 4;
  ds.labeled = {rec(0, 1, 1, 1), rec(1, 0, 0, 0), rec(2, 3, 1, 1), rec(3, 2, 0, 0)};
  try {
    fit_classical(ds);
    FAIL("expected Unidentifiable");
  } catch (const autoeval::Unidentifiable& e) {
    REQUIRE(e.model_indices() == std::vector<int>{2, 3});
  }
}

TEST_CASE("ppi fit at lambda zero equals the classical fit") {
  autoeval::Rng rng(109);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd zeta(3);
    zeta << 0.0, 0.4, 0.9;
    ComparisonDataset ds = simulate(rng, zeta, 60, 80, 0.1);
    BtFit classical = fit_classical(ds);
    BtFit ppi0 = fit_ppi(ds, 0.0);
    REQUIRE(classical.converged);
    REQUIRE(ppi0.converged);
    REQUIRE((classical.zeta - ppi0.zeta).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("lambda one with perfect AI labels reduces to the unlabeled MLE") {
  autoeval::Rng rng(113);
  Eigen::VectorXd zeta(3);
  zeta << 0.0, 0.5, 1.0;
  ComparisonDataset ds = simulate(rng, zeta, 50, 400, 0.0);  // y_hat == y
  BtFit ppi1 = fit_ppi(ds, 1.0);
  REQUIRE(ppi1.converged);

  ComparisonDataset unlabeled_only;
  unlabeled_only.num_models = 3;
  for (const auto& r : ds.unlabeled) {
    unlabeled_only.labeled.push_back(rec(r.a, r.b, *r.y_hat, *r.y_hat));
  }
  BtFit mle = fit_classical(unlabeled_only);
  REQUIRE((ppi1.zeta - mle.zeta).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("lambda outside the unit interval is rejected") {
  autoeval::Rng rng(127);
  Eigen::VectorXd zeta(2);
  zeta << 0.0, 0.3;
  ComparisonDataset ds = simulate(rng, zeta, 20, 20, 0.1);
  REQUIRE_THROWS_AS(fit_ppi(ds, 1.5), autoeval::InvalidLambda);
  REQUIRE_THROWS_AS(fit_ppi(ds, -0.1), autoeval::InvalidLambda);
}

TEST_CASE("fit is invariant to swapping comparison orientation") {
  autoeval::Rng rng(131);
  Eigen::VectorXd zeta(4);
  zeta << 0.0, 0.3, 0.8, 1.2;
  ComparisonDataset ds = simulate(rng, zeta, 120, 200, 0.1);

  ComparisonDataset swapped;
  swapped.num_models = ds.num_models;
  for (const auto& r : ds.labeled) {
    swapped.labeled.push_back(rec(r.b, r.a, 1.0 - *r.y, 1.0 - *r.y_hat));
  }
  for (const auto& r : ds.unlabeled) {
    swapped.unlabeled.push_back(ComparisonRecord{r.b, r.a, std::nullopt, 1.0 - *r.y_hat});
  }
  for (double lambda : {0.0, 0.6, 1.0}) {
    BtFit base = fit_ppi(ds, lambda);
    BtFit mirrored = fit_ppi(swapped, lambda);
    REQUIRE((base.zeta - mirrored.zeta).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("fit is equivariant under permutations of the non-reference models") {
  autoeval::Rng rng(137);
  Eigen::VectorXd zeta(4);
  zeta << 0.0, 0.4, 0.7, 1.1;
  ComparisonDataset ds = simulate(rng, zeta, 150, 150, 0.1);
  BtFit base = fit_classical(ds);

  // Swap models 1 and 3.
  auto relabel = [](int m) { return m == 1 ? 3 : (m == 3 ? 1 : m); };
  ComparisonDataset permuted;
  permuted.num_models = 4;
  for (const auto& r : ds.labeled) {
    permuted.labeled.push_back(rec(relabel(r.a), relabel(r.b), *r.y, *r.y_hat));
  }
  BtFit fit = fit_classical(permuted);
  REQUIRE(fit.zeta(1) == Catch::Approx(base.zeta(3)).margin(1e-8));
  REQUIRE(fit.zeta(3) == Catch::Approx(base.zeta(1)).margin(1e-8));
  REQUIRE(fit.zeta(2) == Catch::Approx(base.zeta(2)).margin(1e-8));
}

TEST_CASE("ppi objective hessian is positive semidefinite across lambda") {
  autoeval::Rng rng(139);
  for (int trial = 0; trial < 40; ++trial) {
    Eigen::VectorXd zeta(3);
    zeta << 0.0, 0.5, 1.0;
    ComparisonDataset ds = simulate(rng, zeta, 25, 40, 0.2);
    double lambda = rng.uniform01();
    Eigen::VectorXd at(3);
    at << 0.0, rng.normal(), rng.normal();
    auto objective = autoeval::detail::eval_bt_objective(ds, lambda, at, true);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(objective.hess);
    REQUIRE(eig.eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("balanced two-model sandwich matches the Fisher information scale") {
  ComparisonDataset ds;
  ds.num_models = 2;
  const int n = 40;
  for (int i = 0; i < n; ++i) ds.labeled.push_back(rec(0, 1, i % 4 != 0 ? 1.0 : 0.0, 0.5));
  BtFit fit = fit_classical(ds);
  REQUIRE(fit.converged);
  double p = 0.75;
  REQUIRE(sigmoid(fit.zeta(1)) == Catch::Approx(p).margin(1e-8));

  // Sample-covariance convention gives exactly 1 / ((n-1) p (1-p)); the
  // Fisher-information value 1 / (n p (1-p)) is approached as n grows.
  double exact = 1.0 / ((n - 1) * p * (1.0 - p));
  double fisher = 1.0 / (n * p * (1.0 - p));
  REQUIRE(fit.sandwich(0, 0) == Catch::Approx(exact).margin(1e-10));
  REQUIRE(std::abs(fit.sandwich(0, 0) - fisher) / fisher < 0.03);
}

TEST_CASE("sandwich at lambda zero is the classical logistic sandwich") {
  autoeval::Rng rng(149);
  Eigen::VectorXd zeta(3);
  zeta << 0.0, 0.6, 1.1;
  ComparisonDataset ds = simulate(rng, zeta, 80, 90, 0.1);
  BtFit fit = fit_classical(ds);
  Eigen::MatrixXd cov = sandwich_covariance(fit, ds);

  // Oracle: explicit H^{-1} Cov(grad) H^{-1} / n from per-record pieces.
  const int n = static_cast<int>(ds.labeled.size());
  Eigen::MatrixXd grads(n, 2);
  Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(2, 2);
  for (int i = 0; i < n; ++i) {
    const auto& r = ds.labeled[static_cast<std::size_t>(i)];
    Eigen::VectorXd x = encode_design(r, 3);
    grads.row(i) = logistic_loss_gradient(fit.zeta.tail(2), x, *r.y).transpose();
    hess += logistic_loss_hessian(fit.zeta.tail(2), x) / n;
  }
  Eigen::MatrixXd centered = grads.rowwise() - grads.colwise().mean();
  Eigen::MatrixXd sigma = centered.transpose() * centered / (n - 1);
  Eigen::MatrixXd expected = hess.inverse() * sigma * hess.inverse() / n;
  REQUIRE((cov - expected).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("auto lambda variance never exceeds the classical variance by much") {
  autoeval::Rng rng(151);
  Eigen::VectorXd zeta(3);
  zeta << 0.0, 0.5, 1.0;
  for (int trial = 0; trial < 5; ++trial) {
    ComparisonDataset ds = simulate(rng, zeta, 150, 1500, 0.1);
    BtFit tuned = fit_ppi(ds, std::nullopt);
    BtFit classical = fit_classical(ds);
    REQUIRE(tuned.converged);
    REQUIRE(tuned.sandwich.trace() <= classical.sandwich.trace() * (1.0 + 1e-9));
  }
}

TEST_CASE("win rate reduces to labeled and unlabeled fractions") {
  ComparisonDataset ds;
  ds.num_models = 3;
  // Target model 1: wins as b when y = 1, wins as a when y = 0.
  ds.labeled = {rec(0, 1, 1, 1), rec(1, 2, 0, 0), rec(2, 1, 1, 1), rec(0, 1, 0, 0)};
  ds.unlabeled = {ComparisonRecord{0, 1, std::nullopt, 1.0},
                  ComparisonRecord{1, 2, std::nullopt, 0.0},
                  ComparisonRecord{1, 0, std::nullopt, 0.25}};

  auto classical = win_rate_estimate(ds, 1, EstimatorMode::kClassical);
  REQUIRE(classical.mu_hat(0) == Catch::Approx(0.75).margin(1e-12));

  // Perfect annotator at lambda one: bias correction vanishes, leaving the
  // AI win fraction over the unlabeled comparisons.
  auto ppi = win_rate_estimate(ds, 1, EstimatorMode::kPpi);
  REQUIRE(ppi.mu_hat(0) == Catch::Approx((1.0 + 1.0 + 0.75) / 3.0).margin(1e-12));

  ComparisonDataset no_target;
  no_target.num_models = 3;
  no_target.labeled = {rec(0, 1, 1, 1), rec(0, 1, 0, 0)};
  no_target.unlabeled = {ComparisonRecord{0, 1, std::nullopt, 1.0}};
  REQUIRE_THROWS_AS(win_rate_estimate(no_target, 2, EstimatorMode::kClassical),
                    autoeval::InsufficientData);
}

TEST_CASE("auto-lambda coefficient MSE is no worse than classical over trials") {
  autoeval::BtArenaDgp dgp;
  dgp.true_zeta.resize(4);
  dgp.true_zeta << 0.0, 0.5, 1.0, 1.5;
  dgp.flip_prob = 0.1;
  autoeval::TrialConfig config;
  config.n_labeled = 200;
  config.n_total = 5200;
  config.num_trials = 250;
  config.seed = 271;
  config.modes = {EstimatorMode::kClassical, EstimatorMode::kPpiPlusPlus};
  autoeval::TrialReport report = run_experiment(dgp, config);
  REQUIRE(report.trials_aggregated == 250);
  for (int m = 1; m < 4; ++m) {
    REQUIRE(report.modes[1].mse(m) <= report.modes[0].mse(m));
  }
}

TEST_CASE("win-rate effective sample size gains from an informative annotator") {
  autoeval::Rng rng(277);
  Eigen::VectorXd zeta(2);
  zeta << 0.0, std::log(0.6 / 0.4);  // true win rate 0.6 for model 1
  std::vector<double> ess_ratios;
  for (int t = 0; t < 250; ++t) {
    ComparisonDataset ds = simulate(rng, zeta, 300, 3000, 0.1);
    auto tuned = win_rate_estimate(ds, 1, EstimatorMode::kPpiPlusPlus);
    auto classical = win_rate_estimate(ds, 1, EstimatorMode::kClassical);
    ess_ratios.push_back(autoeval::effective_sample_size(tuned, classical)(0) /
                         static_cast<double>(tuned.n));
  }
  REQUIRE(oracles::mean(ess_ratios) > 1.0);
}

TEST_CASE("converged fits satisfy the gradient tolerance") {
  autoeval::Rng rng(157);
  Eigen::VectorXd zeta(4);
  zeta << 0.0, 0.2, 0.6, 1.0;
  for (int trial = 0; trial < 10; ++trial) {
    ComparisonDataset ds = simulate(rng, zeta, 100, 300, 0.15);
    for (double lambda : {0.0, 0.3, 1.0}) {
      BtFit fit = fit_ppi(ds, lambda);
      REQUIRE(fit.converged);
      REQUIRE(fit.grad_norm <= 1e-8);
    }
  }
}
