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
// Confidence intervals, simultaneous chi-squared regions, and CI-based
// rankings on top of PpiEstimate.

#ifndef AUTOEVAL_INFERENCE_HPP_
#define AUTOEVAL_INFERENCE_HPP_

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "autoeval/distributions.hpp"
#include "autoeval/errors.hpp"
#include "autoeval/ppi_mean.hpp"

namespace autoeval {

struct ConfidenceInterval {
  double lo = 0.0;
  double hi = 0.0;
  double level = 0.0;  // confidence level of this single interval
  int model = 0;

  double width() const { return hi - lo; }
  double center() const { return 0.5 * (lo + hi); }
  bool contains(double x) const { return x >= lo && x <= hi; }
};

// Marginal interval per coordinate: mu_hat_m +/- z_{1-alpha/2} sqrt(V_mm / n).
inline std::vector<ConfidenceInterval> marginal_ci(const PpiEstimate& est,
                                                   double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw InvalidProbability("marginal_ci: alpha must lie in (0,1)");
  }
  const double z = normal_quantile(1.0 - alpha / 2.0);
  std::vector<ConfidenceInterval> cis;
  cis.reserve(static_cast<std::size_t>(est.mu_hat.size()));
  for (Eigen::Index m = 0; m < est.mu_hat.size(); ++m) {
    double var = std::max(est.v_hat(m, m), detail::kVarianceFloor);
    double half = z * std::sqrt(var / static_cast<double>(est.n));
    cis.push_back({est.mu_hat(m) - half, est.mu_hat(m) + half, 1.0 - alpha,
                   static_cast<int>(m)});
  }
  return cis;
}

// Marginal intervals with the miscoverage budget split across the M
// coordinates (per-coordinate level alpha / M).
inline std::vector<ConfidenceInterval> bonferroni_cis(const PpiEstimate& est,
                                                      double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw InvalidProbability("bonferroni_cis: alpha must lie in (0,1)");
  }
  return marginal_ci(est, alpha / static_cast<double>(est.mu_hat.size()));
}

// Simultaneous confidence region
//   { mu : n * (mu_hat - mu)^T V_hat^{-1} (mu_hat - mu) <= chi2_{1-alpha, M} }.
class ChiSquaredRegion {
 public:
  ChiSquaredRegion(Eigen::VectorXd center, Eigen::MatrixXd shape, double radius,
                   Eigen::Index n)
      : center_(std::move(center)),
        shape_(std::move(shape)),
        radius_(radius),
        n_(n),
        llt_(shape_) {
    if (llt_.info() != Eigen::Success) {
      throw SingularCovariance("chi-squared region: covariance is not positive definite");
    }
  }

  bool contains(const Eigen::VectorXd& mu) const {
    Eigen::VectorXd diff = center_ - mu;
    double quad = diff.dot(llt_.solve(diff));
    return static_cast<double>(n_) * quad <= radius_;
  }

  const Eigen::VectorXd& center() const { return center_; }
  const Eigen::MatrixXd& shape() const { return shape_; }
  double radius() const { return radius_; }
  Eigen::Index n() const { return n_; }

 private:
  Eigen::VectorXd center_;
  Eigen::MatrixXd shape_;
  double radius_;
  Eigen::Index n_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

inline ChiSquaredRegion simultaneous_region(const PpiEstimate& est, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw InvalidProbability("simultaneous_region: alpha must lie in (0,1)");
  }
  const Eigen::Index m = est.mu_hat.size();
  Eigen::MatrixXd shape = 0.5 * (est.v_hat + est.v_hat.transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(shape);
  double lo = eig.eigenvalues().minCoeff();
  double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > 1e12) {
    // Ridge-regularize an ill-conditioned covariance before inverting.
    shape.diagonal().array() += 1e-10 * shape.trace() / static_cast<double>(m);
    eig.compute(shape);
    lo = eig.eigenvalues().minCoeff();
    if (!(lo > 0.0)) {
      throw SingularCovariance("simultaneous_region: covariance irreparably singular");
    }
  }
  const double radius = chi_squared_quantile(1.0 - alpha, static_cast<int>(m));
  return ChiSquaredRegion(est.mu_hat, std::move(shape), radius, est.n);
}

// CI-based ranking with ties. Tie groups are the connected components of the
// pairwise interval-overlap graph; groups are ordered by their mean interval
// center and assigned dense ranks (1 = best).
struct Ranking {
  std::vector<int> ranks;
  std::vector<ConfidenceInterval> basis;
  bool higher_is_better = true;
};

namespace detail {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void merge(std::size_t a, std::size_t b) { parent_[find(a)] = find(b); }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace detail

inline Ranking rank_models(const std::vector<ConfidenceInterval>& cis,
                           bool higher_is_better) {
  const std::size_t m = cis.size();
  Ranking ranking;
  ranking.basis = cis;
  ranking.higher_is_better = higher_is_better;
  ranking.ranks.assign(m, 1);
  if (m == 0) return ranking;

  detail::DisjointSets sets(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      if (cis[i].lo <= cis[j].hi && cis[j].lo <= cis[i].hi) sets.merge(i, j);
    }
  }

  // Group score = mean interval center; tie-broken by smallest member index
  // so the ordering is deterministic.
  struct Group {
    double score_sum = 0.0;
    int count = 0;
    std::size_t first = 0;
    std::vector<std::size_t> members;
  };
  std::vector<Group> groups;
  std::vector<int> group_of(m, -1);
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t root = sets.find(i);
    int g = group_of[root];
    if (g < 0) {
      g = static_cast<int>(groups.size());
      group_of[root] = g;
      groups.push_back(Group{0.0, 0, i, {}});
    }
    groups[static_cast<std::size_t>(g)].score_sum += cis[i].center();
    groups[static_cast<std::size_t>(g)].count += 1;
    groups[static_cast<std::size_t>(g)].members.push_back(i);
  }

  std::vector<std::size_t> order(groups.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    double sa = groups[a].score_sum / groups[a].count;
    double sb = groups[b].score_sum / groups[b].count;
    if (sa != sb) return higher_is_better ? sa > sb : sa < sb;
    return groups[a].first < groups[b].first;
  });

  int rank = 1;
  for (std::size_t g : order) {
    for (std::size_t member : groups[g].members) {
      ranking.ranks[member] = rank;
    }
    ++rank;
  }
  return ranking;
}

struct RankCorrelation {
  double rho = 0.0;
  bool degenerate = false;  // a constant rank vector on either side
};

namespace detail {

// Average ranks (1 = best) of `values`, ties averaged.
inline std::vector<double> average_ranks(const std::vector<double>& values,
                                         bool higher_is_better) {
  const std::size_t m = values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return higher_is_better ? values[a] > values[b] : values[a] < values[b];
  });
  std::vector<double> ranks(m, 0.0);
  std::size_t i = 0;
  while (i < m) {
    std::size_t j = i;
    while (j + 1 < m && values[order[j + 1]] == values[order[i]]) ++j;
    double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace detail

// Spearman correlation between the estimated tie-aware ranking and the rank
// of the ground-truth values, ties handled as average ranks. A fully tied
// ranking (or constant truth) returns 0 with the degenerate flag set.
inline RankCorrelation rank_correlation(const Ranking& estimated,
                                        const Eigen::VectorXd& truth) {
  const std::size_t m = estimated.ranks.size();
  if (m < 2 || truth.size() != static_cast<Eigen::Index>(m)) {
    throw InvalidInput("rank_correlation: need M >= 2 with matching truth length");
  }

  // Dense tied ranks -> average ranks: a group of size k whose betters total
  // s occupies positions s+1 .. s+k, so each member gets s + (k+1)/2.
  int max_rank = *std::max_element(estimated.ranks.begin(), estimated.ranks.end());
  std::vector<int> group_size(static_cast<std::size_t>(max_rank) + 1, 0);
  for (int r : estimated.ranks) group_size[static_cast<std::size_t>(r)] += 1;
  std::vector<double> start(static_cast<std::size_t>(max_rank) + 1, 0.0);
  double before = 0.0;
  for (int r = 1; r <= max_rank; ++r) {
    start[static_cast<std::size_t>(r)] = before;
    before += group_size[static_cast<std::size_t>(r)];
  }
  std::vector<double> est_ranks(m);
  for (std::size_t i = 0; i < m; ++i) {
    int r = estimated.ranks[i];
    est_ranks[i] = start[static_cast<std::size_t>(r)] +
                   0.5 * (group_size[static_cast<std::size_t>(r)] + 1);
  }

  std::vector<double> truth_values(truth.data(), truth.data() + truth.size());
  std::vector<double> truth_ranks =
      detail::average_ranks(truth_values, estimated.higher_is_better);

  auto constant = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; });
  };
  if (constant(est_ranks) || constant(truth_ranks)) {
    return RankCorrelation{0.0, true};
  }
  return RankCorrelation{detail::pearson(est_ranks, truth_ranks), false};
}

}  // namespace autoeval

#endif  // AUTOEVAL_INFERENCE_HPP_
