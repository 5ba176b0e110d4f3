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
// Metric functions phi(prediction, label) and expected metric values under an
// annotator's label distribution. Every estimator downstream consumes only the
// per-point numbers produced here: the realized metric on labeled points and
// the annotator-expected metric on all points.

#ifndef AUTOEVAL_METRICS_HPP_
#define AUTOEVAL_METRICS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iterator>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "autoeval/errors.hpp"

namespace autoeval {

// A prediction or label: either a scalar (regression value or class id) or a
// set of label ids (multilabel classification). Sets must be sorted and
// duplicate-free.
using LabelSet = std::vector<std::int64_t>;
using Outcome = std::variant<double, LabelSet>;

// Annotator model's distribution over the true label for one data point.
struct DiscretePmf {
  std::vector<Outcome> labels;
  std::vector<double> probs;  // nonnegative, sum to 1 within 1e-9
};

// Degenerate distribution entirely concentrated on a single prediction.
struct PointMass {
  Outcome label;
};

// Expected metric already integrated by the data producer; supports
// continuous label spaces without embedding a quadrature engine here.
struct PrecomputedExpectation {
  double value = 0.0;
};

using SyntheticLabelDistribution =
    std::variant<DiscretePmf, PointMass, PrecomputedExpectation>;

class MetricFn {
 public:
  enum class Kind {
    kAccuracy,
    kAveragePrecision,
    kSquaredError,
    kAbsoluteError,
    kCorrelationProduct,
    kWinIndicator,
    kCustom,
  };
  using Fn = std::function<double(const Outcome&, const Outcome&)>;

  static MetricFn accuracy() { return MetricFn(Kind::kAccuracy); }
  static MetricFn average_precision() { return MetricFn(Kind::kAveragePrecision); }
  static MetricFn squared_error() { return MetricFn(Kind::kSquaredError); }
  static MetricFn absolute_error() { return MetricFn(Kind::kAbsoluteError); }
  static MetricFn correlation_product() { return MetricFn(Kind::kCorrelationProduct); }
  static MetricFn win_indicator() { return MetricFn(Kind::kWinIndicator); }
  // `fn` must be a pure function of (prediction, label).
  static MetricFn custom(Fn fn) {
    MetricFn m(Kind::kCustom);
    m.fn_ = std::move(fn);
    return m;
  }

  Kind kind() const { return kind_; }

  double operator()(const Outcome& prediction, const Outcome& label) const {
    switch (kind_) {
      case Kind::kAccuracy:
        return outcomes_equal(prediction, label) ? 1.0 : 0.0;
      case Kind::kAveragePrecision:
        return average_precision_value(prediction, label);
      case Kind::kSquaredError: {
        double d = scalar(prediction) - scalar(label);
        return d * d;
      }
      case Kind::kAbsoluteError:
        return std::abs(scalar(prediction) - scalar(label));
      case Kind::kCorrelationProduct:
        return scalar(prediction) * scalar(label);
      case Kind::kWinIndicator: {
        double y = scalar(label);
        if (!(y >= 0.0 && y <= 1.0)) {
          throw InvalidInput("win indicator label must lie in [0,1]");
        }
        return y;
      }
      case Kind::kCustom: {
        double v = fn_(prediction, label);
        if (!std::isfinite(v)) {
          throw NonFiniteMetric("custom metric returned a non-finite value");
        }
        return v;
      }
    }
    throw InvalidInput("unknown metric kind");
  }

 private:
  explicit MetricFn(Kind kind) : kind_(kind) {}

  static double scalar(const Outcome& o) {
    if (const double* v = std::get_if<double>(&o)) return *v;
    throw InvalidInput("metric expected a scalar prediction/label");
  }

  static bool outcomes_equal(const Outcome& a, const Outcome& b) {
    if (a.index() != b.index()) {
      throw InvalidInput("accuracy: prediction and label have mismatched types");
    }
    return a == b;
  }

  // |pred ∩ label| / |pred| over label-id sets.
  static double average_precision_value(const Outcome& prediction,
                                        const Outcome& label) {
    const LabelSet* pred = std::get_if<LabelSet>(&prediction);
    const LabelSet* truth = std::get_if<LabelSet>(&label);
    if (pred == nullptr || truth == nullptr) {
      throw InvalidInput("average precision expects label-set arguments");
    }
    if (pred->empty()) {
      throw DegenerateInput("average precision undefined for an empty prediction set");
    }
    std::vector<std::int64_t> common;
    std::set_intersection(pred->begin(), pred->end(), truth->begin(),
                          truth->end(), std::back_inserter(common));
    return static_cast<double>(common.size()) / static_cast<double>(pred->size());
  }

  Kind kind_;
  Fn fn_;
};

// Per-point inputs to the estimators: the realized metric on a labeled point
// and the annotator-expected metric. Unlabeled points carry e_hat only.
struct MetricSample {
  double phi = 0.0;
  double e_hat = 0.0;
};

// Both numbers the estimators need for one labeled point.
inline MetricSample make_metric_sample(const MetricFn& metric,
                                       const Outcome& prediction,
                                       const Outcome& label,
                                       const SyntheticLabelDistribution& dist);

inline void validate_pmf(const DiscretePmf& pmf) {
  if (pmf.labels.size() != pmf.probs.size() || pmf.labels.empty()) {
    throw InvalidDistribution("pmf labels and probs must be nonempty and equal-length");
  }
  double total = 0.0;
  for (double p : pmf.probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw InvalidDistribution("pmf probabilities must be nonnegative and finite");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw InvalidDistribution("pmf probabilities must sum to 1 within 1e-9");
  }
}

// Expected metric value under the annotator's label distribution: the sum of
// phi(prediction, y) weighted by the distribution's mass at y.
inline double synthetic_expectation(const MetricFn& metric,
                                    const Outcome& prediction,
                                    const SyntheticLabelDistribution& dist) {
  if (const DiscretePmf* pmf = std::get_if<DiscretePmf>(&dist)) {
    validate_pmf(*pmf);
    double total = 0.0;
    for (std::size_t i = 0; i < pmf->labels.size(); ++i) {
      total += pmf->probs[i] * metric(prediction, pmf->labels[i]);
    }
    return total;
  }
  if (const PointMass* pm = std::get_if<PointMass>(&dist)) {
    return metric(prediction, pm->label);
  }
  const PrecomputedExpectation& pre = std::get<PrecomputedExpectation>(dist);
  if (!std::isfinite(pre.value)) {
    throw InvalidDistribution("precomputed expectation must be finite");
  }
  return pre.value;
}

inline MetricSample make_metric_sample(const MetricFn& metric,
                                       const Outcome& prediction,
                                       const Outcome& label,
                                       const SyntheticLabelDistribution& dist) {
  return MetricSample{metric(prediction, label),
                      synthetic_expectation(metric, prediction, dist)};
}

// Rescales to sample mean 0 and sample standard deviation 1 (n-1 denominator).
// Used to preprocess labels and predictions ahead of the correlation-product
// metric.
inline Eigen::VectorXd standardize(const Eigen::VectorXd& values) {
  if (values.size() < 2) {
    throw InsufficientData("standardize: need at least two values");
  }
  const double mean = values.mean();
  const double ss = (values.array() - mean).square().sum();
  const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  if (!(sd > 0.0) || !std::isfinite(sd)) {
    throw DegenerateInput("standardize: zero or non-finite variance");
  }
  return (values.array() - mean) / sd;
}

}  // namespace autoeval

#endif  // AUTOEVAL_METRICS_HPP_
