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

#ifndef AUTOEVAL_ERRORS_HPP_
#define AUTOEVAL_ERRORS_HPP_

#include <stdexcept>
#include <string>
#include <vector>

namespace autoeval {

// Root of the library's error hierarchy. Two families hang off it:
// InputError for malformed arguments and data (a caller bug or a bad file),
// StatisticalError for inputs that are well-formed but not estimable.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class StatisticalError : public Error {
 public:
  using Error::Error;
};

// --- input / contract violations ---

class InvalidInput : public InputError {
 public:
  using InputError::InputError;
};

class InvalidDistribution : public InputError {
 public:
  using InputError::InputError;
};

class InvalidProbability : public InputError {
 public:
  using InputError::InputError;
};

class InvalidDof : public InputError {
 public:
  using InputError::InputError;
};

class InvalidComparison : public InputError {
 public:
  using InputError::InputError;
};

class InvalidLambda : public InputError {
 public:
  using InputError::InputError;
};

// --- statistical / numerical failures ---

class InsufficientData : public StatisticalError {
 public:
  using StatisticalError::StatisticalError;
};

class DegenerateInput : public StatisticalError {
 public:
  using StatisticalError::StatisticalError;
};

class NonFiniteMetric : public StatisticalError {
 public:
  using StatisticalError::StatisticalError;
};

class NonFiniteInput : public StatisticalError {
 public:
  using StatisticalError::StatisticalError;
};

class SingularCovariance : public StatisticalError {
 public:
  using StatisticalError::StatisticalError;
};

class SingularHessian : public StatisticalError {
 public:
  using StatisticalError::StatisticalError;
};

// Thrown when some model wins or loses every comparison it appears in, so
// the logistic MLE diverges. The message names the offending model index.
class PerfectSeparation : public StatisticalError {
 public:
  PerfectSeparation(const std::string& what, int model_index)
      : StatisticalError(what), model_index_(model_index) {}
  int model_index() const { return model_index_; }

 private:
  int model_index_;
};

// Thrown when the comparison graph does not connect every model to the
// reference, so coefficients are not identifiable. Carries the indices of
// the disconnected models.
class Unidentifiable : public StatisticalError {
 public:
  Unidentifiable(const std::string& what, std::vector<int> model_indices)
      : StatisticalError(what), model_indices_(std::move(model_indices)) {}
  const std::vector<int>& model_indices() const { return model_indices_; }

 private:
  std::vector<int> model_indices_;
};

class ConvergenceFailure : public StatisticalError {
 public:
  using StatisticalError::StatisticalError;
};

}  // namespace autoeval

#endif  // AUTOEVAL_ERRORS_HPP_
