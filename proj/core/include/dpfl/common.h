//
// Copyright 2026 The dpfl-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef DPFL_COMMON_H_
#define DPFL_COMMON_H_

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace dpfl {

// Row-major so that one sample (or one per-sample gradient) is one contiguous
// row.
using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Base class of every error raised by the library. The subclasses map onto
// the failure categories that callers (and the CLI exit codes) distinguish.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid argument values: counts, ranges, impossible constraints.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Malformed on-disk data (IDX files, checkpoints, report logs).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Dimension mismatch between matrices, vectors or parameter layouts.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Numerical breakdown, e.g. a singular scatter matrix.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Divergence or a refused update during training.
class TrainingError : public Error {
 public:
  using Error::Error;
};

// A client was asked to expose more updates than its calibrated budget.
class BudgetViolation : public TrainingError {
 public:
  using TrainingError::TrainingError;
};

class AggregationError : public Error {
 public:
  using Error::Error;
};

class AuditError : public Error {
 public:
  using Error::Error;
};

// Invalid experiment configuration. The message names the offending key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Half-open index range [begin, end).
struct IndexRange {
  Index begin = 0;
  Index end = 0;

  Index size() const { return end - begin; }
  bool contains(Index i) const { return i >= begin && i < end; }
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

}  // namespace dpfl

#endif  // DPFL_COMMON_H_
