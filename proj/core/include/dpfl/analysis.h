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

#ifndef DPFL_ANALYSIS_H_
#define DPFL_ANALYSIS_H_

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dpfl/common.h"
#include "dpfl/data.h"
#include "dpfl/models.h"

namespace dpfl {

enum class Strategy;

// ||noisy - noise_free||_2 over the full parameter vector.
double Kappa(const ParameterVector& noisy, const ParameterVector& noise_free);

// Cosine of consecutive aggregate updates; 0 if either is the zero vector.
double UpdateCosine(const Vector& current, const Vector& previous);

// Least-squares slope of log(kappa_t) against log(t), with t = 1, 2, ... for
// the given series. Non-positive entries are dropped; fewer than 10 remaining
// points is a NumericError.
double FitGrowth(std::span<const double> kappa_series);

struct DomainGap {
  std::vector<Matrix> projections;  // one n_k x 2 matrix per dataset
  Matrix centroids;                 // k x 2
  Matrix pairwise_gaps;             // k x k centroid distances
  double gap_statistic = 0.0;       // mean pairwise centroid distance
};

// Fisher LDA with dataset identity as the class. Within-class scatter is the
// pooled covariance plus 1e-6 * trace / dim on the diagonal; directions are
// the top two generalized eigenvectors of (between, within), normalized to
// unit within-class variance.
DomainGap LdaProject(std::span<const LabeledDataset> datasets);

// 100 * (value - baseline) / baseline.
double RelativeIncrease(double baseline, double value);

// One finished run as seen by Summarize.
struct SummaryEntry {
  std::map<std::string, std::string> axes;  // sweep coordinates except strategy
  Strategy strategy;
  double best_accuracy = 0.0;
  std::optional<double> best_auc;
  std::optional<double> best_asr;
  bool failed = false;
};

struct StrategyResult {
  double best_accuracy = 0.0;
  std::optional<double> best_auc;
  std::optional<double> best_asr;
  bool failed = false;
};

struct SummaryRow {
  std::map<std::string, std::string> axes;
  std::map<std::string, StrategyResult> by_strategy;  // keyed "ST", "FT", "HT"
  std::optional<double> delta_ht_ft;                 // HT - FT best accuracy
  std::optional<double> rel_increase_ft;             // vs ST, percent
  std::optional<double> rel_increase_ht;
  std::string ordering;                              // e.g. "HT>FT>ST"
};

// Groups entries by their axes and lays strategies side by side. All entries
// must share the same axis names, and a (axes, strategy) pair may appear only
// once; otherwise AggregationError.
std::vector<SummaryRow> Summarize(const std::vector<SummaryEntry>& entries);

}  // namespace dpfl

#endif  // DPFL_ANALYSIS_H_
