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

#ifndef DPFL_ATTACKS_H_
#define DPFL_ATTACKS_H_

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dpfl/common.h"
#include "dpfl/data.h"
#include "dpfl/federation.h"
#include "dpfl/models.h"

namespace dpfl {

// Cosine similarity between an exposed update and a sample gradient. A zero
// vector on either side scores 0.
double SampleSimilarity(const Vector& exposed_update, const Vector& sample_gradient);

// Mann-Whitney estimate of P(member score > non-member score), ties counting
// one half. Both sides must be non-empty.
double MannWhitneyAuc(std::span<const double> member_scores,
                      std::span<const double> non_member_scores);

struct MembershipScore {
  bool is_member = false;
  std::size_t client = 0;  // source client for members
  Index sample = 0;        // training row (members) or test row (non-members)
  double score = 0.0;
};

struct MiaRound {
  int round = 0;
  std::vector<MembershipScore> scores;
  double auc = 0.5;
};

struct SiaRound {
  int round = 0;
  std::vector<int> inferred_sources;  // one per member, in split order
  double asr = 0.0;
};

// Server-side view of one round: the global model the clients started from,
// the step size, and every client's exposed report (ordered by client id).
struct ExposedRound {
  int round = 0;
  const ParameterVector* theta_before = nullptr;
  double lr = 0.0;
  const std::vector<GradientReport>* reports = nullptr;
};

// Members are scored against their own client's report, non-members against
// every client's report keeping the maximum.
MiaRound MiaAttackRound(const ExposedRound& exposed, const AttackSplit& split,
                        const ModelSpec& spec, Strategy strategy,
                        const LabeledDataset& train, const LabeledDataset& test);

// theta_before - lr * update on the exposed coordinates.
ParameterVector RecoverClientModel(const ParameterVector& theta_before,
                                   const GradientReport& report, double lr,
                                   Strategy strategy);

// argmin_n of the member's cross-entropy under each recovered client model,
// ties to the smallest client id. `true_sources` may override the split's
// client labels (used for null audits).
SiaRound SiaAttackRound(const ExposedRound& exposed, const AttackSplit& split,
                        const ModelSpec& spec, Strategy strategy,
                        const LabeledDataset& train,
                        std::span<const int> true_sources = {});

// Index of the smallest value, ties to the smallest index.
int ArgminLoss(std::span<const double> losses);

// Fraction of predictions equal to the truth.
double AttackSuccessRate(std::span<const int> inferred, std::span<const int> truth);

struct AttackReport {
  std::vector<double> per_round_auc;
  std::vector<double> per_round_asr;
  double best_auc = 0.0;
  double best_asr = 0.0;
  int best_auc_round = 0;
  int best_asr_round = 0;
  std::vector<int> inferred_sources;  // from the best-ASR round
};

struct AuditOptions {
  // When set, ground truth is permuted with this seed before scoring: the
  // membership flags across the pooled samples and the source labels across
  // the members. Yields the attack's null distribution.
  std::optional<std::uint64_t> shuffle_ground_truth_seed;
  int workers = 1;
};

// MIA and SIA for every round of a trace that retained its reports; best
// values are maxima over rounds.
AttackReport Audit(const TrainingTrace& trace, const AttackSplit& split,
                   const LabeledDataset& train, const LabeledDataset& test,
                   const AuditOptions& options = {});

}  // namespace dpfl

#endif  // DPFL_ATTACKS_H_
