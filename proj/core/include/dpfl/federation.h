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

#ifndef DPFL_FEDERATION_H_
#define DPFL_FEDERATION_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dpfl/common.h"
#include "dpfl/data.h"
#include "dpfl/models.h"
#include "dpfl/privacy.h"

namespace dpfl {

// ST: random init, all parameters trained. FT: pre-trained init, all
// parameters trained. HT: pre-trained init, only the head trained and exposed.
enum class Strategy { kST, kFT, kHT };

std::string ToString(Strategy strategy);
Strategy ParseStrategy(const std::string& s);
GradientScope ExposedScope(Strategy strategy);

struct FederationConfig {
  int num_clients = 10;
  int total_rounds = 128;
  double lr_init = 0.6;
  double lr_decay = 0.9934;
  double alpha = 1.0;
  Strategy strategy = Strategy::kHT;
  std::uint64_t master_seed = 0;
  bool twin_run = false;

  // Centralized pre-training on the source set (FT and HT only).
  int pretrain_epochs = 200;
  double pretrain_lr = 0.5;
  // Uniform init range multiplier (ST init and the start of pre-training).
  double init_scale = 1.0;

  // Keep every GradientReport in the trace (required by the attack audit).
  bool retain_reports = false;
  // Clients privatized concurrently per round; never changes results.
  int workers = 1;

  void Validate() const;
  friend bool operator==(const FederationConfig&, const FederationConfig&) = default;
};

// Full-batch gradient descent on `source` from InitParams(spec, seed, 1.0).
// Throws TrainingError naming the step if the loss becomes non-finite.
ParameterVector Pretrain(const ModelSpec& spec, const LabeledDataset& source,
                         int epochs, double lr, std::uint64_t seed);

// eta_t = eta_0 * decay^t for 0 <= t < T.
double LrAt(const FederationConfig& config, int t);

// A participant holding its local data and a ledger of exposed updates.
// Update() refuses to expose more than privacy.total_rounds updates.
class Client {
 public:
  Client(int id, LabeledDataset data, double weight, PrivacySpec privacy);

  int id() const { return id_; }
  double weight() const { return weight_; }
  const LabeledDataset& data() const { return data_; }
  int exposures() const { return exposures_; }

  // Clipped, noised mean gradient at `global` over the full local dataset,
  // restricted to the head for HT. Throws BudgetViolation once the ledger
  // is exhausted.
  GradientReport Update(const ModelSpec& spec, const ParameterVector& global,
                        Strategy strategy, std::uint64_t noise_seed, int round,
                        bool keep_audit_trace = false);

  // The same computation with sigma = 0. Nothing is exposed, so the ledger
  // is untouched; this drives the noise-free twin trajectory.
  GradientReport ShadowUpdate(const ModelSpec& spec, const ParameterVector& global,
                              Strategy strategy, int round) const;

 private:
  GradientReport Compute(const ModelSpec& spec, const ParameterVector& global,
                         Strategy strategy, double sigma, std::uint64_t noise_seed,
                         int round, bool keep_audit_trace) const;

  int id_;
  LabeledDataset data_;
  double weight_;
  PrivacySpec privacy_;
  int exposures_ = 0;
};

// Builds one Client per partition entry with weight D_n / D.
std::vector<Client> MakeClients(const LabeledDataset& train,
                                const ClientPartition& partition,
                                const PrivacySpec& privacy);

// sum_n weight_n * update_n, summed in client-id order.
Vector Aggregate(const std::vector<GradientReport>& reports);

// theta - lr * update on the exposed coordinates; HT leaves the body
// bit-identical.
ParameterVector ApplyUpdate(const ParameterVector& theta, const Vector& update,
                            double lr, Strategy strategy);

struct RoundMetrics {
  int round = 0;  // 1..T; parameters after the round's update
  double test_accuracy = 0.0;
  double mean_loss = 0.0;  // test-set cross-entropy
  std::optional<double> kappa;          // twin runs only
  std::optional<double> update_cosine;  // from the second round on
  double sigma = 0.0;
  double lr = 0.0;
};

struct RunFailure {
  std::string kind;  // "training" or "budget"
  int round = 0;
  std::string message;
};

struct TrainingTrace {
  ModelSpec spec;
  Strategy strategy = Strategy::kST;
  double sigma = 0.0;
  std::vector<ParameterVector> snapshots;       // theta^0 .. theta^T
  std::vector<ParameterVector> twin_snapshots;  // noise-free twin, if enabled
  std::vector<Vector> aggregates;               // aggregate update of rounds 1..T
  std::vector<double> learning_rates;           // eta used in rounds 1..T
  std::vector<std::vector<GradientReport>> reports;  // per round, if retained
  std::vector<RoundMetrics> metrics;
  std::optional<RunFailure> failure;

  const ParameterVector& initial() const { return snapshots.front(); }
  const ParameterVector& final_params() const { return snapshots.back(); }
  int rounds_completed() const { return static_cast<int>(metrics.size()); }
  double best_accuracy() const;
};

struct RunOptions {
  // Order in which clients are computed within a round (a permutation of
  // client ids). Empty means ascending. Aggregation order is always by id.
  std::vector<int> client_order;
};

// Strategy-dependent initialization followed by T rounds of client updates,
// aggregation and the decayed-step update. Failures end the run early and are
// recorded in trace.failure with everything computed so far.
TrainingTrace Run(const ModelSpec& spec, const TransferPair& pair,
                  const LabeledDataset& test_set, const ClientPartition& partition,
                  const FederationConfig& config, const PrivacySpec& privacy,
                  const RunOptions& options = {});

// The initial parameters Run() uses for a given strategy and seed.
ParameterVector InitialParameters(const ModelSpec& spec, const TransferPair& pair,
                                  const FederationConfig& config);

}  // namespace dpfl

#endif  // DPFL_FEDERATION_H_
