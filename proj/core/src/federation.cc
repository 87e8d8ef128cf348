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

#include "dpfl/federation.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <mutex>
#include <numeric>
#include <unordered_map>

#include "dpfl/analysis.h"
#include "parallel.h"

namespace dpfl {
namespace {

std::uint64_t HashBytes(const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h = (h ^ p[i]) * 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::string ToString(Strategy strategy) {
  switch (strategy) {
    case Strategy::kST:
      return "ST";
    case Strategy::kFT:
      return "FT";
    case Strategy::kHT:
      return "HT";
  }
  return "?";
}

Strategy ParseStrategy(const std::string& s) {
  if (s == "ST") return Strategy::kST;
  if (s == "FT") return Strategy::kFT;
  if (s == "HT") return Strategy::kHT;
  throw ParameterError("unknown strategy '" + s + "' (expected ST, FT or HT)");
}

GradientScope ExposedScope(Strategy strategy) {
  return strategy == Strategy::kHT ? GradientScope::kHead : GradientScope::kFull;
}

void FederationConfig::Validate() const {
  if (num_clients < 1) throw ParameterError("federation.num_clients must be >= 1");
  if (total_rounds < 1) throw ParameterError("federation.total_rounds must be >= 1");
  if (!(lr_init > 0.0) || !std::isfinite(lr_init)) {
    throw ParameterError("federation.lr_init must be positive and finite");
  }
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) {
    throw ParameterError("federation.lr_decay must be in (0, 1]");
  }
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw ParameterError("federation.alpha must be positive and finite");
  }
  if (pretrain_epochs < 0) throw ParameterError("federation.pretrain_epochs must be >= 0");
  if (!(pretrain_lr > 0.0)) throw ParameterError("federation.pretrain_lr must be > 0");
  if (!(init_scale > 0.0)) throw ParameterError("federation.init_scale must be > 0");
  if (workers < 1) throw ParameterError("federation.workers must be >= 1");
}

ParameterVector Pretrain(const ModelSpec& spec, const LabeledDataset& source,
                         int epochs, double lr, std::uint64_t seed) {
  if (epochs < 0) throw ParameterError("Pretrain: epochs must be >= 0");
  if (!(lr > 0.0)) throw ParameterError("Pretrain: lr must be > 0");
  ParameterVector params = InitParams(spec, seed, 1.0);
  const double inf = std::numeric_limits<double>::infinity();
  for (int step = 0; step < epochs; ++step) {
    const ClippedSum grad = ComputeClippedSum(spec, params, source.features(),
                                              source.labels(), inf, GradientScope::kFull);
    if (!std::isfinite(grad.mean_loss) || !grad.sum.allFinite()) {
      throw TrainingError("pre-training diverged at step " + std::to_string(step));
    }
    params.mutable_values() -= (lr / static_cast<double>(grad.count)) * grad.sum;
  }
  return params;
}

double LrAt(const FederationConfig& config, int t) {
  if (t < 0 || t >= config.total_rounds) {
    throw ParameterError("round " + std::to_string(t) + " outside [0, " +
                         std::to_string(config.total_rounds) + ")");
  }
  return config.lr_init * std::pow(config.lr_decay, t);
}

Client::Client(int id, LabeledDataset data, double weight, PrivacySpec privacy)
    : id_(id), data_(std::move(data)), weight_(weight), privacy_(privacy) {
  if (!(weight > 0.0 && weight <= 1.0)) {
    throw ParameterError("client weight must be in (0, 1]");
  }
  privacy_.Validate();
}

GradientReport Client::Update(const ModelSpec& spec, const ParameterVector& global,
                              Strategy strategy, std::uint64_t noise_seed, int round,
                              bool keep_audit_trace) {
  if (EffectiveBudgetCheck(privacy_, exposures_ + 1) == BudgetStatus::kViolation) {
    throw BudgetViolation("client " + std::to_string(id_) + " already exposed " +
                          std::to_string(exposures_) + " updates; budget was calibrated for T=" +
                          std::to_string(privacy_.total_rounds));
  }
  GradientReport report = Compute(spec, global, strategy, NoiseScale(privacy_), noise_seed,
                                  round, keep_audit_trace);
  ++exposures_;
  return report;
}

GradientReport Client::ShadowUpdate(const ModelSpec& spec, const ParameterVector& global,
                                    Strategy strategy, int round) const {
  return Compute(spec, global, strategy, 0.0, 0, round, false);
}

GradientReport Client::Compute(const ModelSpec& spec, const ParameterVector& global,
                               Strategy strategy, double sigma, std::uint64_t noise_seed,
                               int round, bool keep_audit_trace) const {
  const GradientScope scope = ExposedScope(strategy);
  GradientReport report;
  report.client_id = id_;
  report.round = round;
  report.weight = weight_;
  const ClippedSum sum = ComputeClippedSum(spec, global, data_.features(), data_.labels(),
                                           privacy_.clip_norm, scope);
  if (!std::isfinite(sum.mean_loss)) {
    throw TrainingError("client " + std::to_string(id_) + " loss is not finite in round " +
                        std::to_string(round));
  }
  NoiseStream stream(noise_seed, id_, round);
  report.update = PrivatizeSum(sum.sum, sum.count, sigma, stream);
  if (keep_audit_trace) {
    PerSampleGradients g = Restrict(
        ComputePerSampleGradients(spec, global, data_.features(), data_.labels()),
        global.head_range(), scope);
    for (Index i = 0; i < g.rows.rows(); ++i) {
      g.rows.row(i) = Clip(g.rows.row(i).transpose(), privacy_.clip_norm).transpose();
    }
    report.audit_trace = std::move(g.rows);
  }
  return report;
}

std::vector<Client> MakeClients(const LabeledDataset& train,
                                const ClientPartition& partition,
                                const PrivacySpec& privacy) {
  partition.Validate(train.size());
  const double total = static_cast<double>(partition.total());
  std::vector<Client> clients;
  clients.reserve(partition.num_clients());
  for (std::size_t n = 0; n < partition.num_clients(); ++n) {
    clients.emplace_back(static_cast<int>(n),
                         train.Subset(partition.assignments[n],
                                      train.name() + "/client" + std::to_string(n)),
                         static_cast<double>(partition.client_size(n)) / total, privacy);
  }
  return clients;
}

Vector Aggregate(const std::vector<GradientReport>& reports) {
  if (reports.empty()) throw AggregationError("no reports to aggregate");
  std::vector<const GradientReport*> ordered;
  for (const auto& r : reports) ordered.push_back(&r);
  std::sort(ordered.begin(), ordered.end(),
            [](const auto* a, const auto* b) { return a->client_id < b->client_id; });
  const int round = ordered.front()->round;
  const Index dim = ordered.front()->update.size();
  double weight_total = 0.0;
  Vector out = Vector::Zero(dim);
  for (const auto* r : ordered) {
    if (r->round != round) {
      throw AggregationError("report of client " + std::to_string(r->client_id) +
                             " is for round " + std::to_string(r->round) + ", expected " +
                             std::to_string(round));
    }
    if (r->update.size() != dim) {
      throw AggregationError("report of client " + std::to_string(r->client_id) + " has " +
                             std::to_string(r->update.size()) + " coordinates, expected " +
                             std::to_string(dim));
    }
    weight_total += r->weight;
    out += r->weight * r->update;
  }
  if (std::abs(weight_total - 1.0) > 1e-12) {
    throw AggregationError("report weights sum to " + std::to_string(weight_total));
  }
  return out;
}

ParameterVector ApplyUpdate(const ParameterVector& theta, const Vector& update, double lr,
                            Strategy strategy) {
  ParameterVector next = theta;
  if (strategy == Strategy::kHT) {
    const IndexRange head = theta.head_range();
    if (update.size() != head.size()) {
      throw ShapeError("HT update has " + std::to_string(update.size()) +
                       " coordinates, head has " + std::to_string(head.size()));
    }
    next.mutable_values().segment(head.begin, head.size()) -= lr * update;
  } else {
    if (update.size() != theta.dim()) {
      throw ShapeError("update has " + std::to_string(update.size()) +
                       " coordinates, model has " + std::to_string(theta.dim()));
    }
    next.mutable_values() -= lr * update;
  }
  return next;
}

double TrainingTrace::best_accuracy() const {
  double best = 0.0;
  for (const auto& m : metrics) best = std::max(best, m.test_accuracy);
  return best;
}

ParameterVector InitialParameters(const ModelSpec& spec, const TransferPair& pair,
                                  const FederationConfig& config) {
  if (config.strategy == Strategy::kST) {
    return InitParams(spec, DeriveSeed(config.master_seed, "scratch-init"), config.init_scale);
  }
  // FT and HT cells of a sweep share the same pre-trained start; memoize it
  // on everything Pretrain reads.
  const std::uint64_t seed = DeriveSeed(config.master_seed, "pretrain");
  std::uint64_t key = Mix64(seed ^ static_cast<std::uint64_t>(config.pretrain_epochs));
  key = Mix64(key ^ std::bit_cast<std::uint64_t>(config.pretrain_lr));
  for (char c : spec.Descriptor()) key = Mix64(key ^ static_cast<unsigned char>(c));
  key = Mix64(key ^ HashBytes(pair.source.features().data(),
                              sizeof(double) * pair.source.features().size()));
  key = Mix64(key ^ HashBytes(pair.source.labels().data(),
                              sizeof(int) * pair.source.labels().size()));
  static std::mutex mu;
  static std::unordered_map<std::uint64_t, ParameterVector> cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  ParameterVector params = Pretrain(spec, pair.source, config.pretrain_epochs,
                                    config.pretrain_lr, seed);
  std::lock_guard<std::mutex> lock(mu);
  if (cache.size() >= 64) cache.clear();
  cache.emplace(key, params);
  return params;
}

TrainingTrace Run(const ModelSpec& spec, const TransferPair& pair,
                  const LabeledDataset& test_set, const ClientPartition& partition,
                  const FederationConfig& config, const PrivacySpec& privacy,
                  const RunOptions& options) {
  config.Validate();
  privacy.Validate();
  spec.Validate();
  if (static_cast<int>(partition.num_clients()) != config.num_clients) {
    throw ParameterError("partition has " + std::to_string(partition.num_clients()) +
                         " clients, config expects " + std::to_string(config.num_clients));
  }
  if (pair.target.dim() != spec.input_dim || test_set.dim() != spec.input_dim) {
    throw ShapeError("target data dimension does not match model input_dim");
  }

  std::vector<int> order = options.client_order;
  if (order.empty()) {
    order.resize(static_cast<std::size_t>(config.num_clients));
    std::iota(order.begin(), order.end(), 0);
  } else {
    std::vector<int> sorted = order;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      if (sorted[i] != static_cast<int>(i) ||
          sorted.size() != static_cast<std::size_t>(config.num_clients)) {
        throw ParameterError("client_order is not a permutation of client ids");
      }
    }
  }

  TrainingTrace trace;
  trace.spec = spec;
  trace.strategy = config.strategy;
  trace.sigma = NoiseScale(privacy);

  std::vector<Client> clients = MakeClients(pair.target, partition, privacy);
  const std::uint64_t noise_seed = DeriveSeed(config.master_seed, "noise");

  ParameterVector theta = InitialParameters(spec, pair, config);
  trace.snapshots.push_back(theta);
  ParameterVector twin = theta;
  if (config.twin_run) trace.twin_snapshots.push_back(twin);

  const auto n_clients = static_cast<std::size_t>(config.num_clients);
  for (int t = 0; t < config.total_rounds; ++t) {
    const int round = t + 1;
    const double lr = LrAt(config, t);
    std::vector<GradientReport> reports(n_clients);
    std::vector<GradientReport> shadow(config.twin_run ? n_clients : 0);
    try {
      internal::ParallelFor(n_clients, config.workers, [&](std::size_t slot) {
        const auto n = static_cast<std::size_t>(order[slot]);
        reports[n] = clients[n].Update(spec, theta, config.strategy, noise_seed, round,
                                       false);
        if (config.twin_run) {
          shadow[n] = clients[n].ShadowUpdate(spec, twin, config.strategy, round);
        }
      });
    } catch (const BudgetViolation& e) {
      trace.failure = RunFailure{"budget", round, e.what()};
      return trace;
    } catch (const TrainingError& e) {
      trace.failure = RunFailure{"training", round, e.what()};
      return trace;
    }

    Vector aggregate = Aggregate(reports);
    theta = ApplyUpdate(theta, aggregate, lr, config.strategy);
    if (config.twin_run) twin = ApplyUpdate(twin, Aggregate(shadow), lr, config.strategy);

    RoundMetrics m;
    m.round = round;
    m.lr = lr;
    m.sigma = trace.sigma;
    if (!theta.values().allFinite()) {
      trace.failure = RunFailure{"training", round, "parameters became non-finite"};
      return trace;
    }
    const Evaluation eval = Evaluate(spec, theta, test_set);
    if (!std::isfinite(eval.mean_loss)) {
      trace.failure = RunFailure{"training", round,
                                 "test loss became non-finite in round " + std::to_string(round)};
      return trace;
    }
    m.test_accuracy = eval.accuracy;
    m.mean_loss = eval.mean_loss;
    if (config.twin_run) m.kappa = Kappa(theta, twin);
    if (!trace.aggregates.empty()) {
      m.update_cosine = UpdateCosine(aggregate, trace.aggregates.back());
    }

    trace.snapshots.push_back(theta);
    if (config.twin_run) trace.twin_snapshots.push_back(twin);
    trace.aggregates.push_back(std::move(aggregate));
    trace.learning_rates.push_back(lr);
    if (config.retain_reports) trace.reports.push_back(std::move(reports));
    trace.metrics.push_back(m);
  }
  return trace;
}

}  // namespace dpfl
