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


// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. Pass criterion numbers as arguments to run a
// subset, e.g. `dpfl_acceptance 1 3 5`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dpfl/analysis.h"
#include "dpfl/attacks.h"
#include "dpfl/config.h"
#include "dpfl/data.h"
#include "dpfl/experiment.h"
#include "dpfl/federation.h"
#include "dpfl/models.h"
#include "dpfl/privacy.h"
#include "oracles.h"

namespace dpfl {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double limit_seconds;
  std::function<Outcome()> check;
};

std::string Format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), fmt, args...);
  return buf;
}

ExperimentConfig Config(const std::vector<std::string>& overrides) {
  return ParseConfig("{}", overrides);
}

struct Cell {
  PreparedData data;
  TrainingTrace trace;
};

Cell RunConfig(const ExperimentConfig& config, bool retain_reports = false,
               const RunOptions& options = {}) {
  Cell cell{PrepareData(config), {}};
  FederationConfig federation = config.federation;
  federation.retain_reports = retain_reports;
  cell.trace = Run(cell.data.spec, cell.data.pair, cell.data.test, cell.data.partition,
                   federation, config.privacy, options);
  if (cell.trace.failure) throw TrainingError(cell.trace.failure->message);
  return cell;
}

std::string Seed(int s) { return "federation.master_seed=" + std::to_string(s); }

double Mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// --- 1: clipping, noise scale closed form, noiseless privatize ------------

Outcome MechanismExactness() {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  double worst_excess = -kInf;
  for (int i = 0; i < 10000; ++i) {
    const Index d = 1 + static_cast<Index>(unif(gen) * 200);
    const double scale = std::pow(10.0, -3.0 + 6.0 * unif(gen));
    const double c = 0.1 + 10.0 * unif(gen);
    Vector g(d);
    for (Index j = 0; j < d; ++j) g(j) = scale * normal(gen);
    worst_excess = std::max(worst_excess, Clip(g, c).norm() - c);
  }

  double worst_rel = 0.0;
  for (int i = 0; i < 100; ++i) {
    PrivacySpec p;
    p.epsilon = std::pow(10.0, -1.0 + 2.0 * i / 99.0);  // 0.1 .. 10
    p.delta = std::pow(10.0, -3.0 - 6.0 * unif(gen));
    p.total_rounds = 1 + static_cast<int>(unif(gen) * 500);
    p.sampling_prob = 0.01 + 0.99 * unif(gen);
    p.calib_const = 0.5 + 2.0 * unif(gen);
    const double expected = p.calib_const * p.sampling_prob *
                            std::sqrt(p.total_rounds * std::log(1.0 / p.delta)) / p.epsilon;
    worst_rel = std::max(worst_rel, std::abs(NoiseScale(p) - expected) / expected);
  }

  PerSampleGradients pg;
  pg.rows = Matrix(37, 23);
  for (Index r = 0; r < pg.rows.rows(); ++r) {
    for (Index c = 0; c < pg.rows.cols(); ++c) pg.rows(r, c) = 5.0 * normal(gen);
  }
  pg.losses = Vector::Zero(pg.rows.rows());
  PrivacySpec open;
  open.epsilon = kInf;
  open.clip_norm = kInf;
  NoiseStream stream(1, 0, 0);
  const Vector out = Privatize(pg, open, stream);
  double worst_mean = 0.0;
  for (Index c = 0; c < pg.rows.cols(); ++c) {
    double s = 0.0;
    for (Index r = 0; r < pg.rows.rows(); ++r) s += pg.rows(r, c);
    worst_mean = std::max(worst_mean, std::abs(out(c) - s / static_cast<double>(pg.rows.rows())));
  }

  const bool pass = worst_excess <= 1e-12 && worst_rel <= 1e-9 && worst_mean <= 1e-15;
  return {pass, Format("max(||clip||-C)=%.2e, sigma rel err=%.2e, noiseless mean err=%.2e",
                       worst_excess, worst_rel, worst_mean)};
}

// --- 2: per-sample gradients vs finite differences ------------------------

Outcome GradientOracle() {
  std::mt19937_64 gen(22);
  std::normal_distribution<double> normal;
  const std::vector<ModelSpec> specs = {
      {ModelKind::kLinear, 7, {}, 4, Activation::kRelu},
      {ModelKind::kMlp1, 7, {9}, 4, Activation::kRelu},
      {ModelKind::kMlp2, 7, {8, 6}, 4, Activation::kRelu},
  };
  double worst = 0.0;
  std::string per_kind;
  for (const ModelSpec& spec : specs) {
    ParameterVector params = InitParams(spec, 5, 1.5);
    for (Index j = 0; j < params.dim(); ++j) params.mutable_values()(j) += 0.1 * normal(gen);
    Matrix x(12, spec.input_dim);
    std::vector<int> y(12);
    for (Index r = 0; r < x.rows(); ++r) {
      for (Index c = 0; c < x.cols(); ++c) x(r, c) = normal(gen);
      y[static_cast<std::size_t>(r)] = static_cast<int>(r % spec.num_classes);
    }
    const PerSampleGradients g = ComputePerSampleGradients(spec, params, x, y);
    const testing::Flat flat = testing::ToFlat(params.values());
    double kind_worst = 0.0;
    for (Index r = 0; r < x.rows(); ++r) {
      const testing::Flat fd = testing::FiniteDifference(
          spec, flat, testing::RowToFlat(x, r), y[static_cast<std::size_t>(r)], 1e-6);
      testing::Flat diff = testing::RowToFlat(g.rows, r);
      for (std::size_t j = 0; j < diff.size(); ++j) diff[j] -= fd[j];
      kind_worst = std::max(kind_worst, testing::Norm(diff) / testing::Norm(fd));
    }
    worst = std::max(worst, kind_worst);
    per_kind += Format("%s=%.1e ", ToString(spec.kind).c_str(), kind_worst);
  }
  return {worst <= 1e-4, "max relative error " + per_kind};
}

// --- 3: single noiseless client reduces to centralized GD -----------------

Outcome Reduction() {
  double worst = 0.0;
  std::string per_kind;
  for (const std::string kind : {"linear", "mlp1", "mlp2"}) {
    std::vector<std::string> o = {
        "dataset.num_classes=3", "dataset.dim=6", "dataset.samples_per_class=40",
        "model.kind=" + kind, "federation.num_clients=1", "federation.total_rounds=10",
        "federation.strategy=ST", "privacy.epsilon=inf", "privacy.clip_norm=inf"};
    if (kind == "linear") o.push_back("model.hidden_dims=[]");
    if (kind == "mlp2") o.push_back("model.hidden_dims=[8,5]");
    if (kind == "mlp1") o.push_back("model.hidden_dims=[8]");
    const ExperimentConfig config = Config(o);
    const Cell cell = RunConfig(config);

    const LabeledDataset& train = cell.data.pair.target;
    std::vector<testing::Flat> xs;
    for (Index r = 0; r < train.size(); ++r) xs.push_back(testing::RowToFlat(train.features(), r));
    std::vector<double> lrs;
    for (int t = 0; t < 10; ++t) lrs.push_back(0.6 * std::pow(0.9934, t));
    const auto path = testing::RefGradientDescent(
        cell.data.spec, testing::ToFlat(cell.trace.initial().values()), xs, train.labels(), lrs);

    double kind_worst = 0.0;
    for (std::size_t t = 0; t < path.size(); ++t) {
      const Vector& got = cell.trace.snapshots[t].values();
      for (std::size_t j = 0; j < path[t].size(); ++j) {
        kind_worst = std::max(kind_worst, std::abs(got(static_cast<Index>(j)) - path[t][j]));
      }
    }
    worst = std::max(worst, kind_worst);
    per_kind += Format("%s=%.1e ", kind.c_str(), kind_worst);
  }
  return {worst <= 1e-10, "max |theta - theta_gd| over 10 rounds: " + per_kind};
}

// --- 4: HT body frozen, head-only reports, exposure ledger ----------------

Outcome FreezeAndExposure() {
  const ExperimentConfig config = Config({"federation.strategy=HT"});
  const Cell cell = RunConfig(config, true);
  const TrainingTrace& trace = cell.trace;
  const IndexRange head = trace.initial().head_range();

  bool body_frozen = true;
  for (const auto& snap : trace.snapshots) body_frozen &= snap.body() == trace.initial().body();
  bool head_only = true;
  std::size_t reports = 0;
  for (const auto& round : trace.reports) {
    for (const auto& r : round) {
      head_only &= r.update.size() == head.size();
      ++reports;
    }
  }
  const int T = config.federation.total_rounds;
  head_only &= reports == static_cast<std::size_t>(T * config.federation.num_clients);

  auto clients = MakeClients(cell.data.pair.target, cell.data.partition, config.privacy);
  bool ledger = true;
  int rejected = 0;
  for (auto& client : clients) {
    for (int t = 0; t < T; ++t) {
      client.Update(cell.data.spec, trace.initial(), Strategy::kHT, 7, t);
    }
    ledger &= client.exposures() == T;
    try {
      client.Update(cell.data.spec, trace.initial(), Strategy::kHT, 7, T);
    } catch (const BudgetViolation&) {
      ++rejected;
    }
    ledger &= client.exposures() == T;
  }
  ledger &= rejected == static_cast<int>(clients.size());

  return {body_frozen && head_only && ledger,
          Format("body frozen over %d rounds: %s; %zu reports of %d coords: %s; "
                 "ledger T=%d, extra exposure rejected for %d/%zu clients",
                 T, body_frozen ? "yes" : "no", reports, static_cast<int>(head.size()),
                 head_only ? "yes" : "no", T, rejected, clients.size())};
}

// --- 5: determinism ------------------------------------------------------

Outcome Determinism() {
  const ExperimentConfig config =
      Config({"federation.strategy=FT", "federation.twin_run=true", "federation.master_seed=3"});
  const Cell a = RunConfig(config);
  const Cell b = RunConfig(config);
  const bool same_csv = MetricsCsv(a.trace) == MetricsCsv(b.trace);

  std::vector<int> reversed(static_cast<std::size_t>(config.federation.num_clients));
  std::iota(reversed.rbegin(), reversed.rend(), 0);
  std::vector<int> shuffled = reversed;
  std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937(5));
  const Cell r = RunConfig(config, false, {reversed});
  const Cell s = RunConfig(config, false, {shuffled});
  ExperimentConfig threaded = config;
  threaded.federation.workers = 4;
  const Cell w = RunConfig(threaded);
  const ParameterVector& ref = a.trace.final_params();
  const bool same_theta = r.trace.final_params() == ref && s.trace.final_params() == ref &&
                          w.trace.final_params() == ref;
  return {same_csv && same_theta,
          Format("metrics CSV identical: %s; final theta identical under reversed, "
                 "shuffled and 4-worker client order: %s",
                 same_csv ? "yes" : "no", same_theta ? "yes" : "no")};
}

// --- 6: strategy ordering under tight and lenient budgets -----------------

Outcome StrategyOrdering() {
  int tight_wins = 0;
  int lenient_ft = 0;
  std::string rows;
  for (int seed = 0; seed < 10; ++seed) {
    for (double eps : {1.0, 9.0}) {
      double acc[3];
      int i = 0;
      for (const char* s : {"ST", "FT", "HT"}) {
        acc[i++] = RunConfig(Config({std::string("federation.strategy=") + s,
                                     Format("privacy.epsilon=%g", eps), Seed(seed)}))
                       .trace.best_accuracy();
      }
      if (eps == 1.0) {
        tight_wins += acc[2] > acc[1] && acc[2] > acc[0];
      } else {
        lenient_ft += acc[1] >= acc[2];
      }
      rows += Format("\n    seed %d eps %g: ST %.4f FT %.4f HT %.4f", seed, eps, acc[0], acc[1],
                     acc[2]);
    }
  }
  return {tight_wins >= 8 && lenient_ft >= 6,
          Format("eps=1: HT best in %d/10 seeds; eps=9: FT>=HT in %d/10 seeds", tight_wins,
                 lenient_ft) +
              rows};
}

// --- 7: noise accumulation ------------------------------------------------

Outcome NoiseAccumulation() {
  std::vector<double> betas;
  for (int seed = 0; seed < 5; ++seed) {
    const Cell c = RunConfig(Config({"federation.strategy=FT", "federation.twin_run=true", Seed(seed)}));
    std::vector<double> kappa;
    for (const auto& m : c.trace.metrics) kappa.push_back(*m.kappa);
    betas.push_back(FitGrowth(kappa));
  }
  const double beta = Mean(betas);

  const Cell ht = RunConfig(Config({"federation.strategy=HT", "federation.twin_run=true"}));
  bool zero_body = ht.trace.twin_snapshots.size() == ht.trace.snapshots.size();
  for (std::size_t t = 0; zero_body && t < ht.trace.snapshots.size(); ++t) {
    const Vector diff = ht.trace.snapshots[t].body() - ht.trace.twin_snapshots[t].body();
    zero_body = (diff.array() == 0.0).all();
  }
  std::string per_seed;
  for (double b : betas) per_seed += Format(" %.3f", b);
  return {beta >= 0.35 && beta <= 0.65 && zero_body,
          Format("FT growth exponent %.3f (per seed:%s); HT body difference exactly zero: %s", beta,
                 per_seed.c_str(), zero_body ? "yes" : "no")};
}

// --- 8: update consistency ------------------------------------------------

Outcome UpdateConsistency() {
  double mean_abs[3] = {0, 0, 0};
  int i = 0;
  for (const char* s : {"ST", "FT", "HT"}) {
    std::vector<double> per_seed;
    for (int seed = 0; seed < 5; ++seed) {
      const Cell c = RunConfig(Config({std::string("federation.strategy=") + s, Seed(seed)}));
      double sum = 0.0;
      int n = 0;
      for (const auto& m : c.trace.metrics) {
        if (!m.update_cosine) continue;
        sum += std::abs(*m.update_cosine);
        ++n;
      }
      per_seed.push_back(sum / n);
    }
    mean_abs[i++] = Mean(per_seed);
  }
  return {mean_abs[2] > mean_abs[1] && mean_abs[2] > mean_abs[0],
          Format("mean |cos| ST %.4f FT %.4f HT %.4f", mean_abs[0], mean_abs[1], mean_abs[2])};
}

// --- 9: attack null baselines and direction ------------------------------

struct AttackCell {
  double best_auc = 0.0;
  double best_asr = 0.0;
};

AttackCell AttackRun(const std::vector<std::string>& overrides, int per_client_cap,
                     std::optional<std::uint64_t> null_seed) {
  const ExperimentConfig config = Config(overrides);
  const Cell cell = RunConfig(config, true);
  const auto sizes = cell.data.partition.client_sizes();
  const int per_client = static_cast<int>(
      std::min<Index>(per_client_cap, *std::min_element(sizes.begin(), sizes.end())));
  const AttackSplit split =
      BuildAttackSplit(cell.data.partition, per_client, cell.data.test,
                       static_cast<int>(cell.data.test.size()),
                       DeriveSeed(config.federation.master_seed, "attack"));
  AuditOptions options;
  options.shuffle_ground_truth_seed = null_seed;
  const AttackReport report = Audit(cell.trace, split, cell.data.pair.target, cell.data.test, options);
  return {report.best_auc, report.best_asr};
}

Outcome AttackBaselines() {
  const double chance = 1.0 / 10.0;
  std::vector<double> null_auc, null_asr;
  for (int seed = 0; seed < 5; ++seed) {
    const AttackCell a = AttackRun({"federation.strategy=ST", "federation.alpha=10", Seed(seed)},
                                   500, 1000 + seed);
    null_auc.push_back(a.best_auc);
    null_asr.push_back(a.best_asr);
  }
  const double auc0 = Mean(null_auc);
  const double asr0 = Mean(null_asr);
  const bool null_ok = auc0 >= 0.48 && auc0 <= 0.55 && std::abs(asr0 - chance) <= 0.02;

  // Heterogeneous partition, increasing noise.
  const std::vector<std::string> eps = {"inf", "9", "1"};
  std::vector<double> auc(eps.size()), asr(eps.size());
  for (std::size_t e = 0; e < eps.size(); ++e) {
    std::vector<double> au, as;
    for (int seed = 0; seed < 5; ++seed) {
      const AttackCell a = AttackRun({"federation.strategy=ST", "federation.alpha=0.1",
                                      "privacy.epsilon=" + eps[e], Seed(seed)},
                                     100, std::nullopt);
      au.push_back(a.best_auc);
      as.push_back(a.best_asr);
    }
    auc[e] = Mean(au);
    asr[e] = Mean(as);
  }
  const bool strong = asr[0] >= 2.0 * chance;
  bool monotone = true;
  for (std::size_t e = 1; e < eps.size(); ++e) {
    monotone &= auc[e] <= auc[e - 1] + 0.02 && asr[e] <= asr[e - 1] + 0.02;
  }
  return {null_ok && strong && monotone,
          Format("null audit AUC %.4f ASR %.4f; alpha=0.1 noiseless ASR %.4f; "
                 "AUC/ASR at eps inf,9,1: %.4f/%.4f %.4f/%.4f %.4f/%.4f",
                 auc0, asr0, asr[0], auc[0], asr[0], auc[1], asr[1], auc[2], asr[2])};
}

// --- 10: relative increase arithmetic -------------------------------------

Outcome RelativeIncreaseArithmetic() {
  // (ST baseline, HT value, stated percentage)
  const struct { double base, value, pct; } rows[] = {
      {23.96, 68.86, 187.40},
      {20.48, 25.06, 22.36},
  };
  double worst = 0.0;
  for (const auto& r : rows) {
    worst = std::max(worst, std::abs(RelativeIncrease(r.base, r.value) - r.pct));
  }
  return {worst <= 0.01, Format("max deviation %.4f percentage points", worst)};
}

// --- 11: Dirichlet heterogeneity -----------------------------------------

Outcome DirichletHeterogeneity() {
  const PreparedData data = PrepareData(Config({}));
  const LabeledDataset& train = data.pair.target;
  bool conserved = true;
  bool deterministic = true;
  for (double alpha : {0.05, 0.5, 3.0, 100.0}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const ClientPartition p = DirichletPartition(train, 10, alpha, seed);
      try {
        p.Validate(train.size());
      } catch (const ParameterError&) {
        conserved = false;
      }
      conserved &= p.total() == train.size();
      deterministic &= DirichletPartition(train, 10, alpha, seed).assignments == p.assignments;
    }
  }
  std::vector<double> low, high;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    low.push_back(ClassProportionDeviation(train, DirichletPartition(train, 10, 0.5, seed)));
    high.push_back(ClassProportionDeviation(train, DirichletPartition(train, 10, 3.0, seed)));
  }
  const bool ordered = Mean(low) > Mean(high);
  return {conserved && deterministic && ordered,
          Format("conservation: %s; determinism: %s; mean deviation alpha=0.5 %.4f vs "
                 "alpha=3 %.4f",
                 conserved ? "yes" : "no", deterministic ? "yes" : "no", Mean(low), Mean(high))};
}

}  // namespace
}  // namespace dpfl

int main(int argc, char** argv) {
  dpfl::ConfigureAllocator();
  using namespace dpfl;
  const std::vector<Criterion> criteria = {
      {1, "mechanism exactness", 10, MechanismExactness},
      {2, "gradient oracle", 30, GradientOracle},
      {3, "reduction to centralized GD", 10, Reduction},
      {4, "HT freeze and exposure ledger", 10, FreezeAndExposure},
      {5, "determinism", 60, Determinism},
      {6, "strategy ordering", 600, StrategyOrdering},
      {7, "noise accumulation", 300, NoiseAccumulation},
      {8, "update consistency", 300, UpdateConsistency},
      {9, "attack baselines and direction", 600, AttackBaselines},
      {10, "relative increase arithmetic", 1, RelativeIncreaseArithmetic},
      {11, "Dirichlet heterogeneity", 30, DirichletHeterogeneity},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.contains(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.check();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.limit_seconds;
    const bool pass = outcome.pass && in_time;
    failures += !pass;
    std::printf("criterion %2d %s: %s  [%.2f s, limit %.0f s%s]\n    %s\n", c.id, c.name.c_str(),
                pass ? "PASS" : "FAIL", secs, c.limit_seconds, in_time ? "" : ", TOO SLOW",
                outcome.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
