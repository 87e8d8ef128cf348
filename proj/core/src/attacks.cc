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

#include "dpfl/attacks.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dpfl/rng.h"
#include "parallel.h"

namespace dpfl {
namespace {

constexpr Index kGradientChunk = 512;

const GradientReport& ReportOf(const std::vector<GradientReport>& reports, std::size_t client) {
  for (const auto& r : reports) {
    if (r.client_id == static_cast<int>(client)) return r;
  }
  throw AuditError("no report for client " + std::to_string(client));
}

// Rows: exposed-update directions, unit norm (zero rows stay zero).
Matrix NormalizedUpdates(const std::vector<GradientReport>& reports, std::size_t num_clients) {
  const Index dim = reports.front().update.size();
  Matrix u = Matrix::Zero(static_cast<Index>(num_clients), dim);
  for (std::size_t n = 0; n < num_clients; ++n) {
    const Vector& g = ReportOf(reports, n).update;
    if (g.size() != dim) throw AuditError("reports disagree on dimension");
    const double norm = g.norm();
    if (norm > 0.0) u.row(static_cast<Index>(n)) = g.transpose() / norm;
  }
  return u;
}

// Cosine of every sample gradient (rows of `batch`) with every update
// direction; samples x clients.
Matrix Similarities(const ModelSpec& spec, const ParameterVector& theta, Strategy strategy,
                    const LabeledDataset& batch, const Matrix& directions) {
  const PerSampleGradients g =
      Restrict(ComputePerSampleGradients(spec, theta, batch.features(), batch.labels()),
               theta.head_range(), ExposedScope(strategy));
  if (g.rows.cols() != directions.cols()) {
    throw AuditError("sample gradient dimension " + std::to_string(g.rows.cols()) +
                     " does not match exposed update dimension " +
                     std::to_string(directions.cols()));
  }
  Matrix dots = g.rows * directions.transpose();
  const Vector norms = g.rows.rowwise().norm();
  for (Index i = 0; i < dots.rows(); ++i) {
    if (norms(i) > 0.0) {
      dots.row(i) /= norms(i);
    } else {
      dots.row(i).setZero();
    }
  }
  return dots.cwiseMax(-1.0).cwiseMin(1.0);
}

void CheckExposed(const ExposedRound& exposed) {
  if (exposed.theta_before == nullptr || exposed.reports == nullptr || exposed.reports->empty()) {
    throw AuditError("round " + std::to_string(exposed.round) + ": missing gradient log");
  }
}

}  // namespace

double SampleSimilarity(const Vector& exposed_update, const Vector& sample_gradient) {
  if (exposed_update.size() != sample_gradient.size()) {
    throw ShapeError("sample_similarity: dimensions " + std::to_string(exposed_update.size()) +
                     " and " + std::to_string(sample_gradient.size()));
  }
  const double denom = exposed_update.norm() * sample_gradient.norm();
  if (denom == 0.0) return 0.0;
  return std::clamp(exposed_update.dot(sample_gradient) / denom, -1.0, 1.0);
}

double MannWhitneyAuc(std::span<const double> member_scores,
                      std::span<const double> non_member_scores) {
  if (member_scores.empty() || non_member_scores.empty()) {
    throw AuditError("AUC needs at least one member and one non-member score");
  }
  // Rank-sum with average ranks for ties.
  struct Item {
    double score;
    bool member;
  };
  std::vector<Item> items;
  items.reserve(member_scores.size() + non_member_scores.size());
  for (double s : member_scores) items.push_back({s, true});
  for (double s : non_member_scores) items.push_back({s, false});
  std::sort(items.begin(), items.end(),
            [](const Item& a, const Item& b) { return a.score < b.score; });
  double member_rank_sum = 0.0;
  for (std::size_t i = 0; i < items.size();) {
    std::size_t j = i;
    std::size_t members = 0;
    while (j < items.size() && items[j].score == items[i].score) {
      members += items[j].member ? 1 : 0;
      ++j;
    }
    const double average_rank = 0.5 * static_cast<double>(i + 1 + j);
    member_rank_sum += average_rank * static_cast<double>(members);
    i = j;
  }
  const double m = static_cast<double>(member_scores.size());
  const double n = static_cast<double>(non_member_scores.size());
  return (member_rank_sum - m * (m + 1.0) / 2.0) / (m * n);
}

MiaRound MiaAttackRound(const ExposedRound& exposed, const AttackSplit& split,
                        const ModelSpec& spec, Strategy strategy,
                        const LabeledDataset& train, const LabeledDataset& test) {
  CheckExposed(exposed);
  const auto& reports = *exposed.reports;
  const Matrix directions = NormalizedUpdates(reports, reports.size());

  MiaRound out;
  out.round = exposed.round;
  out.scores.reserve(split.members.size() + split.non_members.size());

  for (std::size_t start = 0; start < split.members.size();
       start += static_cast<std::size_t>(kGradientChunk)) {
    const std::size_t stop =
        std::min(split.members.size(), start + static_cast<std::size_t>(kGradientChunk));
    std::vector<Index> rows;
    for (std::size_t i = start; i < stop; ++i) rows.push_back(split.members[i].sample);
    const Matrix sims =
        Similarities(spec, *exposed.theta_before, strategy, train.Subset(rows), directions);
    for (std::size_t i = start; i < stop; ++i) {
      const auto& m = split.members[i];
      if (m.client >= reports.size()) throw AuditError("member refers to unknown client");
      out.scores.push_back({true, m.client, m.sample,
                            sims(static_cast<Index>(i - start), static_cast<Index>(m.client))});
    }
  }
  for (std::size_t start = 0; start < split.non_members.size();
       start += static_cast<std::size_t>(kGradientChunk)) {
    const std::size_t stop =
        std::min(split.non_members.size(), start + static_cast<std::size_t>(kGradientChunk));
    std::vector<Index> rows(split.non_members.begin() + static_cast<std::ptrdiff_t>(start),
                            split.non_members.begin() + static_cast<std::ptrdiff_t>(stop));
    const Matrix sims =
        Similarities(spec, *exposed.theta_before, strategy, test.Subset(rows), directions);
    for (std::size_t i = start; i < stop; ++i) {
      out.scores.push_back({false, 0, split.non_members[i],
                            sims.row(static_cast<Index>(i - start)).maxCoeff()});
    }
  }

  std::vector<double> member, non_member;
  for (const auto& s : out.scores) (s.is_member ? member : non_member).push_back(s.score);
  if (!member.empty() && !non_member.empty()) out.auc = MannWhitneyAuc(member, non_member);
  return out;
}

ParameterVector RecoverClientModel(const ParameterVector& theta_before,
                                   const GradientReport& report, double lr,
                                   Strategy strategy) {
  return ApplyUpdate(theta_before, report.update, lr, strategy);
}

int ArgminLoss(std::span<const double> losses) {
  if (losses.empty()) throw ParameterError("argmin of an empty loss list");
  std::size_t best = 0;
  for (std::size_t i = 1; i < losses.size(); ++i) {
    if (losses[i] < losses[best]) best = i;
  }
  return static_cast<int>(best);
}

double AttackSuccessRate(std::span<const int> inferred, std::span<const int> truth) {
  if (inferred.size() != truth.size()) {
    throw ShapeError("ASR: prediction and truth lengths differ");
  }
  if (inferred.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < inferred.size(); ++i) hits += inferred[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(inferred.size());
}

SiaRound SiaAttackRound(const ExposedRound& exposed, const AttackSplit& split,
                        const ModelSpec& spec, Strategy strategy,
                        const LabeledDataset& train, std::span<const int> true_sources) {
  CheckExposed(exposed);
  const auto& reports = *exposed.reports;
  SiaRound out;
  out.round = exposed.round;
  if (split.members.empty()) return out;

  std::vector<Index> rows;
  std::vector<int> truth;
  for (const auto& m : split.members) {
    rows.push_back(m.sample);
    truth.push_back(static_cast<int>(m.client));
  }
  if (!true_sources.empty()) {
    if (true_sources.size() != truth.size()) throw AuditError("true source override has wrong size");
    truth.assign(true_sources.begin(), true_sources.end());
  }
  const LabeledDataset members = train.Subset(rows);
  const std::size_t n_clients = reports.size();
  Matrix losses(static_cast<Index>(n_clients), members.size());
  for (std::size_t n = 0; n < n_clients; ++n) {
    const ParameterVector recovered =
        RecoverClientModel(*exposed.theta_before, ReportOf(reports, n), exposed.lr, strategy);
    losses.row(static_cast<Index>(n)) =
        SampleLosses(spec, recovered, members.features(), members.labels()).transpose();
  }
  out.inferred_sources.resize(split.members.size());
  std::vector<double> column(n_clients);
  for (Index i = 0; i < members.size(); ++i) {
    for (std::size_t n = 0; n < n_clients; ++n) column[n] = losses(static_cast<Index>(n), i);
    out.inferred_sources[static_cast<std::size_t>(i)] = ArgminLoss(column);
  }
  out.asr = AttackSuccessRate(out.inferred_sources, truth);
  return out;
}

AttackReport Audit(const TrainingTrace& trace, const AttackSplit& split,
                   const LabeledDataset& train, const LabeledDataset& test,
                   const AuditOptions& options) {
  const int rounds = trace.rounds_completed();
  if (rounds == 0) throw AuditError("trace has no completed rounds");
  if (static_cast<int>(trace.reports.size()) < rounds) {
    throw AuditError(
        "trace has no gradient-report log; rerun with output.retain_gradients=true");
  }

  // Null audit: one fixed relabeling of the ground truth for every round.
  std::vector<char> member_flags;
  std::vector<int> shuffled_sources;
  if (options.shuffle_ground_truth_seed) {
    Rng rng(DeriveSeed(*options.shuffle_ground_truth_seed, "null-audit"));
    member_flags.assign(split.members.size(), 1);
    member_flags.resize(split.members.size() + split.non_members.size(), 0);
    rng.Shuffle(member_flags.begin(), member_flags.end());
    for (const auto& m : split.members) shuffled_sources.push_back(static_cast<int>(m.client));
    rng.Shuffle(shuffled_sources.begin(), shuffled_sources.end());
  }

  std::vector<MiaRound> mia(static_cast<std::size_t>(rounds));
  std::vector<SiaRound> sia(static_cast<std::size_t>(rounds));
  internal::ParallelFor(static_cast<std::size_t>(rounds), options.workers, [&](std::size_t r) {
    try {
      const ExposedRound exposed{static_cast<int>(r + 1), &trace.snapshots[r],
                                 trace.learning_rates[r], &trace.reports[r]};
      mia[r] = MiaAttackRound(exposed, split, trace.spec, trace.strategy, train, test);
      sia[r] = SiaAttackRound(exposed, split, trace.spec, trace.strategy, train,
                              shuffled_sources);
      if (!member_flags.empty()) {
        std::vector<double> member, non_member;
        for (std::size_t i = 0; i < mia[r].scores.size(); ++i) {
          (member_flags[i] ? member : non_member).push_back(mia[r].scores[i].score);
        }
        mia[r].auc = member.empty() || non_member.empty() ? 0.5
                                                          : MannWhitneyAuc(member, non_member);
      }
    } catch (const Error& e) {
      throw AuditError("round " + std::to_string(r + 1) + ": " + e.what());
    }
  });

  AttackReport report;
  for (int r = 0; r < rounds; ++r) {
    const auto idx = static_cast<std::size_t>(r);
    report.per_round_auc.push_back(mia[idx].auc);
    report.per_round_asr.push_back(sia[idx].asr);
    if (r == 0 || mia[idx].auc > report.best_auc) {
      report.best_auc = mia[idx].auc;
      report.best_auc_round = r + 1;
    }
    if (r == 0 || sia[idx].asr > report.best_asr) {
      report.best_asr = sia[idx].asr;
      report.best_asr_round = r + 1;
      report.inferred_sources = sia[idx].inferred_sources;
    }
  }
  return report;
}

}  // namespace dpfl
