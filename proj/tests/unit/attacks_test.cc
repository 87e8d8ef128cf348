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

#include <gtest/gtest.h>

#include <limits>
#include <random>
#include <vector>

#include "dpfl/data.h"
#include "oracles.h"

namespace dpfl {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Brute-force pair counting, the definition the rank formula must match.
double PairCountAuc(const std::vector<double>& m, const std::vector<double>& n) {
  double wins = 0.0;
  for (double a : m) {
    for (double b : n) wins += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
  }
  return wins / static_cast<double>(m.size() * n.size());
}

TEST(AucTest, HandExamples) {
  EXPECT_DOUBLE_EQ(MannWhitneyAuc(std::vector<double>{0.9, 0.2}, std::vector<double>{0.5, 0.1}), 0.75);
  EXPECT_DOUBLE_EQ(MannWhitneyAuc(std::vector<double>{3, 4}, std::vector<double>{1, 2}), 1.0);
  EXPECT_DOUBLE_EQ(MannWhitneyAuc(std::vector<double>{1, 2}, std::vector<double>{3, 4}), 0.0);
  EXPECT_DOUBLE_EQ(MannWhitneyAuc(std::vector<double>{1, 1}, std::vector<double>{1, 1, 1}), 0.5);
  EXPECT_THROW(MannWhitneyAuc(std::vector<double>{}, std::vector<double>{1}), AuditError);
}

TEST(AucTest, MatchesPairCountingWithTies) {
  std::mt19937_64 gen(3);
  std::uniform_int_distribution<int> coarse(0, 6);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> m(1 + trial % 13), n(1 + trial % 7);
    for (double& v : m) v = coarse(gen) * 0.5;
    for (double& v : n) v = coarse(gen) * 0.5;
    EXPECT_NEAR(MannWhitneyAuc(m, n), PairCountAuc(m, n), 1e-12);
    EXPECT_NEAR(MannWhitneyAuc(m, n) + MannWhitneyAuc(n, m), 1.0, 1e-12);
  }
}

TEST(SimilarityTest, Cosine) {
  Vector a(2), b(2);
  a << 1, 0;
  b << 1, 1;
  EXPECT_NEAR(SampleSimilarity(a, b), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_EQ(SampleSimilarity(a, Vector::Zero(2)), 0.0);
  EXPECT_EQ(SampleSimilarity(Vector::Zero(2), b), 0.0);
}

TEST(SiaHelpersTest, ArgminAndAsr) {
  EXPECT_EQ(ArgminLoss(std::vector<double>{0.3, 0.1, 0.1, 0.5}), 1);
  EXPECT_EQ(ArgminLoss(std::vector<double>{2.0}), 0);
  EXPECT_THROW(ArgminLoss(std::vector<double>{}), ParameterError);
  EXPECT_DOUBLE_EQ(AttackSuccessRate(std::vector<int>{0, 1, 2, 2}, std::vector<int>{0, 1, 1, 2}), 0.75);
  EXPECT_THROW(AttackSuccessRate(std::vector<int>{0}, std::vector<int>{0, 1}), ShapeError);
}

TEST(RecoverTest, StepFromExposedUpdate) {
  const ModelSpec s{ModelKind::kMlp1, 3, {2}, 2, Activation::kRelu};
  const ParameterVector theta = InitParams(s, 1, 1.0);
  GradientReport full{0, 1, Vector::Ones(theta.dim()), 1.0, std::nullopt};
  const ParameterVector r = RecoverClientModel(theta, full, 0.5, Strategy::kFT);
  EXPECT_NEAR((theta.values() - r.values()).maxCoeff(), 0.5, 1e-15);
  GradientReport head{0, 1, Vector::Ones(theta.head_range().size()), 1.0, std::nullopt};
  const ParameterVector h = RecoverClientModel(theta, head, 0.5, Strategy::kHT);
  EXPECT_EQ(h.body(), theta.body());
}

// Two clients with disjoint classes and no noise: the recovered client models
// separate the sources cleanly, and members align with their own update.
class TwoClientTrace : public ::testing::Test {
 protected:
  void SetUp() override {
    base_ = std::make_unique<LabeledDataset>(GenerateMixture(4, 6, 60, 5.0, 1));
    const TransferPair pair = MakeTransferPair(*base_, ShiftKind::kRotate, 0.0, 1);
    std::vector<Index> a, b;
    for (Index i = 0; i < base_->size(); ++i) {
      (base_->labels()[static_cast<std::size_t>(i)] < 2 ? a : b).push_back(i);
    }
    partition_ = ClientPartition{{a, b}};
    test_ = std::make_unique<LabeledDataset>(GenerateMixture(4, 6, 30, 5.0, 2));
    spec_ = {ModelKind::kMlp1, 6, {8}, 4, Activation::kRelu};
    FederationConfig config;
    config.num_clients = 2;
    config.total_rounds = 4;
    config.strategy = Strategy::kST;
    config.retain_reports = true;
    PrivacySpec privacy;
    privacy.epsilon = kInf;
    privacy.total_rounds = 4;
    trace_ = dpfl::Run(spec_, pair, *test_, partition_, config, privacy);
    split_ = BuildAttackSplit(partition_, 40, *test_, 60, 3);
  }

  std::unique_ptr<LabeledDataset> base_;
  std::unique_ptr<LabeledDataset> test_;
  ClientPartition partition_;
  ModelSpec spec_;
  TrainingTrace trace_;
  AttackSplit split_;
};

TEST_F(TwoClientTrace, SiaFindsSources) {
  const ExposedRound round{1, &trace_.snapshots[0], trace_.learning_rates[0], &trace_.reports[0]};
  const SiaRound sia = SiaAttackRound(round, split_, spec_, Strategy::kST, *base_);
  EXPECT_EQ(sia.inferred_sources.size(), split_.members.size());
  EXPECT_GT(sia.asr, 0.9);
}

TEST_F(TwoClientTrace, MiaScoresMembersHigher) {
  const ExposedRound round{1, &trace_.snapshots[0], trace_.learning_rates[0], &trace_.reports[0]};
  const MiaRound mia = MiaAttackRound(round, split_, spec_, Strategy::kST, *base_, *test_);
  EXPECT_EQ(mia.scores.size(), split_.members.size() + split_.non_members.size());
  // Members against their own client, non-members against the best client.
  const auto theta = testing::ToFlat(trace_.snapshots[0].values());
  auto cosine = [&](const testing::Flat& g, std::size_t client) {
    const Vector& u = trace_.reports[0][client].update;
    double dot = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) dot += g[j] * u(static_cast<Index>(j));
    return dot / (testing::Norm(g) * testing::Norm(testing::ToFlat(u)));
  };
  std::vector<double> members, non_members;
  for (const auto& s : mia.scores) {
    const LabeledDataset& d = s.is_member ? *base_ : *test_;
    const auto g = testing::RefGradient(spec_, theta, testing::RowToFlat(d.features(), s.sample),
                                        d.labels()[static_cast<std::size_t>(s.sample)]);
    const double expected = s.is_member ? cosine(g, s.client) : std::max(cosine(g, 0), cosine(g, 1));
    EXPECT_NEAR(s.score, expected, 1e-10);
    (s.is_member ? members : non_members).push_back(s.score);
  }
  EXPECT_DOUBLE_EQ(mia.auc, MannWhitneyAuc(members, non_members));
}

TEST_F(TwoClientTrace, AuditBestOverRounds) {
  const AttackReport r = Audit(trace_, split_, *base_, *test_);
  ASSERT_EQ(r.per_round_auc.size(), 4u);
  EXPECT_EQ(r.best_auc, *std::max_element(r.per_round_auc.begin(), r.per_round_auc.end()));
  EXPECT_EQ(r.best_asr, *std::max_element(r.per_round_asr.begin(), r.per_round_asr.end()));
  EXPECT_EQ(r.per_round_asr[static_cast<std::size_t>(r.best_asr_round - 1)], r.best_asr);
  AuditOptions threaded;
  threaded.workers = 3;
  const AttackReport t = Audit(trace_, split_, *base_, *test_, threaded);
  EXPECT_EQ(t.per_round_auc, r.per_round_auc);
  EXPECT_EQ(t.per_round_asr, r.per_round_asr);
}

TEST_F(TwoClientTrace, NullAuditLosesTheSignal) {
  AuditOptions null;
  null.shuffle_ground_truth_seed = 11;
  const AttackReport r = Audit(trace_, split_, *base_, *test_, null);
  EXPECT_LT(r.per_round_asr[0], 0.8);
  EXPECT_EQ(Audit(trace_, split_, *base_, *test_, null).per_round_auc, r.per_round_auc);
}

TEST_F(TwoClientTrace, AuditWithoutReportsFails) {
  TrainingTrace bare = trace_;
  bare.reports.clear();
  try {
    Audit(bare, split_, *base_, *test_);
    FAIL() << "expected AuditError";
  } catch (const AuditError& e) {
    EXPECT_NE(std::string(e.what()).find("retain_gradients"), std::string::npos) << e.what();
  }
}

}  // namespace
}  // namespace dpfl
