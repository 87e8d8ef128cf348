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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "dpfl/analysis.h"
#include "dpfl/data.h"

namespace dpfl {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Fixture {
  ModelSpec spec{ModelKind::kMlp1, 4, {6}, 3, Activation::kRelu};
  TransferPair pair;
  LabeledDataset test;
  ClientPartition partition;
  FederationConfig config;
  PrivacySpec privacy;

  explicit Fixture(Strategy strategy, int rounds = 6)
      : pair(MakeTransferPair(GenerateMixture(3, 4, 40, 3.0, 1), ShiftKind::kRotate, 0.5, 2)),
        test(GenerateMixture(3, 4, 10, 3.0, 9)) {
    config.num_clients = 3;
    config.total_rounds = rounds;
    config.strategy = strategy;
    config.pretrain_epochs = 20;
    privacy.total_rounds = rounds;
    partition = DirichletPartition(pair.target, 3, 1.0, 5);
  }

  TrainingTrace Run(const RunOptions& options = {}) const {
    return dpfl::Run(spec, pair, test, partition, config, privacy, options);
  }
};

TEST(StrategyTest, ParseAndScope) {
  for (Strategy s : {Strategy::kST, Strategy::kFT, Strategy::kHT}) {
    EXPECT_EQ(ParseStrategy(ToString(s)), s);
  }
  EXPECT_THROW(ParseStrategy("LT"), ParameterError);
  EXPECT_EQ(ExposedScope(Strategy::kHT), GradientScope::kHead);
  EXPECT_EQ(ExposedScope(Strategy::kFT), GradientScope::kFull);
}

TEST(FederationConfigTest, Validate) {
  FederationConfig c;
  EXPECT_NO_THROW(c.Validate());
  c.lr_decay = 1.5;
  EXPECT_THROW(c.Validate(), ParameterError);
  c = {};
  c.num_clients = 0;
  EXPECT_THROW(c.Validate(), ParameterError);
  c = {};
  c.alpha = -1;
  EXPECT_THROW(c.Validate(), ParameterError);
}

TEST(LearningRateTest, Schedule) {
  FederationConfig c;
  c.lr_init = 0.5;
  c.lr_decay = 0.9934;
  c.total_rounds = 128;
  EXPECT_DOUBLE_EQ(LrAt(c, 0), 0.5);
  EXPECT_NEAR(LrAt(c, 127), 0.5 * std::pow(0.9934, 127), 1e-15);
  EXPECT_THROW(LrAt(c, 128), ParameterError);
  EXPECT_THROW(LrAt(c, -1), ParameterError);
}

TEST(AggregateTest, WeightedSumInIdOrder) {
  std::vector<GradientReport> r(2);
  r[0] = {1, 1, Vector::Constant(2, 4.0), 0.25, std::nullopt};
  r[1] = {0, 1, Vector::Constant(2, 2.0), 0.75, std::nullopt};
  const Vector a = Aggregate(r);
  EXPECT_DOUBLE_EQ(a(0), 0.75 * 2.0 + 0.25 * 4.0);
}

TEST(AggregateTest, Errors) {
  EXPECT_THROW(Aggregate({}), AggregationError);
  std::vector<GradientReport> r(2);
  r[0] = {0, 1, Vector::Zero(2), 0.5, std::nullopt};
  r[1] = {1, 2, Vector::Zero(2), 0.5, std::nullopt};
  EXPECT_THROW(Aggregate(r), AggregationError);  // mixed rounds
  r[1] = {1, 1, Vector::Zero(3), 0.5, std::nullopt};
  EXPECT_THROW(Aggregate(r), AggregationError);  // mixed dimensions
  r[1] = {1, 1, Vector::Zero(2), 0.4, std::nullopt};
  EXPECT_THROW(Aggregate(r), AggregationError);  // weights do not sum to 1
}

TEST(ApplyUpdateTest, HeadOnlyLeavesBodyIdentical) {
  const ModelSpec s{ModelKind::kMlp1, 4, {3}, 2, Activation::kRelu};
  const ParameterVector theta = InitParams(s, 1, 1.0);
  const Index h = theta.head_range().size();
  const ParameterVector next = ApplyUpdate(theta, Vector::Ones(h), 0.1, Strategy::kHT);
  EXPECT_EQ(next.body(), theta.body());
  EXPECT_NEAR((next.head() - theta.head()).maxCoeff(), -0.1, 1e-15);
  EXPECT_THROW(ApplyUpdate(theta, Vector::Ones(theta.dim()), 0.1, Strategy::kHT), ShapeError);
  EXPECT_THROW(ApplyUpdate(theta, Vector::Ones(h), 0.1, Strategy::kFT), ShapeError);
}

TEST(ClientTest, LedgerRejectsExposurePastBudget) {
  Fixture s(Strategy::kFT, 3);
  auto clients = MakeClients(s.pair.target, s.partition, s.privacy);
  const ParameterVector theta = InitParams(s.spec, 1, 1.0);
  auto& c = clients[0];
  for (int t = 1; t <= 3; ++t) c.Update(s.spec, theta, Strategy::kFT, 1, t);
  EXPECT_EQ(c.exposures(), 3);
  EXPECT_THROW(c.Update(s.spec, theta, Strategy::kFT, 1, 4), BudgetViolation);
  EXPECT_EQ(c.exposures(), 3);
  // Shadow updates expose nothing.
  EXPECT_NO_THROW(c.ShadowUpdate(s.spec, theta, Strategy::kFT, 4));
}

TEST(ClientTest, WeightsFollowDataShare) {
  Fixture s(Strategy::kFT);
  const auto clients = MakeClients(s.pair.target, s.partition, s.privacy);
  double total = 0.0;
  for (const auto& c : clients) {
    EXPECT_DOUBLE_EQ(c.weight(), static_cast<double>(c.data().size()) /
                                     static_cast<double>(s.pair.target.size()));
    total += c.weight();
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(ClientTest, HtReportsCoverHeadOnly) {
  Fixture s(Strategy::kHT);
  auto clients = MakeClients(s.pair.target, s.partition, s.privacy);
  const ParameterVector theta = InitParams(s.spec, 1, 1.0);
  const GradientReport r = clients[1].Update(s.spec, theta, Strategy::kHT, 1, 1);
  EXPECT_EQ(r.update.size(), theta.head_range().size());
  EXPECT_EQ(r.client_id, 1);
  EXPECT_EQ(r.round, 1);
}

TEST(InitialParametersTest, StrategyDependent) {
  Fixture st(Strategy::kST), ft(Strategy::kFT), ht(Strategy::kHT);
  const auto a = InitialParameters(st.spec, st.pair, st.config);
  const auto b = InitialParameters(ft.spec, ft.pair, ft.config);
  const auto c = InitialParameters(ht.spec, ht.pair, ht.config);
  EXPECT_EQ(b, c);
  EXPECT_NE(a, b);
  EXPECT_EQ(b, Pretrain(ft.spec, ft.pair.source, ft.config.pretrain_epochs,
                        ft.config.pretrain_lr, DeriveSeed(0, "pretrain")));
}

TEST(PretrainTest, LowersSourceLoss) {
  Fixture s(Strategy::kFT);
  const auto init = InitParams(s.spec, DeriveSeed(0, "pretrain"), 1.0);
  const auto trained = Pretrain(s.spec, s.pair.source, 50, 0.5, DeriveSeed(0, "pretrain"));
  EXPECT_LT(Evaluate(s.spec, trained, s.pair.source).mean_loss,
            Evaluate(s.spec, init, s.pair.source).mean_loss);
  EXPECT_EQ(Pretrain(s.spec, s.pair.source, 0, 0.5, 3), InitParams(s.spec, 3, 1.0));
}

TEST(PretrainTest, DivergenceNamesStep) {
  Fixture s(Strategy::kFT);
  try {
    Pretrain(s.spec, s.pair.source, 200, 1e6, 1);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
  }
}

TEST(RunTest, ShapesOfTrace) {
  Fixture s(Strategy::kFT, 5);
  s.config.twin_run = true;
  s.config.retain_reports = true;
  const TrainingTrace t = s.Run();
  ASSERT_FALSE(t.failure);
  EXPECT_EQ(t.snapshots.size(), 6u);
  EXPECT_EQ(t.twin_snapshots.size(), 6u);
  EXPECT_EQ(t.metrics.size(), 5u);
  EXPECT_EQ(t.reports.size(), 5u);
  EXPECT_EQ(t.reports[0].size(), 3u);
  EXPECT_EQ(t.metrics[0].round, 1);
  EXPECT_FALSE(t.metrics[0].update_cosine);
  EXPECT_TRUE(t.metrics[1].update_cosine);
  for (const auto& m : t.metrics) {
    EXPECT_TRUE(m.kappa);
    EXPECT_DOUBLE_EQ(m.sigma, NoiseScale(s.privacy));
  }
  EXPECT_NEAR(*t.metrics[2].kappa, Kappa(t.snapshots[3], t.twin_snapshots[3]), 0.0);
  EXPECT_NEAR(*t.metrics[2].update_cosine, UpdateCosine(t.aggregates[2], t.aggregates[1]), 0.0);
}

TEST(RunTest, NoiselessTwinCoincides) {
  Fixture s(Strategy::kST, 4);
  s.config.twin_run = true;
  s.privacy.epsilon = kInf;
  const TrainingTrace t = s.Run();
  for (const auto& m : t.metrics) EXPECT_EQ(*m.kappa, 0.0);
}

TEST(RunTest, HtFreezesBody) {
  Fixture s(Strategy::kHT, 6);
  const TrainingTrace t = s.Run();
  for (const auto& snap : t.snapshots) EXPECT_EQ(snap.body(), t.initial().body());
  EXPECT_NE(t.final_params().head(), t.initial().head());
}

TEST(RunTest, ClientOrderAndWorkersDoNotMatter) {
  Fixture s(Strategy::kFT, 5);
  const TrainingTrace base = s.Run();
  EXPECT_EQ(s.Run({{2, 0, 1}}).final_params(), base.final_params());
  s.config.workers = 3;
  EXPECT_EQ(s.Run().final_params(), base.final_params());
  EXPECT_THROW(s.Run({{0, 0, 1}}), ParameterError);
}

TEST(RunTest, SameSeedSameTrace) {
  Fixture s(Strategy::kST, 4);
  const TrainingTrace a = s.Run(), b = s.Run();
  EXPECT_EQ(a.final_params(), b.final_params());
  s.config.master_seed = 1;
  EXPECT_NE(s.Run().final_params(), a.final_params());
}

TEST(RunTest, BudgetExhaustionStopsRun) {
  Fixture s(Strategy::kFT, 5);
  s.privacy.total_rounds = 3;
  const TrainingTrace t = s.Run();
  ASSERT_TRUE(t.failure);
  EXPECT_EQ(t.failure->kind, "budget");
  EXPECT_EQ(t.failure->round, 4);
  EXPECT_EQ(t.rounds_completed(), 3);
}

TEST(RunTest, DivergenceIsRecorded) {
  Fixture s(Strategy::kST, 5);
  s.config.lr_init = 1e200;
  s.privacy.clip_norm = kInf;
  const TrainingTrace t = s.Run();
  ASSERT_TRUE(t.failure);
  EXPECT_EQ(t.failure->kind, "training");
}

TEST(RunTest, RejectsMismatchedPartition) {
  Fixture s(Strategy::kFT);
  s.config.num_clients = 4;
  EXPECT_THROW(s.Run(), ParameterError);
}

}  // namespace
}  // namespace dpfl
