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

#include "dpfl/analysis.h"

#include <algorithm>
#include <cmath>
#include <set>

#include <Eigen/Eigenvalues>

#include "dpfl/federation.h"

namespace dpfl {

double Kappa(const ParameterVector& noisy, const ParameterVector& noise_free) {
  if (!noisy.SameLayout(noise_free)) throw ShapeError("kappa: parameter layouts differ");
  return (noisy.values() - noise_free.values()).norm();
}

double UpdateCosine(const Vector& current, const Vector& previous) {
  if (current.size() != previous.size()) {
    throw ShapeError("update_cosine: dimensions " + std::to_string(current.size()) +
                     " and " + std::to_string(previous.size()));
  }
  const double denom = current.norm() * previous.norm();
  if (denom == 0.0) return 0.0;
  return std::clamp(current.dot(previous) / denom, -1.0, 1.0);
}

double FitGrowth(std::span<const double> kappa_series) {
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < kappa_series.size(); ++i) {
    const double k = kappa_series[i];
    if (!(k > 0.0) || !std::isfinite(k)) continue;
    xs.push_back(std::log(static_cast<double>(i + 1)));
    ys.push_back(std::log(k));
  }
  if (xs.size() < 10) {
    throw NumericError("fit_growth: need at least 10 positive points, have " +
                       std::to_string(xs.size()));
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

DomainGap LdaProject(std::span<const LabeledDataset> datasets) {
  if (datasets.size() < 2) throw ParameterError("lda: need at least two datasets");
  const Index dim = datasets.front().dim();
  for (const auto& d : datasets) {
    if (d.dim() != dim) {
      throw ParameterError("lda: dataset '" + d.name() + "' has " + std::to_string(d.dim()) +
                           " features, expected " + std::to_string(dim));
    }
  }
  const auto k = static_cast<Index>(datasets.size());
  Matrix means(k, dim);
  Index total = 0;
  Vector overall = Vector::Zero(dim);
  for (Index c = 0; c < k; ++c) {
    const auto& x = datasets[static_cast<std::size_t>(c)].features();
    means.row(c) = x.colwise().mean();
    overall += x.colwise().sum().transpose();
    total += x.rows();
  }
  overall /= static_cast<double>(total);

  Eigen::MatrixXd within = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::MatrixXd between = Eigen::MatrixXd::Zero(dim, dim);
  for (Index c = 0; c < k; ++c) {
    const auto& x = datasets[static_cast<std::size_t>(c)].features();
    const Matrix centered = x.rowwise() - means.row(c);
    within.noalias() += centered.transpose() * centered;
    const Vector diff = means.row(c).transpose() - overall;
    between.noalias() += static_cast<double>(x.rows()) * diff * diff.transpose();
  }
  within /= static_cast<double>(total);
  between /= static_cast<double>(total);
  const double ridge = 1e-6 * within.trace() / static_cast<double>(dim);
  if (!(ridge > 0.0)) throw NumericError("lda: within-class scatter is zero");
  within.diagonal().array() += ridge;

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      between, within, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
  if (solver.info() != Eigen::Success) {
    throw NumericError("lda: generalized eigen-decomposition failed (singular scatter)");
  }
  // Eigenvalues ascend; take the last two columns, largest first.
  Eigen::MatrixXd directions = Eigen::MatrixXd::Zero(dim, 2);
  const Index cols = std::min<Index>(2, dim);
  for (Index j = 0; j < cols; ++j) directions.col(j) = solver.eigenvectors().col(dim - 1 - j);

  DomainGap gap;
  gap.centroids.resize(k, 2);
  for (Index c = 0; c < k; ++c) {
    Matrix p = datasets[static_cast<std::size_t>(c)].features() * directions;
    gap.centroids.row(c) = p.colwise().mean();
    gap.projections.push_back(std::move(p));
  }
  gap.pairwise_gaps = Matrix::Zero(k, k);
  double sum = 0.0;
  for (Index a = 0; a < k; ++a) {
    for (Index b = a + 1; b < k; ++b) {
      const double d = (gap.centroids.row(a) - gap.centroids.row(b)).norm();
      gap.pairwise_gaps(a, b) = gap.pairwise_gaps(b, a) = d;
      sum += d;
    }
  }
  gap.gap_statistic = sum / static_cast<double>(k * (k - 1) / 2);
  return gap;
}

double RelativeIncrease(double baseline, double value) {
  if (!(baseline > 0.0)) throw ParameterError("relative_increase: baseline must be > 0");
  return 100.0 * (value - baseline) / baseline;
}

std::vector<SummaryRow> Summarize(const std::vector<SummaryEntry>& entries) {
  std::vector<SummaryRow> rows;
  if (entries.empty()) return rows;
  std::set<std::string> names;
  for (const auto& [name, value] : entries.front().axes) names.insert(name);

  std::map<std::map<std::string, std::string>, std::size_t> index;
  for (const auto& e : entries) {
    std::set<std::string> these;
    for (const auto& [name, value] : e.axes) these.insert(name);
    if (these != names) throw AggregationError("summary entries do not share the same axes");
    auto [it, inserted] = index.emplace(e.axes, rows.size());
    if (inserted) rows.push_back(SummaryRow{e.axes, {}, {}, {}, {}, {}});
    SummaryRow& row = rows[it->second];
    const std::string key = ToString(e.strategy);
    if (row.by_strategy.contains(key)) {
      throw AggregationError("duplicate summary entry for strategy " + key);
    }
    row.by_strategy[key] = StrategyResult{e.best_accuracy, e.best_auc, e.best_asr, e.failed};
  }

  for (auto& row : rows) {
    const auto find = [&](const char* s) -> const StrategyResult* {
      auto it = row.by_strategy.find(s);
      return it == row.by_strategy.end() || it->second.failed ? nullptr : &it->second;
    };
    const StrategyResult* st = find("ST");
    const StrategyResult* ft = find("FT");
    const StrategyResult* ht = find("HT");
    if (ht && ft) row.delta_ht_ft = ht->best_accuracy - ft->best_accuracy;
    if (st && st->best_accuracy > 0.0) {
      if (ft) row.rel_increase_ft = RelativeIncrease(st->best_accuracy, ft->best_accuracy);
      if (ht) row.rel_increase_ht = RelativeIncrease(st->best_accuracy, ht->best_accuracy);
    }
    std::vector<std::pair<std::string, double>> ranked;
    for (const auto& [name, r] : row.by_strategy) {
      if (!r.failed) ranked.emplace_back(name, r.best_accuracy);
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      if (i > 0) row.ordering += ranked[i - 1].second == ranked[i].second ? "=" : ">";
      row.ordering += ranked[i].first;
    }
  }
  return rows;
}

}  // namespace dpfl
