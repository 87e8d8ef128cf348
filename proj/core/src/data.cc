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

#include "dpfl/data.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>
#include <string>

#include "dpfl/rng.h"

namespace dpfl {

LabeledDataset::LabeledDataset(Matrix features, std::vector<int> labels,
                               int num_classes, std::string name)
    : features_(std::move(features)),
      labels_(std::move(labels)),
      num_classes_(num_classes),
      name_(std::move(name)) {
  if (num_classes_ < 2) {
    throw ParameterError("dataset '" + name_ + "': num_classes must be >= 2");
  }
  if (features_.rows() == 0) {
    throw ParameterError("dataset '" + name_ + "': no samples");
  }
  if (features_.rows() != static_cast<Index>(labels_.size())) {
    throw ShapeError("dataset '" + name_ + "': " +
                     std::to_string(features_.rows()) + " feature rows but " +
                     std::to_string(labels_.size()) + " labels");
  }
  for (int y : labels_) {
    if (y < 0 || y >= num_classes_) {
      throw ParameterError("dataset '" + name_ + "': label " + std::to_string(y) +
                           " outside [0, " + std::to_string(num_classes_) + ")");
    }
  }
}

LabeledDataset LabeledDataset::Subset(std::span<const Index> rows,
                                      std::string name) const {
  Matrix x(static_cast<Index>(rows.size()), dim());
  std::vector<int> y(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= size()) {
      throw ParameterError("Subset: row " + std::to_string(rows[i]) +
                           " out of range");
    }
    x.row(static_cast<Index>(i)) = features_.row(rows[i]);
    y[i] = labels_[static_cast<std::size_t>(rows[i])];
  }
  return LabeledDataset(std::move(x), std::move(y), num_classes_,
                        name.empty() ? name_ : std::move(name));
}

std::vector<Index> ClientPartition::client_sizes() const {
  std::vector<Index> sizes;
  sizes.reserve(assignments.size());
  for (const auto& a : assignments) sizes.push_back(static_cast<Index>(a.size()));
  return sizes;
}

Index ClientPartition::total() const {
  Index total = 0;
  for (const auto& a : assignments) total += static_cast<Index>(a.size());
  return total;
}

void ClientPartition::Validate(Index dataset_size) const {
  if (assignments.empty()) throw ParameterError("partition has no clients");
  std::vector<char> seen(static_cast<std::size_t>(dataset_size), 0);
  for (std::size_t n = 0; n < assignments.size(); ++n) {
    if (assignments[n].empty()) {
      throw ParameterError("partition: client " + std::to_string(n) + " is empty");
    }
    for (Index i : assignments[n]) {
      if (i < 0 || i >= dataset_size) {
        throw ParameterError("partition: index " + std::to_string(i) +
                             " out of range");
      }
      if (seen[static_cast<std::size_t>(i)]++) {
        throw ParameterError("partition: index " + std::to_string(i) +
                             " assigned twice");
      }
    }
  }
  if (total() != dataset_size) {
    throw ParameterError("partition covers " + std::to_string(total()) + " of " +
                         std::to_string(dataset_size) + " samples");
  }
}

std::string ToString(ShiftKind kind) {
  switch (kind) {
    case ShiftKind::kAffine:
      return "affine";
    case ShiftKind::kRotate:
      return "rotate";
    case ShiftKind::kClassSplit:
      return "class_split";
  }
  return "?";
}

ShiftKind ParseShiftKind(const std::string& s) {
  if (s == "affine") return ShiftKind::kAffine;
  if (s == "rotate") return ShiftKind::kRotate;
  if (s == "class_split") return ShiftKind::kClassSplit;
  throw ParameterError("unknown shift kind '" + s +
                       "' (expected affine, rotate or class_split)");
}

LabeledDataset GenerateMixture(int num_classes, int dim, int samples_per_class,
                               double separation, std::uint64_t seed) {
  if (num_classes < 2) throw ParameterError("GenerateMixture: num_classes must be >= 2");
  if (dim < 2) throw ParameterError("GenerateMixture: dim must be >= 2");
  if (samples_per_class < 1) {
    throw ParameterError("GenerateMixture: samples_per_class must be >= 1");
  }
  if (!(separation >= 0.0) || !std::isfinite(separation)) {
    throw ParameterError("GenerateMixture: separation must be finite and >= 0");
  }

  Matrix means = Matrix::Zero(num_classes, dim);
  if (dim >= num_classes) {
    for (int k = 0; k < num_classes; ++k) means(k, k) = separation / std::sqrt(2.0);
  } else {
    const double radius =
        separation / (2.0 * std::sin(std::numbers::pi / num_classes));
    for (int k = 0; k < num_classes; ++k) {
      const double angle = 2.0 * std::numbers::pi * k / num_classes;
      means(k, 0) = radius * std::cos(angle);
      means(k, 1) = radius * std::sin(angle);
    }
  }

  Rng rng(DeriveSeed(seed, "mixture"));
  const Index n = static_cast<Index>(num_classes) * samples_per_class;
  Matrix x(n, dim);
  std::vector<int> y(static_cast<std::size_t>(n));
  Index row = 0;
  for (int k = 0; k < num_classes; ++k) {
    for (int s = 0; s < samples_per_class; ++s, ++row) {
      for (int j = 0; j < dim; ++j) x(row, j) = means(k, j) + rng.Gaussian();
      y[static_cast<std::size_t>(row)] = k;
    }
  }
  return LabeledDataset(std::move(x), std::move(y), num_classes, "mixture");
}

TransferPair MakeTransferPair(const LabeledDataset& base, ShiftKind kind,
                              double magnitude, std::uint64_t seed) {
  if (!(magnitude >= 0.0) || !std::isfinite(magnitude)) {
    throw ParameterError("MakeTransferPair: magnitude must be finite and >= 0");
  }
  const ShiftDescriptor shift{kind, magnitude, seed};
  const Index dim = base.dim();

  switch (kind) {
    case ShiftKind::kAffine: {
      Matrix x = base.features();
      if (magnitude > 0.0) {
        Rng rng(DeriveSeed(seed, "affine"));
        Matrix a = Matrix::Identity(dim, dim);
        const double scale = magnitude / std::sqrt(static_cast<double>(dim));
        for (Index i = 0; i < dim; ++i)
          for (Index j = 0; j < dim; ++j) a(i, j) += scale * rng.Gaussian();
        Vector b(dim);
        for (Index j = 0; j < dim; ++j) b(j) = magnitude * rng.Gaussian();
        // Rows are samples: x_row -> A x_row + b.
        x = base.features() * a.transpose();
        x.rowwise() += b.transpose();
      }
      return {base, LabeledDataset(std::move(x), base.labels(), base.num_classes(),
                                   base.name() + "/affine"),
              shift};
    }
    case ShiftKind::kRotate: {
      Matrix x = base.features();
      if (magnitude > 0.0) {
        const double c = std::cos(magnitude);
        const double s = std::sin(magnitude);
        for (Index j = 0; j + 1 < dim; j += 2) {
          for (Index i = 0; i < x.rows(); ++i) {
            const double u = base.features()(i, j);
            const double v = base.features()(i, j + 1);
            x(i, j) = c * u - s * v;
            x(i, j + 1) = s * u + c * v;
          }
        }
      }
      return {base, LabeledDataset(std::move(x), base.labels(), base.num_classes(),
                                   base.name() + "/rotate"),
              shift};
    }
    case ShiftKind::kClassSplit: {
      const int k = base.num_classes();
      if (k < 4) throw ParameterError("class_split requires at least 4 classes");
      const int half = k / 2;
      std::vector<Index> src_rows, tgt_rows;
      for (Index i = 0; i < base.size(); ++i) {
        (base.labels()[static_cast<std::size_t>(i)] < half ? src_rows : tgt_rows)
            .push_back(i);
      }
      if (src_rows.empty() || tgt_rows.empty()) {
        throw ParameterError("class_split: one side of the split has no samples");
      }
      const LabeledDataset src_full = base.Subset(src_rows);
      LabeledDataset src(src_full.features(), src_full.labels(), half, base.name() + "/source");
      LabeledDataset tgt_full = base.Subset(tgt_rows);
      std::vector<int> y = tgt_full.labels();
      for (int& label : y) label -= half;
      return {src,
              LabeledDataset(tgt_full.features(), std::move(y), k - half,
                             base.name() + "/class_split"),
              shift};
    }
  }
  throw ParameterError("MakeTransferPair: unknown shift kind");
}

ClientPartition DirichletPartition(const LabeledDataset& dataset, int num_clients,
                                   double alpha, std::uint64_t seed) {
  if (num_clients < 1) throw ParameterError("DirichletPartition: num_clients must be >= 1");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw ParameterError("DirichletPartition: alpha must be positive and finite");
  }
  if (dataset.size() < num_clients) {
    throw ParameterError("DirichletPartition: " + std::to_string(dataset.size()) +
                         " samples cannot cover " + std::to_string(num_clients) +
                         " clients");
  }
  Rng rng(DeriveSeed(seed, "dirichlet"));
  const auto n_clients = static_cast<std::size_t>(num_clients);
  ClientPartition partition;
  partition.assignments.resize(n_clients);

  std::vector<std::vector<Index>> by_class(static_cast<std::size_t>(dataset.num_classes()));
  for (Index i = 0; i < dataset.size(); ++i) {
    by_class[static_cast<std::size_t>(dataset.labels()[static_cast<std::size_t>(i)])]
        .push_back(i);
  }
  for (auto& rows : by_class) {
    if (rows.empty()) continue;
    rng.Shuffle(rows.begin(), rows.end());
    const std::vector<double> p = rng.Dirichlet(alpha, n_clients);
    // Cut points from the cumulative proportions.
    double cumulative = 0.0;
    std::size_t start = 0;
    for (std::size_t n = 0; n < n_clients; ++n) {
      cumulative += p[n];
      std::size_t stop =
          n + 1 == n_clients
              ? rows.size()
              : static_cast<std::size_t>(std::llround(cumulative * static_cast<double>(rows.size())));
      stop = std::clamp(stop, start, rows.size());
      auto& dst = partition.assignments[n];
      dst.insert(dst.end(), rows.begin() + static_cast<std::ptrdiff_t>(start),
                 rows.begin() + static_cast<std::ptrdiff_t>(stop));
      start = stop;
    }
  }

  for (std::size_t n = 0; n < n_clients; ++n) {
    if (!partition.assignments[n].empty()) continue;
    auto largest = std::max_element(
        partition.assignments.begin(), partition.assignments.end(),
        [](const auto& a, const auto& b) { return a.size() < b.size(); });
    partition.assignments[n].push_back(largest->back());
    largest->pop_back();
  }
  for (auto& a : partition.assignments) std::sort(a.begin(), a.end());
  return partition;
}

double ClassProportionDeviation(const LabeledDataset& dataset,
                                const ClientPartition& partition) {
  const auto k = static_cast<std::size_t>(dataset.num_classes());
  std::vector<double> global(k, 0.0);
  for (int y : dataset.labels()) global[static_cast<std::size_t>(y)] += 1.0;
  for (auto& g : global) g /= static_cast<double>(dataset.size());

  double total = 0.0;
  for (const auto& rows : partition.assignments) {
    std::vector<double> local(k, 0.0);
    for (Index i : rows) local[static_cast<std::size_t>(dataset.labels()[static_cast<std::size_t>(i)])] += 1.0;
    double worst = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      worst = std::max(worst, std::abs(local[c] / static_cast<double>(rows.size()) - global[c]));
    }
    total += worst;
  }
  return total / static_cast<double>(partition.num_clients());
}

AttackSplit BuildAttackSplit(const ClientPartition& partition, int per_client,
                             const LabeledDataset& test_set, int non_member_count,
                             std::uint64_t seed) {
  if (per_client < 0 || non_member_count < 0) {
    throw ParameterError("BuildAttackSplit: counts must be non-negative");
  }
  for (std::size_t n = 0; n < partition.num_clients(); ++n) {
    if (partition.client_size(n) < per_client) {
      throw ParameterError("BuildAttackSplit: per_client=" + std::to_string(per_client) +
                           " exceeds client " + std::to_string(n) + " size " +
                           std::to_string(partition.client_size(n)));
    }
  }
  if (non_member_count > test_set.size()) {
    throw ParameterError("BuildAttackSplit: non_member_count=" +
                         std::to_string(non_member_count) + " exceeds test set size " +
                         std::to_string(test_set.size()));
  }
  Rng rng(DeriveSeed(seed, "attack-split"));
  AttackSplit split;
  for (std::size_t n = 0; n < partition.num_clients(); ++n) {
    std::vector<Index> rows = partition.assignments[n];
    rng.Shuffle(rows.begin(), rows.end());
    rows.resize(static_cast<std::size_t>(per_client));
    std::sort(rows.begin(), rows.end());
    for (Index r : rows) split.members.push_back({n, r});
  }
  std::vector<Index> test_rows(static_cast<std::size_t>(test_set.size()));
  std::iota(test_rows.begin(), test_rows.end(), Index{0});
  rng.Shuffle(test_rows.begin(), test_rows.end());
  test_rows.resize(static_cast<std::size_t>(non_member_count));
  std::sort(test_rows.begin(), test_rows.end());
  split.non_members = std::move(test_rows);
  return split;
}

std::pair<LabeledDataset, LabeledDataset> TrainTestSplit(
    const LabeledDataset& dataset, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ParameterError("TrainTestSplit: test_fraction must be in (0, 1)");
  }
  std::vector<Index> rows(static_cast<std::size_t>(dataset.size()));
  std::iota(rows.begin(), rows.end(), Index{0});
  Rng rng(DeriveSeed(seed, "train-test"));
  rng.Shuffle(rows.begin(), rows.end());
  const auto n_test = static_cast<std::size_t>(
      std::llround(test_fraction * static_cast<double>(rows.size())));
  if (n_test == 0 || n_test >= rows.size()) {
    throw ParameterError("TrainTestSplit: split leaves an empty side");
  }
  std::vector<Index> test(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<Index> train(rows.begin() + static_cast<std::ptrdiff_t>(n_test), rows.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return {dataset.Subset(train, dataset.name() + "/train"),
          dataset.Subset(test, dataset.name() + "/test")};
}

}  // namespace dpfl
