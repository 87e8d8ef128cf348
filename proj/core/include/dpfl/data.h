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

#ifndef DPFL_DATA_H_
#define DPFL_DATA_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dpfl/common.h"

namespace dpfl {

// Feature matrix plus class labels. Rows are samples.
//
// Construction validates: rows == labels, at least one sample, at least two
// classes, every label in [0, num_classes).
class LabeledDataset {
 public:
  LabeledDataset(Matrix features, std::vector<int> labels, int num_classes,
                 std::string name = {});

  const Matrix& features() const { return features_; }
  const std::vector<int>& labels() const { return labels_; }
  int num_classes() const { return num_classes_; }
  const std::string& name() const { return name_; }
  Index size() const { return features_.rows(); }
  Index dim() const { return features_.cols(); }

  // Copies the given rows, in order.
  LabeledDataset Subset(std::span<const Index> rows, std::string name = {}) const;

  friend bool operator==(const LabeledDataset& a, const LabeledDataset& b) {
    return a.num_classes_ == b.num_classes_ && a.labels_ == b.labels_ &&
           a.features_ == b.features_;
  }

 private:
  Matrix features_;
  std::vector<int> labels_;
  int num_classes_;
  std::string name_;
};

// Per-client sample assignment. Indices refer to rows of the partitioned
// dataset.
struct ClientPartition {
  std::vector<std::vector<Index>> assignments;

  std::size_t num_clients() const { return assignments.size(); }
  Index client_size(std::size_t n) const {
    return static_cast<Index>(assignments[n].size());
  }
  std::vector<Index> client_sizes() const;
  Index total() const;

  // Throws ParameterError unless the lists are disjoint, non-empty, and cover
  // exactly [0, dataset_size).
  void Validate(Index dataset_size) const;
};

enum class ShiftKind { kAffine, kRotate, kClassSplit };

std::string ToString(ShiftKind kind);
ShiftKind ParseShiftKind(const std::string& s);

struct ShiftDescriptor {
  ShiftKind kind = ShiftKind::kRotate;
  double magnitude = 0.0;
  std::uint64_t seed = 0;
};

struct TransferPair {
  LabeledDataset source;
  LabeledDataset target;
  ShiftDescriptor shift;
};

// A member is (client index, row of the partitioned training set).
struct MemberRef {
  std::size_t client = 0;
  Index sample = 0;
  friend bool operator==(const MemberRef&, const MemberRef&) = default;
};

struct AttackSplit {
  std::vector<MemberRef> members;
  std::vector<Index> non_members;  // rows of the held-out test set
};

// Isotropic Gaussian mixture with unit within-class variance. When
// dim >= num_classes the class means are (separation / sqrt(2)) * e_k, so every
// pair of means is exactly `separation` apart; otherwise the means sit on a
// regular polygon in the first two coordinates with adjacent means
// `separation` apart. Rows are grouped by class.
LabeledDataset GenerateMixture(int num_classes, int dim, int samples_per_class,
                               double separation, std::uint64_t seed);

// Reads an IDX image file (magic 0x00000803) and label file (0x00000801).
// Pixels are scaled to [0, 1] by dividing by 255.
LabeledDataset LoadIdx(const std::filesystem::path& images_path,
                       const std::filesystem::path& labels_path);

// Writes features (quantized to bytes via round(255 * clamp(x, 0, 1))) and
// labels as IDX. Images are written with dims (N, 1, dim).
void WriteIdx(const LabeledDataset& dataset,
              const std::filesystem::path& images_path,
              const std::filesystem::path& labels_path);

// source = base, target = shifted copy of base.
//   affine:      x -> A x + b, A = I + magnitude * G / sqrt(dim), b = magnitude * h
//                with G, h standard Gaussian (seeded)
//   rotate:      rotation by `magnitude` radians in each consecutive coordinate
//                plane (0,1), (2,3), ...
//   class_split: source keeps classes [0, K/2), target takes [K/2, K) relabeled
//                from 0; magnitude is ignored. Requires K >= 4.
TransferPair MakeTransferPair(const LabeledDataset& base, ShiftKind kind,
                              double magnitude, std::uint64_t seed);

// Class-wise Dirichlet partition: for every class, client proportions are
// drawn from Dirichlet(alpha * 1_N) and the class's (shuffled) samples are
// cut accordingly. Empty clients receive single samples moved from the
// currently largest client.
ClientPartition DirichletPartition(const LabeledDataset& dataset, int num_clients,
                                   double alpha, std::uint64_t seed);

// Mean over clients of max_k |p_n(k) - p(k)|, where p_n is client n's class
// histogram and p the global one.
double ClassProportionDeviation(const LabeledDataset& dataset,
                                const ClientPartition& partition);

// Samples `per_client` members uniformly without replacement from every
// client and `non_member_count` rows of the test set.
AttackSplit BuildAttackSplit(const ClientPartition& partition, int per_client,
                             const LabeledDataset& test_set, int non_member_count,
                             std::uint64_t seed);

// Deterministic train/test split: a seeded permutation, the first
// round(test_fraction * n) rows go to the test set.
std::pair<LabeledDataset, LabeledDataset> TrainTestSplit(
    const LabeledDataset& dataset, double test_fraction, std::uint64_t seed);

}  // namespace dpfl

#endif  // DPFL_DATA_H_
