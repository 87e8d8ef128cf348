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

#ifndef DPFL_CONFIG_H_
#define DPFL_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "dpfl/data.h"
#include "dpfl/federation.h"
#include "dpfl/models.h"
#include "dpfl/privacy.h"

namespace dpfl {

// Where the federated data comes from. "mixture" generates a Gaussian
// mixture from the master seed; "idx" loads IDX files (and splits off a test
// set unless test files are given).
struct DatasetConfig {
  std::string source = "mixture";
  int num_classes = 10;
  int dim = 32;
  int samples_per_class = 1000;
  double separation = 4.0;
  std::string images;
  std::string labels;
  std::string test_images;
  std::string test_labels;
  double test_fraction = 0.2;
  ShiftKind shift_kind = ShiftKind::kRotate;
  double shift_magnitude = 1.2;

  friend bool operator==(const DatasetConfig&, const DatasetConfig&) = default;
};

// input_dim and num_classes follow from the data.
struct ModelConfig {
  ModelKind kind = ModelKind::kMlp1;
  std::vector<int> hidden_dims = {64};

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct AttackConfig {
  bool enabled = false;
  int per_client = 200;
  int non_member_count = 2000;

  friend bool operator==(const AttackConfig&, const AttackConfig&) = default;
};

struct OutputConfig {
  std::string directory;
  int checkpoint_interval = 0;  // 0: only the first and last round
  bool retain_gradients = false;

  friend bool operator==(const OutputConfig&, const OutputConfig&) = default;
};

// privacy.total_rounds always equals federation.total_rounds.
struct ExperimentConfig {
  DatasetConfig dataset;
  ModelConfig model;
  FederationConfig federation;
  PrivacySpec privacy;
  AttackConfig attack;
  OutputConfig output;

  void Validate() const;
  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// Parses and validates a JSON config. Missing keys take their defaults;
// unknown keys, type mismatches and invariant violations raise ConfigError
// naming the dotted key path. Numbers may be given as the string "inf" where
// infinity is meaningful (privacy.epsilon, privacy.clip_norm).
ExperimentConfig ParseConfig(const std::string& json_text,
                             const std::vector<std::string>& overrides = {});
ExperimentConfig ParseConfigFile(const std::filesystem::path& path,
                                 const std::vector<std::string>& overrides = {});

// Fully resolved config (every key written) as pretty JSON.
std::string SerializeConfig(const ExperimentConfig& config);

// Stable 16-hex-digit identity of everything except the output block.
std::string ConfigHash(const ExperimentConfig& config);

// Sets dotted key `path` (e.g. "privacy.epsilon") inside a JSON document
// given as text. `value` is parsed as JSON when possible, else taken as a
// string.
std::string ApplyOverride(const std::string& json_text, const std::string& path,
                          const std::string& value);

struct SweepAxis {
  std::string path;                 // dotted config key
  std::vector<std::string> values;  // JSON literals
};

struct SweepSpec {
  ExperimentConfig base;
  std::string base_json;
  std::vector<SweepAxis> axes;
  std::vector<std::uint64_t> seeds = {0};
  int max_cells = 1000;
  int workers = 1;
};

// {"base": {...}, "axes": {"epsilon": [1, 3], "federation.strategy": [...]},
//  "seeds": [...], "max_cells": n, "workers": n}
// Axis names are dotted paths or one of the aliases epsilon, total_rounds,
// num_clients, alpha, strategy, model_kind.
SweepSpec ParseSweepSpec(const std::string& json_text);
SweepSpec ParseSweepSpecFile(const std::filesystem::path& path);

}  // namespace dpfl

#endif  // DPFL_CONFIG_H_
