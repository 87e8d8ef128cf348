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

#ifndef DPFL_EXPERIMENT_H_
#define DPFL_EXPERIMENT_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dpfl/analysis.h"
#include "dpfl/attacks.h"
#include "dpfl/config.h"
#include "dpfl/data.h"
#include "dpfl/federation.h"

namespace dpfl {

// Process exit codes of the command-line front-end.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitConfigError = 2,
  kExitTrainingFailure = 3,
  kExitAuditFailure = 4,
  kExitIoError = 5,
};

// Maps an exception thrown by the library to its exit code.
int ExitCodeFor(const std::exception& e);

// Keeps large Eigen temporaries on the heap instead of fresh mmap pages.
// Full-batch passes allocate several megabytes per step; without this the
// kernel spends a third of the run zeroing pages. No-op off glibc.
void ConfigureAllocator();

// Everything a run needs that is derived from the config and master seed.
struct PreparedData {
  TransferPair pair;  // pair.target is the federated training set
  LabeledDataset test;
  ClientPartition partition;
  ModelSpec spec;
};

PreparedData PrepareData(const ExperimentConfig& config);

// Output root from $DPFL_OUTPUT_ROOT, defaulting to "runs".
std::filesystem::path OutputRoot();

// Resolves output.directory: absolute paths are kept, relative ones are
// placed under OutputRoot(), and an empty one becomes OutputRoot()/<hash>.
std::filesystem::path ResolveExperimentDir(const ExperimentConfig& config);

struct RunResult {
  TrainingTrace trace;
  std::optional<AttackReport> attack;
  std::filesystem::path directory;
};

// Executes one experiment and writes its directory:
//   config.json          resolved config (reproduces the run on its own)
//   metrics.csv          one row per round
//   checkpoints/         theta_<round>.ckpt at the configured interval,
//                        always including round 0 and the last round
//   reports.bin          gradient-report log (output.retain_gradients)
//   attack_rounds.csv    per-round AUC/ASR (attack.enabled)
//   attack_summary.csv   best values and their rounds
//   DONE | FAILED        completion marker
// Training failures keep the partial outputs, write FAILED and rethrow as
// TrainingError. Refuses to touch a directory that already holds DONE.
RunResult CmdRun(const ExperimentConfig& config, const std::filesystem::path& directory);

struct SweepCell {
  ExperimentConfig config;
  std::map<std::string, std::string> axes;  // axis path -> value, plus "seed"
  std::string hash;
};

std::vector<SweepCell> ExpandSweep(const SweepSpec& spec);

struct SweepResult {
  std::vector<SweepCell> cells;
  std::vector<bool> ran;     // false when skipped as already complete
  std::vector<bool> failed;
  std::vector<SummaryRow> summary;
};

// Runs every cell under <directory>/cells/<hash>/ (completed cells are
// skipped), then writes summary.csv and trends.csv to <directory>.
SweepResult CmdSweep(const SweepSpec& spec, const std::filesystem::path& directory);

struct AuditCommandOptions {
  std::optional<std::uint64_t> null_seed;  // label-shuffled null audit
  int workers = 1;
};

// Replays the stored trace and writes attack_rounds.csv/attack_summary.csv
// (or null_attack_*.csv for a null audit). Requires reports.bin.
AttackReport CmdAudit(const std::filesystem::path& directory,
                      const AuditCommandOptions& options = {});

struct GapPoint {
  double magnitude = 0.0;
  double gap = 0.0;
};

// For each magnitude: LDA of {source, shifted target} built from the config's
// dataset block; writes projection CSVs and gaps.csv.
std::vector<GapPoint> CmdDomainGap(const ExperimentConfig& config,
                                   const std::vector<double>& magnitudes,
                                   const std::filesystem::path& directory);

// LDA of arbitrary datasets; writes one projection CSV per dataset and the
// pairwise gap table.
DomainGap CmdDomainGapDatasets(const std::vector<LabeledDataset>& datasets,
                               const std::filesystem::path& directory);

// Per-client sizes and class histograms as CSV.
void CmdPartitionInspect(const ExperimentConfig& config, std::ostream& out);

// Metrics CSV exactly as written into an experiment directory.
std::string MetricsCsv(const TrainingTrace& trace);

}  // namespace dpfl

#endif  // DPFL_EXPERIMENT_H_
