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

#ifndef DPFL_CHECKPOINT_H_
#define DPFL_CHECKPOINT_H_

#include <filesystem>
#include <vector>

#include "dpfl/federation.h"
#include "dpfl/models.h"
#include "dpfl/privacy.h"

namespace dpfl {

// Parameter checkpoint, all integers and floats little-endian:
//   "DPFLCKPT" | u32 version=1 | u32 len | descriptor (len bytes, e.g.
//   "mlp1:32-64-10") | u64 d | u64 head_begin | u64 head_end | d x f64
// Reading back yields bit-identical values.
void WriteCheckpoint(const std::filesystem::path& path, const ModelSpec& spec,
                     const ParameterVector& params);

struct Checkpoint {
  ModelSpec spec;
  ParameterVector params;
};

Checkpoint ReadCheckpoint(const std::filesystem::path& path);

// Gradient-report log consumed by the audit:
//   "DPFLRLOG" | u32 version=1 | u32 strategy (0 ST, 1 FT, 2 HT) |
//   u32 num_clients | u32 rounds | u64 dim
//   per round: u32 round | f64 lr | per client: u32 client_id | f64 weight |
//   dim x f64 update
struct ReportLog {
  Strategy strategy = Strategy::kST;
  std::vector<double> learning_rates;
  std::vector<std::vector<GradientReport>> reports;
};

void WriteReportLog(const std::filesystem::path& path, const TrainingTrace& trace);
ReportLog ReadReportLog(const std::filesystem::path& path);

}  // namespace dpfl

#endif  // DPFL_CHECKPOINT_H_
