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

#ifndef DPFL_PRIVACY_H_
#define DPFL_PRIVACY_H_

#include <cstdint>
#include <optional>
#include <string>

#include "dpfl/common.h"
#include "dpfl/models.h"
#include "dpfl/rng.h"

namespace dpfl {

// Gaussian-mechanism parameters. sigma() is derived on every call from the
// stored fields; an infinite epsilon means "no noise" and an infinite
// clip_norm means "no clipping".
struct PrivacySpec {
  double epsilon = 5.0;
  double delta = 1e-5;
  double clip_norm = 10.0;
  double sampling_prob = 1.0;
  double calib_const = 1.0;
  int total_rounds = 128;

  // Throws ParameterError naming the violated constraint.
  void Validate() const;
  double sigma() const;

  friend bool operator==(const PrivacySpec&, const PrivacySpec&) = default;
};

// sigma = c1 * q * sqrt(T * ln(1 / delta)) / epsilon.
double NoiseScale(const PrivacySpec& spec);

// g / max(1, ||g|| / C).
Vector Clip(const Vector& gradient, double clip_norm);

// Gaussian noise keyed by (master seed, client, round). Two streams with the
// same key produce the same draws regardless of creation order or thread.
class NoiseStream {
 public:
  NoiseStream(std::uint64_t master_seed, int client_id, int round);

  // dim i.i.d. N(0, stddev^2) coordinates.
  Vector Draw(Index dim, double stddev);

 private:
  Rng rng_;
};

// (1/D_n) * sum_i clip_C(g_i) + z with z ~ N(0, sigma^2 / D_n) per coordinate.
// Drawing one vector with variance sigma^2 / D_n is equal in distribution to
// averaging D_n per-sample draws of variance sigma^2.
Vector Privatize(const PerSampleGradients& per_sample, const PrivacySpec& spec,
                 NoiseStream& stream);

// Same mechanism from an already clipped sum over `count` samples.
Vector PrivatizeSum(const Vector& clipped_sum, Index count, double sigma,
                    NoiseStream& stream);

enum class BudgetStatus { kOk, kViolation };

// kViolation iff rounds_executed exceeds the T used for calibration.
BudgetStatus EffectiveBudgetCheck(const PrivacySpec& spec, int rounds_executed);

// One client's exposed update for one round.
struct GradientReport {
  int client_id = 0;
  int round = 0;
  Vector update;      // d coordinates (ST/FT) or |head| coordinates (HT)
  double weight = 0;  // D_n / D
  std::optional<Matrix> audit_trace;  // clipped per-sample gradients, audits only
};

}  // namespace dpfl

#endif  // DPFL_PRIVACY_H_
