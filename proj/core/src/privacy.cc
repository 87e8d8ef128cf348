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

#include "dpfl/privacy.h"

#include <cmath>
#include <limits>

namespace dpfl {

void PrivacySpec::Validate() const {
  if (!(epsilon > 0.0)) throw ParameterError("privacy.epsilon must be > 0");
  if (!(delta > 0.0 && delta < 1.0)) throw ParameterError("privacy.delta must be in (0, 1)");
  if (!(clip_norm > 0.0)) throw ParameterError("privacy.clip_norm must be > 0");
  if (!(sampling_prob > 0.0 && sampling_prob <= 1.0)) {
    throw ParameterError("privacy.sampling_prob must be in (0, 1]");
  }
  if (!(calib_const > 0.0) || !std::isfinite(calib_const)) {
    throw ParameterError("privacy.calib_const must be positive and finite");
  }
  if (total_rounds < 1) throw ParameterError("privacy.total_rounds must be >= 1");
}

double PrivacySpec::sigma() const { return NoiseScale(*this); }

double NoiseScale(const PrivacySpec& spec) {
  spec.Validate();
  if (std::isinf(spec.epsilon)) return 0.0;
  return spec.calib_const * spec.sampling_prob *
         std::sqrt(static_cast<double>(spec.total_rounds) * std::log(1.0 / spec.delta)) /
         spec.epsilon;
}

Vector Clip(const Vector& gradient, double clip_norm) {
  if (!(clip_norm > 0.0)) throw ParameterError("clip_norm must be > 0");
  const double norm = gradient.norm();
  if (!(norm > clip_norm)) return gradient;
  return gradient / (norm / clip_norm);
}

NoiseStream::NoiseStream(std::uint64_t master_seed, int client_id, int round)
    : rng_(DeriveSeed(master_seed, "noise",
                      {static_cast<std::uint64_t>(client_id),
                       static_cast<std::uint64_t>(round)})) {}

Vector NoiseStream::Draw(Index dim, double stddev) {
  Vector z(dim);
  for (Index i = 0; i < dim; ++i) z(i) = stddev * rng_.Gaussian();
  return z;
}

Vector Privatize(const PerSampleGradients& per_sample, const PrivacySpec& spec,
                 NoiseStream& stream) {
  const Index n = per_sample.rows.rows();
  if (n == 0) throw ParameterError("Privatize: no per-sample gradients");
  Vector sum = Vector::Zero(per_sample.rows.cols());
  for (Index i = 0; i < n; ++i) {
    sum += Clip(per_sample.rows.row(i).transpose(), spec.clip_norm);
  }
  return PrivatizeSum(sum, n, NoiseScale(spec), stream);
}

Vector PrivatizeSum(const Vector& clipped_sum, Index count, double sigma,
                    NoiseStream& stream) {
  if (count <= 0) throw ParameterError("PrivatizeSum: count must be positive");
  Vector mean = clipped_sum / static_cast<double>(count);
  if (sigma > 0.0) {
    mean += stream.Draw(mean.size(), sigma / std::sqrt(static_cast<double>(count)));
  }
  return mean;
}

BudgetStatus EffectiveBudgetCheck(const PrivacySpec& spec, int rounds_executed) {
  return rounds_executed > spec.total_rounds ? BudgetStatus::kViolation : BudgetStatus::kOk;
}

}  // namespace dpfl
