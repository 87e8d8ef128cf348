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


// Test-side reference implementations. Everything here is written with plain
// loops over std::vector and shares no code with the library beyond the
// documented parameter layout, so agreement is evidence, not tautology.

#ifndef DPFL_TESTS_SUPPORT_ORACLES_H_
#define DPFL_TESTS_SUPPORT_ORACLES_H_

#include <cstdint>
#include <vector>

#include "dpfl/models.h"

namespace dpfl::testing {

using Flat = std::vector<double>;

// Cross-entropy of one sample. Layer l's weight is (out x in) row-major,
// followed by its bias; hidden layers use ReLU.
double RefLoss(const ModelSpec& spec, const Flat& params, const Flat& x, int label);

// Gradient of RefLoss by hand-written backprop.
Flat RefGradient(const ModelSpec& spec, const Flat& params, const Flat& x, int label);

// Central differences of RefLoss with step h.
Flat FiniteDifference(const ModelSpec& spec, const Flat& params, const Flat& x, int label,
                      double h);

// Full-batch gradient descent with the given per-step learning rates.
// Returns theta_0 .. theta_T.
std::vector<Flat> RefGradientDescent(const ModelSpec& spec, const Flat& init,
                                     const std::vector<Flat>& xs,
                                     const std::vector<int>& labels,
                                     const std::vector<double>& lrs);

Flat ToFlat(const Vector& v);
Flat RowToFlat(const Matrix& m, Index row);

double Norm(const Flat& v);

// Class-wise Dirichlet partition simulated directly with <random>: for each
// of K balanced classes the client shares are Dir(alpha * 1_N) and counts are
// the real-valued expectation. Returns mean_n max_k |p_n(k) - 1/K|.
double DirectDirichletDeviation(int num_clients, int num_classes, double alpha,
                                std::uint64_t seed);

}  // namespace dpfl::testing

#endif  // DPFL_TESTS_SUPPORT_ORACLES_H_
