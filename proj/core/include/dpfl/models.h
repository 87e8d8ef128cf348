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

#ifndef DPFL_MODELS_H_
#define DPFL_MODELS_H_

#include <cstdint>
#include <string>
#include <vector>

#include "dpfl/common.h"
#include "dpfl/data.h"

namespace dpfl {

enum class ModelKind { kLinear, kMlp1, kMlp2 };
enum class Activation { kRelu };

std::string ToString(ModelKind kind);
ModelKind ParseModelKind(const std::string& s);

// Fully connected softmax classifier. The last affine layer is the head; the
// hidden layers (if any) are the body.
struct ModelSpec {
  ModelKind kind = ModelKind::kLinear;
  int input_dim = 0;
  std::vector<int> hidden_dims;
  int num_classes = 0;
  Activation activation = Activation::kRelu;

  // Throws ParameterError if the hidden layer count does not match `kind` or
  // any dimension is < 1.
  void Validate() const;

  // Compact text form, e.g. "mlp1:32-64-10". Parsed back by FromDescriptor.
  std::string Descriptor() const;
  static ModelSpec FromDescriptor(const std::string& descriptor);

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

// One named tensor inside the flat parameter vector, stored row-major.
struct LayerSlot {
  std::string name;
  Index rows = 0;
  Index cols = 0;
  Index offset = 0;

  Index size() const { return rows * cols; }
  friend bool operator==(const LayerSlot&, const LayerSlot&) = default;
};

// Flat parameters with their layout. For every affine layer l the layout
// holds "dense<l>.weight" (out x in) followed by "dense<l>.bias" (out x 1);
// the head (last layer's weight and bias) is the trailing contiguous range.
class ParameterVector {
 public:
  ParameterVector() = default;
  ParameterVector(Vector values, std::vector<LayerSlot> layout, IndexRange head);

  // All-zero parameters laid out for `spec`.
  static ParameterVector Zeros(const ModelSpec& spec);

  const Vector& values() const { return values_; }
  Vector& mutable_values() { return values_; }
  const std::vector<LayerSlot>& layout() const { return layout_; }
  IndexRange head_range() const { return head_; }
  IndexRange body_range() const { return {0, head_.begin}; }
  Index dim() const { return values_.size(); }

  auto head() const { return values_.segment(head_.begin, head_.size()); }
  auto body() const { return values_.segment(0, head_.begin); }

  bool SameLayout(const ParameterVector& other) const {
    return layout_ == other.layout_ && head_ == other.head_;
  }

  friend bool operator==(const ParameterVector& a, const ParameterVector& b) {
    return a.SameLayout(b) && a.values_ == b.values_;
  }

 private:
  Vector values_;
  std::vector<LayerSlot> layout_;
  IndexRange head_;
};

// One row per sample, each row a flattened gradient of the cross-entropy
// loss; `losses` holds the per-sample loss values.
struct PerSampleGradients {
  Matrix rows;
  Vector losses;
};

enum class GradientScope { kFull, kHead };

std::string ToString(GradientScope scope);

// Fan-in scaled uniform initialization: weights of layer l are i.i.d.
// U[-scale / sqrt(fan_in_l), scale / sqrt(fan_in_l)], biases zero.
ParameterVector InitParams(const ModelSpec& spec, std::uint64_t seed, double scale);

// Class probabilities, one softmax row per input row.
Matrix Forward(const ModelSpec& spec, const ParameterVector& params,
               const Matrix& features);

// Cross-entropy loss of every sample.
Vector SampleLosses(const ModelSpec& spec, const ParameterVector& params,
                    const Matrix& features, const std::vector<int>& labels);

// Exact per-sample gradients by layer-wise backpropagation.
PerSampleGradients ComputePerSampleGradients(const ModelSpec& spec,
                                             const ParameterVector& params,
                                             const Matrix& features,
                                             const std::vector<int>& labels);

// Head slice of every row (kHead) or the input unchanged (kFull).
PerSampleGradients Restrict(const PerSampleGradients& gradients,
                            IndexRange head_range, GradientScope scope);

// Sum over samples of clip_C(g_i) restricted to `scope`, without forming the
// per-sample gradient matrix. Per-sample norms come from the outer-product
// structure ||delta a^T||^2 = ||delta||^2 ||a||^2 of dense-layer gradients.
// An infinite clip_norm disables clipping.
struct ClippedSum {
  Vector sum;
  Index count = 0;
  Index clipped = 0;   // samples whose norm exceeded clip_norm
  double mean_loss = 0.0;
};

ClippedSum ComputeClippedSum(const ModelSpec& spec, const ParameterVector& params,
                             const Matrix& features, const std::vector<int>& labels,
                             double clip_norm, GradientScope scope);

struct Evaluation {
  double accuracy = 0.0;
  double mean_loss = 0.0;
};

// Argmax accuracy (ties go to the smallest class index) and mean
// cross-entropy.
Evaluation Evaluate(const ModelSpec& spec, const ParameterVector& params,
                    const LabeledDataset& dataset);

}  // namespace dpfl

#endif  // DPFL_MODELS_H_
