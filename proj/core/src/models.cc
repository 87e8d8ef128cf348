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

#include "dpfl/models.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "dpfl/rng.h"

namespace dpfl {
namespace {

using ConstMatrixMap = Eigen::Map<const Matrix>;

std::vector<int> LayerWidths(const ModelSpec& spec) {
  std::vector<int> widths{spec.input_dim};
  widths.insert(widths.end(), spec.hidden_dims.begin(), spec.hidden_dims.end());
  widths.push_back(spec.num_classes);
  return widths;
}

std::vector<LayerSlot> MakeLayout(const ModelSpec& spec, IndexRange* head) {
  spec.Validate();
  const std::vector<int> widths = LayerWidths(spec);
  std::vector<LayerSlot> layout;
  Index offset = 0;
  const std::size_t num_layers = widths.size() - 1;
  for (std::size_t l = 0; l < num_layers; ++l) {
    const Index in = widths[l];
    const Index out = widths[l + 1];
    if (l + 1 == num_layers) head->begin = offset;
    layout.push_back({"dense" + std::to_string(l) + ".weight", out, in, offset});
    offset += out * in;
    layout.push_back({"dense" + std::to_string(l) + ".bias", out, 1, offset});
    offset += out;
  }
  head->end = offset;
  return layout;
}

void CheckShapes(const ModelSpec& spec, const ParameterVector& params,
                 const Matrix& features) {
  if (features.cols() != spec.input_dim) {
    throw ShapeError("model expects " + std::to_string(spec.input_dim) +
                     " input features, got " + std::to_string(features.cols()));
  }
  IndexRange head;
  if (MakeLayout(spec, &head) != params.layout() || head != params.head_range()) {
    throw ShapeError("parameter layout does not match model " + spec.Descriptor());
  }
}

void CheckLabels(const ModelSpec& spec, const Matrix& features,
                 const std::vector<int>& labels) {
  if (static_cast<Index>(labels.size()) != features.rows()) {
    throw ShapeError("batch has " + std::to_string(features.rows()) + " rows but " +
                     std::to_string(labels.size()) + " labels");
  }
  for (int y : labels) {
    if (y < 0 || y >= spec.num_classes) {
      throw ShapeError("label " + std::to_string(y) + " outside model head of size " +
                       std::to_string(spec.num_classes));
    }
  }
}

// Activations of every layer input plus the output logits. The first input
// is the caller's feature matrix, referenced rather than copied.
struct ForwardPass {
  const Matrix* features = nullptr;
  std::vector<Matrix> hidden;  // hidden[l] = post-activation output of layer l
  Matrix logits;

  const Matrix& input(std::size_t l) const { return l == 0 ? *features : hidden[l - 1]; }
};

ForwardPass RunForward(const ParameterVector& params, const Matrix& features) {
  const auto& layout = params.layout();
  const std::size_t num_layers = layout.size() / 2;
  ForwardPass pass;
  pass.features = &features;
  pass.hidden.reserve(num_layers - 1);
  for (std::size_t l = 0; l < num_layers; ++l) {
    const LayerSlot& w = layout[2 * l];
    const LayerSlot& b = layout[2 * l + 1];
    ConstMatrixMap weight(params.values().data() + w.offset, w.rows, w.cols);
    Eigen::Map<const Eigen::RowVectorXd> bias(params.values().data() + b.offset, b.rows);
    Matrix z(pass.input(l).rows(), w.rows);
    z.noalias() = pass.input(l) * weight.transpose();
    z.rowwise() += bias;
    if (l + 1 == num_layers) {
      pass.logits = std::move(z);
    } else {
      z = z.cwiseMax(0.0);
      pass.hidden.push_back(std::move(z));
    }
  }
  return pass;
}

// Softmax probabilities and per-row log-sum-exp of the logits.
void Softmax(const Matrix& logits, Matrix* probs, Vector* log_norm) {
  *probs = Matrix(logits.rows(), logits.cols());
  *log_norm = Vector(logits.rows());
  for (Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    double total = 0.0;
    for (Index k = 0; k < logits.cols(); ++k) {
      const double e = std::exp(logits(i, k) - m);
      (*probs)(i, k) = e;
      total += e;
    }
    probs->row(i) /= total;
    (*log_norm)(i) = m + std::log(total);
  }
}

// Errors w.r.t. the pre-activation output of every affine layer, from the
// top down; deltas[l] belongs to layer l. Layers below `lowest` are skipped.
std::vector<Matrix> Backward(const ParameterVector& params, const ForwardPass& pass,
                             const Matrix& probs, const std::vector<int>& labels,
                             std::size_t lowest) {
  const auto& layout = params.layout();
  const std::size_t num_layers = layout.size() / 2;
  std::vector<Matrix> deltas(num_layers);
  Matrix delta = probs;
  for (Index i = 0; i < delta.rows(); ++i) delta(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
  for (std::size_t l = num_layers; l-- > lowest;) {
    if (l > lowest) {
      const LayerSlot& w = layout[2 * l];
      ConstMatrixMap weight(params.values().data() + w.offset, w.rows, w.cols);
      Matrix below(delta.rows(), w.cols);
      below.noalias() = delta * weight;
      below = (pass.input(l).array() > 0.0).select(below, 0.0);
      deltas[l] = std::move(delta);
      delta = std::move(below);
    } else {
      deltas[l] = std::move(delta);
    }
  }
  return deltas;
}

}  // namespace

std::string ToString(ModelKind kind) {
  switch (kind) {
    case ModelKind::kLinear:
      return "linear";
    case ModelKind::kMlp1:
      return "mlp1";
    case ModelKind::kMlp2:
      return "mlp2";
  }
  return "?";
}

ModelKind ParseModelKind(const std::string& s) {
  if (s == "linear") return ModelKind::kLinear;
  if (s == "mlp1") return ModelKind::kMlp1;
  if (s == "mlp2") return ModelKind::kMlp2;
  throw ParameterError("unknown model kind '" + s + "' (expected linear, mlp1 or mlp2)");
}

std::string ToString(GradientScope scope) {
  return scope == GradientScope::kHead ? "head" : "full";
}

void ModelSpec::Validate() const {
  const std::size_t expected = kind == ModelKind::kLinear ? 0 : kind == ModelKind::kMlp1 ? 1 : 2;
  if (hidden_dims.size() != expected) {
    throw ParameterError(ToString(kind) + " model needs exactly " +
                         std::to_string(expected) + " hidden layer(s), got " +
                         std::to_string(hidden_dims.size()));
  }
  if (input_dim < 1) throw ParameterError("model input_dim must be >= 1");
  if (num_classes < 2) throw ParameterError("model num_classes must be >= 2");
  for (int h : hidden_dims) {
    if (h < 1) throw ParameterError("model hidden dims must be >= 1");
  }
}

std::string ModelSpec::Descriptor() const {
  std::ostringstream out;
  out << ToString(kind) << ':' << input_dim;
  for (int h : hidden_dims) out << '-' << h;
  out << '-' << num_classes;
  return out.str();
}

ModelSpec ModelSpec::FromDescriptor(const std::string& descriptor) {
  const auto colon = descriptor.find(':');
  if (colon == std::string::npos) {
    throw FormatError("model descriptor '" + descriptor + "' lacks ':'");
  }
  ModelSpec spec;
  spec.kind = ParseModelKind(descriptor.substr(0, colon));
  std::vector<int> widths;
  std::istringstream in(descriptor.substr(colon + 1));
  std::string part;
  while (std::getline(in, part, '-')) {
    try {
      widths.push_back(std::stoi(part));
    } catch (const std::exception&) {
      throw FormatError("model descriptor '" + descriptor + "' has a bad width");
    }
  }
  if (widths.size() < 2) throw FormatError("model descriptor '" + descriptor + "' too short");
  spec.input_dim = widths.front();
  spec.num_classes = widths.back();
  spec.hidden_dims.assign(widths.begin() + 1, widths.end() - 1);
  spec.Validate();
  return spec;
}

ParameterVector::ParameterVector(Vector values, std::vector<LayerSlot> layout,
                                 IndexRange head)
    : values_(std::move(values)), layout_(std::move(layout)), head_(head) {
  Index offset = 0;
  for (const auto& slot : layout_) {
    if (slot.offset != offset) throw ShapeError("layout slots do not tile the vector");
    offset += slot.size();
  }
  if (offset != values_.size() || values_.size() == 0) {
    throw ShapeError("layout covers " + std::to_string(offset) + " of " +
                     std::to_string(values_.size()) + " parameters");
  }
  if (head_.begin < 0 || head_.end != values_.size() || head_.size() <= 0) {
    throw ShapeError("head range must be a non-empty suffix of the parameters");
  }
}

ParameterVector ParameterVector::Zeros(const ModelSpec& spec) {
  IndexRange head;
  auto layout = MakeLayout(spec, &head);
  return ParameterVector(Vector::Zero(head.end), std::move(layout), head);
}

ParameterVector InitParams(const ModelSpec& spec, std::uint64_t seed, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw ParameterError("InitParams: scale must be positive and finite");
  }
  ParameterVector params = ParameterVector::Zeros(spec);
  Rng rng(DeriveSeed(seed, "init"));
  Vector& v = params.mutable_values();
  for (std::size_t s = 0; s < params.layout().size(); s += 2) {
    const LayerSlot& w = params.layout()[s];
    const double bound = scale / std::sqrt(static_cast<double>(w.cols));
    for (Index i = 0; i < w.size(); ++i) v(w.offset + i) = rng.Uniform(-bound, bound);
  }
  return params;
}

Matrix Forward(const ModelSpec& spec, const ParameterVector& params,
               const Matrix& features) {
  CheckShapes(spec, params, features);
  const ForwardPass pass = RunForward(params, features);
  Matrix probs;
  Vector log_norm;
  Softmax(pass.logits, &probs, &log_norm);
  return probs;
}

Vector SampleLosses(const ModelSpec& spec, const ParameterVector& params,
                    const Matrix& features, const std::vector<int>& labels) {
  CheckShapes(spec, params, features);
  CheckLabels(spec, features, labels);
  const ForwardPass pass = RunForward(params, features);
  Vector losses(features.rows());
  for (Index i = 0; i < features.rows(); ++i) {
    const double m = pass.logits.row(i).maxCoeff();
    const double lse = m + std::log((pass.logits.row(i).array() - m).exp().sum());
    losses(i) = lse - pass.logits(i, labels[static_cast<std::size_t>(i)]);
  }
  return losses;
}

PerSampleGradients ComputePerSampleGradients(const ModelSpec& spec,
                                             const ParameterVector& params,
                                             const Matrix& features,
                                             const std::vector<int>& labels) {
  CheckShapes(spec, params, features);
  CheckLabels(spec, features, labels);
  if (features.rows() == 0) throw ParameterError("per-sample gradients of an empty batch");
  const ForwardPass pass = RunForward(params, features);
  Matrix probs;
  Vector log_norm;
  Softmax(pass.logits, &probs, &log_norm);
  const std::vector<Matrix> deltas = Backward(params, pass, probs, labels, 0);

  const Index n = features.rows();
  PerSampleGradients out;
  out.rows = Matrix::Zero(n, params.dim());
  out.losses.resize(n);
  for (Index i = 0; i < n; ++i) {
    out.losses(i) = log_norm(i) - pass.logits(i, labels[static_cast<std::size_t>(i)]);
  }
  const auto& layout = params.layout();
  for (std::size_t l = 0; l < deltas.size(); ++l) {
    const LayerSlot& w = layout[2 * l];
    const LayerSlot& b = layout[2 * l + 1];
    const Matrix& delta = deltas[l];
    const Matrix& input = pass.input(l);
    for (Index i = 0; i < n; ++i) {
      for (Index o = 0; o < w.rows; ++o) {
        const double d = delta(i, o);
        out.rows.row(i).segment(w.offset + o * w.cols, w.cols) = d * input.row(i);
        out.rows(i, b.offset + o) = d;
      }
    }
  }
  return out;
}

PerSampleGradients Restrict(const PerSampleGradients& gradients, IndexRange head_range,
                            GradientScope scope) {
  if (scope == GradientScope::kFull) return gradients;
  if (head_range.begin < 0 || head_range.end > gradients.rows.cols() ||
      head_range.size() <= 0) {
    throw ShapeError("head range outside the gradient rows");
  }
  return {gradients.rows.middleCols(head_range.begin, head_range.size()),
          gradients.losses};
}

ClippedSum ComputeClippedSum(const ModelSpec& spec, const ParameterVector& params,
                             const Matrix& features, const std::vector<int>& labels,
                             double clip_norm, GradientScope scope) {
  CheckShapes(spec, params, features);
  CheckLabels(spec, features, labels);
  if (features.rows() == 0) throw ParameterError("clipped sum over an empty batch");
  if (!(clip_norm > 0.0)) throw ParameterError("clip_norm must be positive");

  const auto& layout = params.layout();
  const std::size_t num_layers = layout.size() / 2;
  const std::size_t lowest = scope == GradientScope::kHead ? num_layers - 1 : 0;
  const ForwardPass pass = RunForward(params, features);
  Matrix probs;
  Vector log_norm;
  Softmax(pass.logits, &probs, &log_norm);
  const std::vector<Matrix> deltas = Backward(params, pass, probs, labels, lowest);

  const Index n = features.rows();
  ClippedSum out;
  out.count = n;
  Vector scale = Vector::Ones(n);
  if (std::isfinite(clip_norm)) {
    Vector sq_norm = Vector::Zero(n);
    for (std::size_t l = lowest; l < num_layers; ++l) {
      sq_norm.array() += deltas[l].rowwise().squaredNorm().array() *
                         (pass.input(l).rowwise().squaredNorm().array() + 1.0);
    }
    for (Index i = 0; i < n; ++i) {
      const double norm = std::sqrt(sq_norm(i));
      if (norm > clip_norm) {
        scale(i) = 1.0 / (norm / clip_norm);
        ++out.clipped;
      }
    }
  }

  const Index offset0 = layout[2 * lowest].offset;
  out.sum = Vector::Zero(params.dim() - offset0);
  for (std::size_t l = lowest; l < num_layers; ++l) {
    const LayerSlot& w = layout[2 * l];
    const LayerSlot& b = layout[2 * l + 1];
    Eigen::Map<Matrix> weight_grad(out.sum.data() + (w.offset - offset0), w.rows, w.cols);
    if (out.clipped == 0) {
      weight_grad.noalias() = deltas[l].transpose() * pass.input(l);
      out.sum.segment(b.offset - offset0, b.rows) = deltas[l].colwise().sum().transpose();
    } else {
      const Matrix scaled = scale.asDiagonal() * deltas[l];
      weight_grad.noalias() = scaled.transpose() * pass.input(l);
      out.sum.segment(b.offset - offset0, b.rows) = scaled.colwise().sum().transpose();
    }
  }

  double loss = 0.0;
  for (Index i = 0; i < n; ++i) {
    loss += log_norm(i) - pass.logits(i, labels[static_cast<std::size_t>(i)]);
  }
  out.mean_loss = loss / static_cast<double>(n);
  return out;
}

Evaluation Evaluate(const ModelSpec& spec, const ParameterVector& params,
                    const LabeledDataset& dataset) {
  if (dataset.size() == 0) throw ParameterError("Evaluate: empty dataset");
  CheckShapes(spec, params, dataset.features());
  CheckLabels(spec, dataset.features(), dataset.labels());
  const ForwardPass pass = RunForward(params, dataset.features());
  Index correct = 0;
  double loss = 0.0;
  for (Index i = 0; i < dataset.size(); ++i) {
    const auto row = pass.logits.row(i);
    Index best = 0;
    for (Index k = 1; k < row.size(); ++k) {
      if (row(k) > row(best)) best = k;
    }
    const int y = dataset.labels()[static_cast<std::size_t>(i)];
    if (best == y) ++correct;
    const double m = row.maxCoeff();
    loss += m + std::log((row.array() - m).exp().sum()) - row(y);
  }
  const double n = static_cast<double>(dataset.size());
  return {static_cast<double>(correct) / n, loss / n};
}

}  // namespace dpfl
