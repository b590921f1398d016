// Copyright 2026 The diffabm Authors
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

#include "diffabm/autodiff/tensor.h"

#include <cmath>
#include <sstream>
#include <utility>

#include "diffabm/errors.h"

namespace diffabm::ad {
namespace {

void CheckFinite(std::span<const double> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NonFiniteInput("non-finite value at index " + std::to_string(i));
    }
  }
}

}  // namespace

std::size_t NumElements(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string ShapeString(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor::Tensor()
    : values_(std::make_shared<const std::vector<double>>(1, 0.0)) {}

Tensor::Tensor(Shape shape, std::shared_ptr<const std::vector<double>> values,
               Tape* tape, std::optional<NodeId> node)
    : shape_(std::move(shape)),
      values_(std::move(values)),
      tape_(tape),
      node_(node) {}

Tensor Tensor::Constant(std::vector<double> values, Shape shape) {
  if (NumElements(shape) != values.size()) {
    throw ShapeMismatch("shape " + ShapeString(shape) + " does not hold " +
                        std::to_string(values.size()) + " values");
  }
  CheckFinite(values);
  return Tensor(std::move(shape),
                std::make_shared<const std::vector<double>>(std::move(values)),
                nullptr, std::nullopt);
}

Tensor Tensor::Constant(std::vector<double> values) {
  Shape shape{values.size()};
  return Constant(std::move(values), std::move(shape));
}

Tensor Tensor::Scalar(double value) { return Constant({value}, Shape{}); }

Tensor Tensor::Full(Shape shape, double value) {
  std::vector<double> values(NumElements(shape), value);
  return Constant(std::move(values), std::move(shape));
}

double Tensor::item() const {
  if (numel() != 1) {
    throw NotScalar("item() on tensor of shape " + ShapeString(shape_));
  }
  return (*values_)[0];
}

std::string_view OpName(OpKind op) {
  switch (op) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kDiv: return "div";
    case OpKind::kNeg: return "neg";
    case OpKind::kExp: return "exp";
    case OpKind::kLog: return "log";
    case OpKind::kPow: return "pow";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kSoftplus: return "softplus";
    case OpKind::kTanh: return "tanh";
    case OpKind::kSum: return "sum";
    case OpKind::kSegmentSum: return "segment_sum";
    case OpKind::kGather: return "gather";
    case OpKind::kBroadcast: return "broadcast";
    case OpKind::kClampMinSmooth: return "clamp_min_smooth";
    case OpKind::kLGamma: return "lgamma";
    case OpKind::kConcat: return "concat";
    case OpKind::kReshape: return "reshape";
    case OpKind::kMatVec: return "matvec";
    case OpKind::kLaggedSum: return "lagged_sum";
    case OpKind::kRelaxedBernoulli: return "relaxed_bernoulli";
    case OpKind::kStraightThrough: return "straight_through";
  }
  return "unknown";
}

std::span<double> BackwardContext::grad_input(std::size_t slot) {
  if (!inputs_[slot]) return {};
  auto& buffer = grads_[*inputs_[slot]];
  if (buffer.empty()) buffer.assign(sizes_[slot], 0.0);
  return buffer;
}

bool BackwardContext::tracks(std::size_t slot) const {
  return inputs_[slot].has_value();
}

std::vector<double> GradientMap::operator()(const Tensor& t) const {
  if (t.requires_grad() && t.tape() == tape_) {
    const auto& g = grads_[*t.node_id()];
    if (!g.empty()) return g;
  }
  return std::vector<double>(t.numel(), 0.0);
}

bool GradientMap::reached(const Tensor& t) const {
  return t.requires_grad() && t.tape() == tape_ &&
         !grads_[*t.node_id()].empty();
}

Tensor Tape::Leaf(std::vector<double> values, Shape shape,
                  bool requires_grad) {
  if (values.empty()) throw ShapeMismatch("leaf with no values");
  Tensor constant = Tensor::Constant(std::move(values), std::move(shape));
  if (!requires_grad) return constant;
  Node node{OpKind::kLeaf, {}, {}, constant.numel(), nullptr};
  auto shape_copy = constant.shape();
  return Append(std::move(node), std::move(shape_copy),
                std::vector<double>(constant.values().begin(),
                                    constant.values().end()));
}

Tensor Tape::Leaf(std::vector<double> values, bool requires_grad) {
  Shape shape{values.size()};
  return Leaf(std::move(values), std::move(shape), requires_grad);
}

Tensor Tape::Leaf(double value, bool requires_grad) {
  return Leaf(std::vector<double>{value}, Shape{}, requires_grad);
}

Tensor Tape::Append(Node node, Shape shape, std::vector<double> values) {
  const auto id = static_cast<NodeId>(nodes_.size());
  nodes_.push_back(std::move(node));
  return Tensor(std::move(shape),
                std::make_shared<const std::vector<double>>(std::move(values)),
                this, id);
}

Tensor Tape::Record(OpKind op, Shape shape, std::vector<double> values,
                    std::span<const Tensor* const> inputs, BackwardFn fn) {
  Tape* tape = nullptr;
  for (const Tensor* in : inputs) {
    if (!in->requires_grad()) continue;
    if (tape != nullptr && in->tape() != tape) {
      throw DetachedTensor(std::string(OpName(op)) +
                           ": inputs recorded on different tapes");
    }
    tape = in->tape();
  }
  if (tape == nullptr) {
    return Tensor(std::move(shape),
                  std::make_shared<const std::vector<double>>(std::move(values)),
                  nullptr, std::nullopt);
  }
  Node node{op, {}, {}, values.size(), std::move(fn)};
  node.inputs.reserve(inputs.size());
  node.input_sizes.reserve(inputs.size());
  for (const Tensor* in : inputs) {
    node.inputs.push_back(in->node_id());
    node.input_sizes.push_back(in->numel());
  }
  return tape->Append(std::move(node), std::move(shape), std::move(values));
}

Tape::NodeView Tape::node(NodeId id) const {
  const Node& n = nodes_.at(id);
  NodeView view{n.op, {}, n.numel};
  for (const auto& in : n.inputs) {
    if (in) view.parents.push_back(*in);
  }
  return view;
}

GradientMap Tape::Backward(const Tensor& loss) const {
  if (!loss.requires_grad() || loss.tape() != this) {
    throw DetachedTensor("loss is not recorded on this tape");
  }
  if (loss.numel() != 1) {
    throw NotScalar("loss has shape " + ShapeString(loss.shape()));
  }
  GradientMap result;
  result.tape_ = this;
  auto& grads = result.grads_;
  grads.resize(nodes_.size());
  const NodeId root = *loss.node_id();
  grads[root] = {1.0};
  for (std::int64_t k = root; k >= 0; --k) {
    const Node& node = nodes_[static_cast<std::size_t>(k)];
    if (!node.backward || grads[k].empty()) continue;
    // The op may write into grads of its inputs, which always have smaller
    // ids, so this node's own buffer is not resized underneath us.
    BackwardContext ctx(grads[k], node.inputs, grads, node.input_sizes);
    node.backward(ctx);
  }
  return result;
}

}  // namespace diffabm::ad
