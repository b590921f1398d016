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

#ifndef DIFFABM_AUTODIFF_TENSOR_H_
#define DIFFABM_AUTODIFF_TENSOR_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace diffabm::ad {

using Shape = std::vector<std::size_t>;
using NodeId = std::uint32_t;

std::size_t NumElements(const Shape& shape);
std::string ShapeString(const Shape& shape);

class Tape;

// A shaped, row-major array of doubles. Values are immutable and shared
// between copies. A tensor that requires a gradient is bound to the Tape it
// was recorded on and carries that tape's node id.
class Tensor {
 public:
  // Scalar zero constant.
  Tensor();

  // Constant (untracked) tensors. Throw NonFiniteInput on NaN/Inf.
  static Tensor Constant(std::vector<double> values, Shape shape);
  static Tensor Constant(std::vector<double> values);
  static Tensor Scalar(double value);
  static Tensor Full(Shape shape, double value);

  const Shape& shape() const { return shape_; }
  std::size_t numel() const { return values_->size(); }
  std::span<const double> values() const { return *values_; }
  double operator[](std::size_t i) const { return (*values_)[i]; }
  // The single value of a one-element tensor; NotScalar otherwise.
  double item() const;

  bool requires_grad() const { return node_.has_value(); }
  std::optional<NodeId> node_id() const { return node_; }
  Tape* tape() const { return tape_; }

 private:
  friend class Tape;
  Tensor(Shape shape, std::shared_ptr<const std::vector<double>> values,
         Tape* tape, std::optional<NodeId> node);

  Shape shape_;
  std::shared_ptr<const std::vector<double>> values_;
  Tape* tape_ = nullptr;
  std::optional<NodeId> node_;
};

enum class OpKind {
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kExp,
  kLog,
  kPow,
  kSigmoid,
  kSoftplus,
  kTanh,
  kSum,
  kSegmentSum,
  kGather,
  kBroadcast,
  kClampMinSmooth,
  kLGamma,
  kConcat,
  kReshape,
  kMatVec,
  kLaggedSum,
  kRelaxedBernoulli,
  kStraightThrough,
};

std::string_view OpName(OpKind op);

// Handed to an op's backward function during the reverse sweep.
class BackwardContext {
 public:
  std::span<const double> grad_output() const { return grad_output_; }
  // Accumulation buffer for the op's `slot`-th input; empty if that input
  // does not require a gradient.
  std::span<double> grad_input(std::size_t slot);
  bool tracks(std::size_t slot) const;

 private:
  friend class Tape;
  BackwardContext(std::span<const double> grad_output,
                  std::span<const std::optional<NodeId>> inputs,
                  std::vector<std::vector<double>>& grads,
                  std::span<const std::size_t> sizes)
      : grad_output_(grad_output),
        inputs_(inputs),
        grads_(grads),
        sizes_(sizes) {}

  std::span<const double> grad_output_;
  std::span<const std::optional<NodeId>> inputs_;
  std::vector<std::vector<double>>& grads_;
  std::span<const std::size_t> sizes_;
};

using BackwardFn = std::function<void(BackwardContext&)>;

// Gradients of one scalar loss with respect to every recorded node.
class GradientMap {
 public:
  // Gradient for `t`, shaped like `t`. Tensors the loss does not depend on,
  // and untracked tensors, get zeros.
  std::vector<double> operator()(const Tensor& t) const;
  bool reached(const Tensor& t) const;

 private:
  friend class Tape;
  std::vector<std::vector<double>> grads_;
  const Tape* tape_ = nullptr;
};

// Define-by-run record of tracked operations. Nodes are appended in
// evaluation order, so every node's parents have smaller ids. A Tape is
// written by one thread; tensors recorded on it must not outlive it.
class Tape {
 public:
  struct NodeView {
    OpKind op;
    std::vector<NodeId> parents;
    std::size_t numel;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Copies `values`. With requires_grad=false the result is a constant that
  // is not registered on the tape.
  Tensor Leaf(std::vector<double> values, Shape shape,
              bool requires_grad = true);
  Tensor Leaf(std::vector<double> values, bool requires_grad = true);
  Tensor Leaf(double value, bool requires_grad = true);

  // Reverse sweep from a scalar loss recorded on this tape.
  GradientMap Backward(const Tensor& loss) const;

  std::size_t size() const { return nodes_.size(); }
  NodeView node(NodeId id) const;

  // Appends an op node whose value is `values`. If none of `inputs` is
  // tracked, nothing is recorded and a constant is returned.
  static Tensor Record(OpKind op, Shape shape, std::vector<double> values,
                       std::span<const Tensor* const> inputs, BackwardFn fn);
  static Tensor Record(OpKind op, Shape shape, std::vector<double> values,
                       std::initializer_list<const Tensor*> inputs,
                       BackwardFn fn) {
    return Record(op, std::move(shape), std::move(values),
                  std::span<const Tensor* const>(inputs.begin(),
                                                 inputs.size()),
                  std::move(fn));
  }

 private:
  struct Node {
    OpKind op;
    std::vector<std::optional<NodeId>> inputs;
    std::vector<std::size_t> input_sizes;
    std::size_t numel;
    BackwardFn backward;
  };

  Tensor Append(Node node, Shape shape, std::vector<double> values);

  std::vector<Node> nodes_;
};

}  // namespace diffabm::ad

#endif  // DIFFABM_AUTODIFF_TENSOR_H_
