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

#ifndef DIFFABM_AUTODIFF_OPS_H_
#define DIFFABM_AUTODIFF_OPS_H_

#include <memory>
#include <span>
#include <vector>

#include "diffabm/autodiff/tensor.h"
#include "diffabm/kernels/segment.h"

namespace diffabm::ad {

using SegmentIndexPtr = std::shared_ptr<const kernels::SegmentIndex>;

// Elementwise binary ops. Operands must have equal shapes, or one of them
// must hold a single value, which is broadcast. ShapeMismatch otherwise.
Tensor Add(const Tensor& a, const Tensor& b);
Tensor Sub(const Tensor& a, const Tensor& b);
Tensor Mul(const Tensor& a, const Tensor& b);
// DomainError if any divisor is zero.
Tensor Div(const Tensor& a, const Tensor& b);

Tensor Neg(const Tensor& x);
Tensor Exp(const Tensor& x);
// DomainError for x <= 0.
Tensor Log(const Tensor& x);
// x^p for a constant exponent. DomainError for x < 0, or x == 0 with p < 1.
Tensor Pow(const Tensor& x, double p);
// base^exponent, differentiable in both. DomainError unless base > 0.
Tensor Pow(const Tensor& base, const Tensor& exponent);
Tensor Sigmoid(const Tensor& x);
Tensor Softplus(const Tensor& x);
Tensor Tanh(const Tensor& x);
// ln Gamma(x); backward uses digamma. DomainError for x <= 0.
Tensor LGamma(const Tensor& x);
// Smooth max(x, floor): floor + softplus(k (x - floor)) / k.
Tensor ClampMinSmooth(const Tensor& x, double floor, double sharpness);

// Sum of all entries, shape [].
Tensor Sum(const Tensor& x);
// out[s] = sum of x[i] with segment id s; shape [num_segments].
Tensor SegmentSum(const Tensor& x, const SegmentIndexPtr& segments);
// out[i] = src[index.ids()[i]]. index.num_segments() must equal src.numel();
// the backward pass is a SegmentSum over the same index.
Tensor Gather(const Tensor& src, const SegmentIndexPtr& index);
// Expands a one-element tensor to `shape`.
Tensor Broadcast(const Tensor& x, Shape shape);
Tensor Reshape(const Tensor& x, Shape shape);
// 1-D concatenation of the flattened inputs.
Tensor Concat(std::span<const Tensor> parts);
// W [m, n] times x [n] -> [m].
Tensor MatVec(const Tensor& w, const Tensor& x);
// out = sum_s history[s] * lag_weights[T - s] with T = history.size().
// Each history entry has the same shape; lag_weights needs more than T
// entries. Used to apply a time-since-event kernel to past event indicators.
Tensor LaggedSum(std::span<const Tensor> history, const Tensor& lag_weights);
// Forward value `hard`, gradient passed to `relaxed` unchanged.
Tensor StraightThrough(const Tensor& relaxed, std::vector<double> hard);
// Same values, no gradient.
Tensor StopGradient(const Tensor& x);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return Add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return Sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return Mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return Div(a, b); }
inline Tensor operator-(const Tensor& x) { return Neg(x); }
inline Tensor operator+(const Tensor& a, double b) {
  return Add(a, Tensor::Scalar(b));
}
inline Tensor operator+(double a, const Tensor& b) {
  return Add(Tensor::Scalar(a), b);
}
inline Tensor operator-(const Tensor& a, double b) {
  return Sub(a, Tensor::Scalar(b));
}
inline Tensor operator-(double a, const Tensor& b) {
  return Sub(Tensor::Scalar(a), b);
}
inline Tensor operator*(const Tensor& a, double b) {
  return Mul(a, Tensor::Scalar(b));
}
inline Tensor operator*(double a, const Tensor& b) {
  return Mul(Tensor::Scalar(a), b);
}
inline Tensor operator/(const Tensor& a, double b) {
  return Div(a, Tensor::Scalar(b));
}

}  // namespace diffabm::ad

#endif  // DIFFABM_AUTODIFF_OPS_H_
