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

#include "diffabm/autodiff/ops.h"

#include <cmath>
#include <string>
#include <utility>

#include "diffabm/autodiff/special.h"
#include "diffabm/errors.h"

namespace diffabm::ad {
namespace {

namespace par = kernels::parallel;

double StableSigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double StableSoftplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

std::vector<double> Copy(std::span<const double> v) {
  return {v.begin(), v.end()};
}

struct Broadcasting {
  Shape shape;
  std::size_t n;
  bool a_scalar;
  bool b_scalar;
};

Broadcasting ResolveBroadcast(OpKind op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) {
    return {a.shape(), a.numel(), false, false};
  }
  if (b.numel() == 1) return {a.shape(), a.numel(), false, true};
  if (a.numel() == 1) return {b.shape(), b.numel(), true, false};
  throw ShapeMismatch(std::string(OpName(op)) + ": " +
                      ShapeString(a.shape()) + " vs " +
                      ShapeString(b.shape()));
}

// Elementwise binary op with scalar broadcasting. `da`/`db` are the local
// partials d out / d a and d out / d b at (a, b).
template <typename F, typename DA, typename DB>
Tensor Binary(OpKind op, const Tensor& a, const Tensor& b, F f, DA da,
              DB db) {
  const Broadcasting bc = ResolveBroadcast(op, a, b);
  const auto av = a.values();
  const auto bv = b.values();
  const std::size_t sa = bc.a_scalar ? 0 : 1;
  const std::size_t sb = bc.b_scalar ? 0 : 1;
  std::vector<double> out(bc.n);
  par::For(bc.n, [&](std::size_t i) { out[i] = f(av[i * sa], bv[i * sb]); });
  return Tape::Record(
      op, bc.shape, std::move(out), {&a, &b},
      [a, b, bc, sa, sb, da, db](BackwardContext& ctx) {
        const auto g = ctx.grad_output();
        const auto av = a.values();
        const auto bv = b.values();
        auto accumulate = [&](std::size_t slot, bool scalar, auto partial) {
          auto gi = ctx.grad_input(slot);
          if (gi.empty()) return;
          if (scalar) {
            double acc = 0.0;
            for (std::size_t i = 0; i < bc.n; ++i) {
              acc += g[i] * partial(av[i * sa], bv[i * sb]);
            }
            gi[0] += acc;
          } else {
            par::For(bc.n, [&](std::size_t i) {
              gi[i] += g[i] * partial(av[i * sa], bv[i * sb]);
            });
          }
        };
        accumulate(0, bc.a_scalar, da);
        accumulate(1, bc.b_scalar, db);
      });
}

// Elementwise unary op; `df(x)` is the local derivative.
template <typename F, typename DF>
Tensor Unary(OpKind op, const Tensor& x, F f, DF df) {
  const auto xv = x.values();
  std::vector<double> out(x.numel());
  par::Map(xv, out, f);
  return Tape::Record(op, x.shape(), std::move(out), {&x},
                      [x, df](BackwardContext& ctx) {
                        const auto g = ctx.grad_output();
                        const auto xv = x.values();
                        auto gx = ctx.grad_input(0);
                        par::For(xv.size(), [&](std::size_t i) {
                          gx[i] += g[i] * df(xv[i]);
                        });
                      });
}

void RequireAll(const Tensor& x, bool (*ok)(double), const char* what) {
  for (double v : x.values()) {
    if (!ok(v)) throw DomainError(what);
  }
}

}  // namespace

Tensor Add(const Tensor& a, const Tensor& b) {
  return Binary(
      OpKind::kAdd, a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor Sub(const Tensor& a, const Tensor& b) {
  return Binary(
      OpKind::kSub, a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor Mul(const Tensor& a, const Tensor& b) {
  return Binary(
      OpKind::kMul, a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor Div(const Tensor& a, const Tensor& b) {
  RequireAll(b, [](double v) { return v != 0.0; }, "div: zero divisor");
  return Binary(
      OpKind::kDiv, a, b, [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Tensor Neg(const Tensor& x) {
  return Unary(
      OpKind::kNeg, x, [](double v) { return -v; },
      [](double) { return -1.0; });
}

Tensor Exp(const Tensor& x) {
  return Unary(
      OpKind::kExp, x, [](double v) { return std::exp(v); },
      [](double v) { return std::exp(v); });
}

Tensor Log(const Tensor& x) {
  RequireAll(x, [](double v) { return v > 0.0; }, "log: argument <= 0");
  return Unary(
      OpKind::kLog, x, [](double v) { return std::log(v); },
      [](double v) { return 1.0 / v; });
}

Tensor Pow(const Tensor& x, double p) {
  for (double v : x.values()) {
    if (v < 0.0 || (v == 0.0 && p < 1.0)) {
      throw DomainError("pow: base " + std::to_string(v) +
                        " with exponent " + std::to_string(p));
    }
  }
  return Unary(
      OpKind::kPow, x, [p](double v) { return std::pow(v, p); },
      [p](double v) { return p * std::pow(v, p - 1.0); });
}

Tensor Pow(const Tensor& base, const Tensor& exponent) {
  RequireAll(base, [](double v) { return v > 0.0; }, "pow: base <= 0");
  return Binary(
      OpKind::kPow, base, exponent,
      [](double x, double y) { return std::pow(x, y); },
      [](double x, double y) { return y * std::pow(x, y - 1.0); },
      [](double x, double y) { return std::pow(x, y) * std::log(x); });
}

Tensor Sigmoid(const Tensor& x) {
  return Unary(OpKind::kSigmoid, x, StableSigmoid, [](double v) {
    const double s = StableSigmoid(v);
    return s * (1.0 - s);
  });
}

Tensor Softplus(const Tensor& x) {
  return Unary(OpKind::kSoftplus, x, StableSoftplus, StableSigmoid);
}

Tensor Tanh(const Tensor& x) {
  return Unary(
      OpKind::kTanh, x, [](double v) { return std::tanh(v); },
      [](double v) {
        const double t = std::tanh(v);
        return 1.0 - t * t;
      });
}

Tensor LGamma(const Tensor& x) {
  RequireAll(x, [](double v) { return v > 0.0; }, "lgamma: argument <= 0");
  return Unary(OpKind::kLGamma, x, LogGamma, Digamma);
}

Tensor ClampMinSmooth(const Tensor& x, double floor, double sharpness) {
  if (!(sharpness > 0.0)) {
    throw DomainError("clamp_min_smooth: sharpness must be positive");
  }
  return Unary(
      OpKind::kClampMinSmooth, x,
      [floor, sharpness](double v) {
        return floor + StableSoftplus(sharpness * (v - floor)) / sharpness;
      },
      [floor, sharpness](double v) {
        return StableSigmoid(sharpness * (v - floor));
      });
}

Tensor Sum(const Tensor& x) {
  std::vector<double> out{par::Sum(x.values())};
  return Tape::Record(OpKind::kSum, Shape{}, std::move(out), {&x},
                      [](BackwardContext& ctx) {
                        const double g = ctx.grad_output()[0];
                        auto gx = ctx.grad_input(0);
                        par::For(gx.size(), [&](std::size_t i) { gx[i] += g; });
                      });
}

Tensor SegmentSum(const Tensor& x, const SegmentIndexPtr& segments) {
  if (x.numel() != segments->size()) {
    throw ShapeMismatch("segment_sum: " + std::to_string(x.numel()) +
                        " values for " + std::to_string(segments->size()) +
                        " segment ids");
  }
  std::vector<double> out(segments->num_segments());
  par::SegmentSum(x.values(), *segments, out);
  return Tape::Record(OpKind::kSegmentSum, Shape{segments->num_segments()},
                      std::move(out),
                      {&x}, [segments](BackwardContext& ctx) {
                        const auto g = ctx.grad_output();
                        const auto ids = segments->ids();
                        auto gx = ctx.grad_input(0);
                        par::For(gx.size(), [&](std::size_t i) {
                          gx[i] += g[static_cast<std::size_t>(ids[i])];
                        });
                      });
}

Tensor Gather(const Tensor& src, const SegmentIndexPtr& index) {
  if (src.numel() != index->num_segments()) {
    throw ShapeMismatch("gather: source has " + std::to_string(src.numel()) +
                        " entries, index addresses " +
                        std::to_string(index->num_segments()));
  }
  std::vector<double> out(index->size());
  par::Gather(src.values(), index->ids(), out);
  return Tape::Record(OpKind::kGather, Shape{index->size()}, std::move(out),
                      {&src}, [index](BackwardContext& ctx) {
                        std::vector<double> scattered(index->num_segments());
                        par::SegmentSum(ctx.grad_output(), *index, scattered);
                        auto gs = ctx.grad_input(0);
                        for (std::size_t i = 0; i < gs.size(); ++i) {
                          gs[i] += scattered[i];
                        }
                      });
}

Tensor Broadcast(const Tensor& x, Shape shape) {
  if (x.numel() != 1) {
    throw ShapeMismatch("broadcast: source must hold one value, has shape " +
                        ShapeString(x.shape()));
  }
  std::vector<double> out(NumElements(shape), x[0]);
  return Tape::Record(OpKind::kBroadcast, std::move(shape), std::move(out),
                      {&x}, [](BackwardContext& ctx) {
                        ctx.grad_input(0)[0] += par::Sum(ctx.grad_output());
                      });
}

Tensor Reshape(const Tensor& x, Shape shape) {
  if (NumElements(shape) != x.numel()) {
    throw ShapeMismatch("reshape: " + ShapeString(x.shape()) + " -> " +
                        ShapeString(shape));
  }
  return Tape::Record(OpKind::kReshape, std::move(shape), Copy(x.values()),
                      {&x}, [](BackwardContext& ctx) {
                        const auto g = ctx.grad_output();
                        auto gx = ctx.grad_input(0);
                        for (std::size_t i = 0; i < gx.size(); ++i) {
                          gx[i] += g[i];
                        }
                      });
}

Tensor Concat(std::span<const Tensor> parts) {
  std::vector<double> out;
  std::vector<const Tensor*> inputs;
  std::vector<std::size_t> offsets;
  for (const Tensor& p : parts) {
    offsets.push_back(out.size());
    out.insert(out.end(), p.values().begin(), p.values().end());
    inputs.push_back(&p);
  }
  if (out.empty()) throw ShapeMismatch("concat of nothing");
  const Shape shape{out.size()};
  return Tape::Record(OpKind::kConcat, shape, std::move(out), inputs,
                      [offsets](BackwardContext& ctx) {
                        const auto g = ctx.grad_output();
                        for (std::size_t k = 0; k < offsets.size(); ++k) {
                          auto gk = ctx.grad_input(k);
                          for (std::size_t i = 0; i < gk.size(); ++i) {
                            gk[i] += g[offsets[k] + i];
                          }
                        }
                      });
}

Tensor MatVec(const Tensor& w, const Tensor& x) {
  if (w.shape().size() != 2 || w.shape()[1] != x.numel()) {
    throw ShapeMismatch("matvec: " + ShapeString(w.shape()) + " x " +
                        ShapeString(x.shape()));
  }
  const std::size_t m = w.shape()[0];
  const std::size_t n = w.shape()[1];
  const auto wv = w.values();
  const auto xv = x.values();
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += wv[i * n + j] * xv[j];
    out[i] = acc;
  }
  return Tape::Record(OpKind::kMatVec, Shape{m}, std::move(out), {&w, &x},
                      [w, x, m, n](BackwardContext& ctx) {
                        const auto g = ctx.grad_output();
                        const auto wv = w.values();
                        const auto xv = x.values();
                        if (auto gw = ctx.grad_input(0); !gw.empty()) {
                          for (std::size_t i = 0; i < m; ++i) {
                            for (std::size_t j = 0; j < n; ++j) {
                              gw[i * n + j] += g[i] * xv[j];
                            }
                          }
                        }
                        if (auto gx = ctx.grad_input(1); !gx.empty()) {
                          for (std::size_t i = 0; i < m; ++i) {
                            for (std::size_t j = 0; j < n; ++j) {
                              gx[j] += g[i] * wv[i * n + j];
                            }
                          }
                        }
                      });
}

Tensor LaggedSum(std::span<const Tensor> history, const Tensor& lag_weights) {
  const std::size_t steps = history.size();
  if (steps == 0) throw ShapeMismatch("lagged_sum: empty history");
  if (lag_weights.numel() <= steps) {
    throw ShapeMismatch("lagged_sum: " + std::to_string(steps) +
                        " history steps need more than that many lag weights");
  }
  const Shape shape = history[0].shape();
  const std::size_t n = history[0].numel();
  std::vector<const Tensor*> inputs;
  inputs.reserve(steps + 1);
  for (const Tensor& h : history) {
    if (h.numel() != n) throw ShapeMismatch("lagged_sum: ragged history");
    inputs.push_back(&h);
  }
  inputs.push_back(&lag_weights);

  const auto w = lag_weights.values();
  std::vector<double> out(n, 0.0);
  for (std::size_t s = 0; s < steps; ++s) {
    const double weight = w[steps - s];
    if (weight == 0.0) continue;
    const auto hv = history[s].values();
    par::For(n, [&](std::size_t j) { out[j] += weight * hv[j]; });
  }
  std::vector<Tensor> saved(history.begin(), history.end());
  return Tape::Record(
      OpKind::kLaggedSum, shape, std::move(out), inputs,
      [saved = std::move(saved), lag_weights, steps](BackwardContext& ctx) {
        const auto g = ctx.grad_output();
        const auto w = lag_weights.values();
        auto gw = ctx.grad_input(steps);
        for (std::size_t s = 0; s < steps; ++s) {
          const double weight = w[steps - s];
          if (auto gh = ctx.grad_input(s); !gh.empty() && weight != 0.0) {
            par::For(gh.size(), [&](std::size_t j) { gh[j] += g[j] * weight; });
          }
          if (!gw.empty()) {
            const auto hv = saved[s].values();
            double acc = 0.0;
            for (std::size_t j = 0; j < hv.size(); ++j) acc += g[j] * hv[j];
            gw[steps - s] += acc;
          }
        }
      });
}

Tensor StraightThrough(const Tensor& relaxed, std::vector<double> hard) {
  if (hard.size() != relaxed.numel()) {
    throw ShapeMismatch("straight_through: value count differs");
  }
  return Tape::Record(OpKind::kStraightThrough, relaxed.shape(),
                      std::move(hard), {&relaxed}, [](BackwardContext& ctx) {
                        const auto g = ctx.grad_output();
                        auto gx = ctx.grad_input(0);
                        par::For(gx.size(), [&](std::size_t i) { gx[i] += g[i]; });
                      });
}

Tensor StopGradient(const Tensor& x) {
  return Tensor::Constant(Copy(x.values()), x.shape());
}

}  // namespace diffabm::ad
