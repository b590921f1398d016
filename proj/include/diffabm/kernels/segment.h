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

#ifndef DIFFABM_KERNELS_SEGMENT_H_
#define DIFFABM_KERNELS_SEGMENT_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace diffabm::kernels {

// Loops shorter than this stay on the calling thread.
inline constexpr std::size_t kParallelThreshold = 4096;

// Static grouping of element positions by segment id, stored CSR-style.
// Within a segment, positions are kept in ascending order so that any
// reduction over a segment visits its elements in input order.
class SegmentIndex {
 public:
  // Throws std::out_of_range if an id is negative or >= num_segments.
  SegmentIndex(std::vector<std::int32_t> ids, std::size_t num_segments);

  std::size_t size() const { return ids_.size(); }
  std::size_t num_segments() const { return offsets_.size() - 1; }
  std::span<const std::int32_t> ids() const { return ids_; }
  std::span<const std::size_t> offsets() const { return offsets_; }
  std::span<const std::int32_t> order() const { return order_; }
  std::size_t segment_size(std::size_t s) const {
    return offsets_[s + 1] - offsets_[s];
  }

 private:
  std::vector<std::int32_t> ids_;
  std::vector<std::size_t> offsets_;
  std::vector<std::int32_t> order_;
};

// Reference kernels: plain sequential loops in input order.
namespace serial {

// out[s] = sum of values[i] with ids[i] == s. Empty segments are zero.
void SegmentSum(std::span<const double> values, const SegmentIndex& index,
                std::span<double> out);
// out[i] = src[ids[i]].
void Gather(std::span<const double> src, std::span<const std::int32_t> ids,
            std::span<double> out);
double Sum(std::span<const double> values);

template <typename F>
void For(std::size_t n, F&& f) {
  for (std::size_t i = 0; i < n; ++i) f(i);
}
template <typename F>
void Map(std::span<const double> in, std::span<double> out, F f) {
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
}
template <typename F>
void Map2(std::span<const double> a, std::span<const double> b,
          std::span<double> out, F f) {
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a[i], b[i]);
}

}  // namespace serial

// OpenMP kernels. Results are bitwise identical to the serial versions: each
// segment is reduced by one thread in input order, and Sum uses fixed-size
// blocks combined in block order.
namespace parallel {

void SegmentSum(std::span<const double> values, const SegmentIndex& index,
                std::span<double> out);
void Gather(std::span<const double> src, std::span<const std::int32_t> ids,
            std::span<double> out);
double Sum(std::span<const double> values);

// Runs f(i) for i in [0, n); iterations must be independent.
template <typename F>
void For(std::size_t n, F&& f) {
  const auto m = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (n >= kParallelThreshold)
  for (std::int64_t i = 0; i < m; ++i) f(static_cast<std::size_t>(i));
}
template <typename F>
void Map(std::span<const double> in, std::span<double> out, F f) {
  const auto n = static_cast<std::int64_t>(in.size());
#pragma omp parallel for schedule(static) if (in.size() >= kParallelThreshold)
  for (std::int64_t i = 0; i < n; ++i) out[i] = f(in[i]);
}
template <typename F>
void Map2(std::span<const double> a, std::span<const double> b,
          std::span<double> out, F f) {
  const auto n = static_cast<std::int64_t>(out.size());
#pragma omp parallel for schedule(static) if (out.size() >= kParallelThreshold)
  for (std::int64_t i = 0; i < n; ++i) out[i] = f(a[i], b[i]);
}

}  // namespace parallel

}  // namespace diffabm::kernels

#endif  // DIFFABM_KERNELS_SEGMENT_H_
