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

#include "diffabm/kernels/segment.h"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace diffabm::kernels {
namespace {

// Block length for Sum. Serial and parallel both sum block-by-block so the
// rounding pattern does not depend on the thread count.
constexpr std::size_t kSumBlock = 1024;

double BlockSum(std::span<const double> values, std::size_t block) {
  const std::size_t begin = block * kSumBlock;
  const std::size_t end = std::min(values.size(), begin + kSumBlock);
  double acc = 0.0;
  for (std::size_t i = begin; i < end; ++i) acc += values[i];
  return acc;
}

std::size_t NumBlocks(std::size_t n) { return (n + kSumBlock - 1) / kSumBlock; }

}  // namespace

SegmentIndex::SegmentIndex(std::vector<std::int32_t> ids,
                           std::size_t num_segments)
    : ids_(std::move(ids)), offsets_(num_segments + 1, 0) {
  for (std::int32_t id : ids_) {
    if (id < 0 || static_cast<std::size_t>(id) >= num_segments) {
      throw std::out_of_range("segment id " + std::to_string(id) +
                              " outside [0, " + std::to_string(num_segments) +
                              ")");
    }
    ++offsets_[static_cast<std::size_t>(id) + 1];
  }
  for (std::size_t s = 0; s < num_segments; ++s) {
    offsets_[s + 1] += offsets_[s];
  }
  // Counting sort; stable, so positions within a segment stay ascending.
  order_.resize(ids_.size());
  std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    order_[cursor[static_cast<std::size_t>(ids_[i])]++] =
        static_cast<std::int32_t>(i);
  }
}

namespace serial {

void SegmentSum(std::span<const double> values, const SegmentIndex& index,
                std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  const auto ids = index.ids();
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[static_cast<std::size_t>(ids[i])] += values[i];
  }
}

void Gather(std::span<const double> src, std::span<const std::int32_t> ids,
            std::span<double> out) {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out[i] = src[static_cast<std::size_t>(ids[i])];
  }
}

double Sum(std::span<const double> values) {
  double total = 0.0;
  for (std::size_t b = 0; b < NumBlocks(values.size()); ++b) {
    total += BlockSum(values, b);
  }
  return total;
}

}  // namespace serial

namespace parallel {

void SegmentSum(std::span<const double> values, const SegmentIndex& index,
                std::span<double> out) {
  const auto offsets = index.offsets();
  const auto order = index.order();
  const auto segments = static_cast<std::int64_t>(index.num_segments());
#pragma omp parallel for schedule(static) \
    if (values.size() >= kParallelThreshold)
  for (std::int64_t s = 0; s < segments; ++s) {
    double acc = 0.0;
    for (std::size_t k = offsets[s]; k < offsets[s + 1]; ++k) {
      acc += values[static_cast<std::size_t>(order[k])];
    }
    out[static_cast<std::size_t>(s)] = acc;
  }
}

void Gather(std::span<const double> src, std::span<const std::int32_t> ids,
            std::span<double> out) {
  const auto n = static_cast<std::int64_t>(ids.size());
#pragma omp parallel for schedule(static) if (ids.size() >= kParallelThreshold)
  for (std::int64_t i = 0; i < n; ++i) {
    out[i] = src[static_cast<std::size_t>(ids[i])];
  }
}

double Sum(std::span<const double> values) {
  const std::size_t blocks = NumBlocks(values.size());
  std::vector<double> partial(blocks);
  const auto nb = static_cast<std::int64_t>(blocks);
#pragma omp parallel for schedule(static) if (blocks > 4)
  for (std::int64_t b = 0; b < nb; ++b) {
    partial[b] = BlockSum(values, static_cast<std::size_t>(b));
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

}  // namespace parallel
}  // namespace diffabm::kernels
