// Copyright 2026 The HGD Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#ifndef HGD_MATCHING_HPP_
#define HGD_MATCHING_HPP_

// Stage correspondence between a student and a teacher backbone.
//
// Features are grouped into stages by spatial size, the last feature of each
// stage represents it, and representatives are paired stage-by-stage. Each
// student representative goes through a trainable 1x1 convolution (channel
// match) and, when spatial sizes differ, a bilinear resize to the teacher's
// resolution. Adapters live on a side branch and are never part of the
// deployed student.

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hgd/tensor.hpp"

namespace hgd {

template <typename T>
struct BasicStageFeatureSet {
  std::vector<BasicTensor<T>> features;  // forward order
  std::vector<std::size_t> stage_index;  // one id per feature

  std::size_t stage_count() const {
    return stage_index.empty() ? 0 : stage_index.back() + 1;
  }
};
using StageFeatureSet = BasicStageFeatureSet<float>;

// Stage id per feature shape (NCHW): consecutive equal H x W share an id, a
// size change opens the next id. Throws OrderingError if H or W grows and
// ConfigError on an empty list.
std::vector<std::size_t> assign_stage_ids(std::span<const Shape> shapes);

// Index of the final feature of each stage.
std::vector<std::size_t> last_of_each_stage(
    std::span<const std::size_t> stage_ids);

template <typename T>
BasicStageFeatureSet<T> group_stages(std::vector<BasicTensor<T>> features);

template <typename T>
std::vector<BasicTensor<T>> select_last(const BasicStageFeatureSet<T>& stages);

enum class Resolution { kSame, kResampleToTeacher };

struct StagePair {
  std::size_t stage = 0;  // same index on both sides
  Resolution resolution = Resolution::kSame;
  Shape student_shape;
  Shape teacher_shape;
};

struct DroppedStage {
  std::string side;  // "student" or "teacher"
  std::size_t stage = 0;
  std::string reason;
};

struct MatchPlan {
  std::vector<StagePair> pairs;
  std::vector<DroppedStage> dropped;

  const StagePair* find(std::size_t stage) const;
  // Human-readable summary: stage sizes, pairings, drops.
  std::string report() const;
};

// Pairs student stage k with teacher stage k. Trailing stages of the longer
// list are dropped; pairs whose spatial ratio exceeds `max_resample_ratio`
// are dropped too. Shapes are the selected representatives (NCHW).
MatchPlan build_match_plan(std::span<const Shape> student_stages,
                           std::span<const Shape> teacher_stages,
                           double max_resample_ratio = 4.0);

// One trainable 1x1 kernel (teacher_c x student_c x 1 x 1) per matched stage.
template <typename T>
class BasicAdapterBank {
 public:
  BasicAdapterBank() = default;

  // Uniform(-1, 1) / sqrt(fan_in) initialisation, deterministic in `seed`.
  static BasicAdapterBank create(const MatchPlan& plan, std::uint64_t seed);
  // Identity kernels; requires equal channel counts on every pair.
  static BasicAdapterBank identity(const MatchPlan& plan);

  bool contains(std::size_t stage) const { return kernels_.count(stage) > 0; }
  const BasicTensor<T>& kernel(std::size_t stage) const;
  BasicTensor<T>& kernel(std::size_t stage);
  void set_kernel(std::size_t stage, BasicTensor<T> kernel);
  std::vector<std::size_t> stages() const;
  std::size_t size() const { return kernels_.size(); }
  std::size_t parameter_count() const;

 private:
  std::map<std::size_t, BasicTensor<T>> kernels_;
};
using AdapterBank = BasicAdapterBank<float>;

template <typename T>
struct BasicMatchedPair {
  BasicTensor<T> student_adapted;  // same shape as teacher
  BasicTensor<T> teacher;
  BasicTensor<T> student_raw;      // pre-adaptation, for statistics weights
  std::size_t stage = 0;
  Resolution resolution = Resolution::kSame;
};
using MatchedPair = BasicMatchedPair<float>;

// 1x1 conv to teacher channels, then bilinear resize when the pair is tagged
// for resampling. Throws ConfigError if the bank lacks the stage's adapter.
template <typename T>
BasicMatchedPair<T> adapt(const StagePair& pair,
                          const BasicTensor<T>& student_raw,
                          const BasicTensor<T>& teacher,
                          const BasicAdapterBank<T>& adapters);

template <typename T>
struct AdaptGrads {
  BasicTensor<T> student_raw;
  BasicTensor<T> kernel;
};

template <typename T>
AdaptGrads<T> adapt_backward(const StagePair& pair,
                             const BasicTensor<T>& student_raw,
                             const BasicAdapterBank<T>& adapters,
                             const BasicTensor<T>& grad_adapted);

}  // namespace hgd

#endif  // HGD_MATCHING_HPP_
