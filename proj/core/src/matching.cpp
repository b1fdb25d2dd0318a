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
#include "hgd/matching.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <sstream>

#include "hgd/ops.hpp"
#include "hgd/random.hpp"

namespace hgd {

std::vector<std::size_t> assign_stage_ids(std::span<const Shape> shapes) {
  if (shapes.empty()) throw ConfigError("group_stages: empty feature list");
  std::vector<std::size_t> ids(shapes.size());
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (shapes[i].size() != 4) {
      throw DimensionError("group_stages: feature " + std::to_string(i) +
                           " is not NCHW: " + to_string(shapes[i]));
    }
    if (i == 0) continue;
    const Shape& prev = shapes[i - 1];
    const Shape& cur = shapes[i];
    if (cur[2] > prev[2] || cur[3] > prev[3]) {
      throw OrderingError("group_stages: spatial size grows at feature " +
                          std::to_string(i) + " (" + std::to_string(prev[2]) +
                          "x" + std::to_string(prev[3]) + " -> " +
                          std::to_string(cur[2]) + "x" + std::to_string(cur[3]) +
                          ")");
    }
    const bool same = cur[2] == prev[2] && cur[3] == prev[3];
    ids[i] = same ? ids[i - 1] : ids[i - 1] + 1;
  }
  return ids;
}

std::vector<std::size_t> last_of_each_stage(
    std::span<const std::size_t> stage_ids) {
  assert(!stage_ids.empty());
  std::vector<std::size_t> last;
  for (std::size_t i = 0; i < stage_ids.size(); ++i) {
    if (i + 1 == stage_ids.size() || stage_ids[i + 1] != stage_ids[i]) {
      last.push_back(i);
    }
  }
  return last;
}

template <typename T>
BasicStageFeatureSet<T> group_stages(std::vector<BasicTensor<T>> features) {
  std::vector<Shape> shapes;
  shapes.reserve(features.size());
  for (const auto& f : features) shapes.push_back(f.shape());
  BasicStageFeatureSet<T> set;
  set.stage_index = assign_stage_ids(shapes);
  set.features = std::move(features);
  return set;
}

template <typename T>
std::vector<BasicTensor<T>> select_last(const BasicStageFeatureSet<T>& stages) {
  if (stages.features.empty()) {
    throw ConfigError("select_last: empty stage set");
  }
  std::vector<BasicTensor<T>> out;
  for (std::size_t i : last_of_each_stage(stages.stage_index)) {
    out.push_back(stages.features[i]);
  }
  return out;
}

const StagePair* MatchPlan::find(std::size_t stage) const {
  for (const auto& p : pairs) {
    if (p.stage == stage) return &p;
  }
  return nullptr;
}

std::string MatchPlan::report() const {
  std::ostringstream os;
  os << "match plan: " << pairs.size() << " pair(s), " << dropped.size()
     << " dropped\n";
  for (const auto& p : pairs) {
    os << "  stage " << p.stage << ": student " << to_string(p.student_shape)
       << " -> teacher " << to_string(p.teacher_shape)
       << (p.resolution == Resolution::kResampleToTeacher ? " [resample-to-teacher]"
                                                          : "")
       << "\n";
  }
  for (const auto& d : dropped) {
    os << "  dropped " << d.side << " stage " << d.stage << ": " << d.reason
       << "\n";
  }
  return os.str();
}

MatchPlan build_match_plan(std::span<const Shape> student_stages,
                           std::span<const Shape> teacher_stages,
                           double max_resample_ratio) {
  if (student_stages.empty() || teacher_stages.empty()) {
    throw ConfigError("build_match_plan: both stage lists must be nonempty");
  }
  MatchPlan plan;
  const std::size_t common = std::min(student_stages.size(), teacher_stages.size());
  for (std::size_t k = 0; k < common; ++k) {
    const Shape& s = student_stages[k];
    const Shape& t = teacher_stages[k];
    if (s.size() != 4 || t.size() != 4) {
      throw DimensionError("build_match_plan: stage shapes must be NCHW");
    }
    StagePair pair{k, Resolution::kSame, s, t};
    if (s[2] != t[2] || s[3] != t[3]) {
      auto ratio = [](double a, double b) { return std::max(a / b, b / a); };
      const double r = std::max(ratio(static_cast<double>(s[2]), static_cast<double>(t[2])),
                                ratio(static_cast<double>(s[3]), static_cast<double>(t[3])));
      if (r > max_resample_ratio) {
        std::ostringstream why;
        why << "spatial ratio " << r << " exceeds " << max_resample_ratio;
        plan.dropped.push_back({"student", k, why.str()});
        continue;
      }
      pair.resolution = Resolution::kResampleToTeacher;
    }
    plan.pairs.push_back(std::move(pair));
  }
  for (std::size_t k = common; k < student_stages.size(); ++k) {
    plan.dropped.push_back({"student", k, "no teacher stage to pair with"});
  }
  for (std::size_t k = common; k < teacher_stages.size(); ++k) {
    plan.dropped.push_back({"teacher", k, "no student stage to pair with"});
  }
  return plan;
}

template <typename T>
BasicAdapterBank<T> BasicAdapterBank<T>::create(const MatchPlan& plan,
                                                std::uint64_t seed) {
  BasicAdapterBank bank;
  Rng rng(seed);
  for (const auto& p : plan.pairs) {
    const std::size_t in_c = p.student_shape[1], out_c = p.teacher_shape[1];
    BasicTensor<T> k({out_c, in_c, 1, 1});
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_c));
    for (auto& v : k.values()) v = static_cast<T>(rng.uniform(-bound, bound));
    bank.kernels_.emplace(p.stage, std::move(k));
  }
  return bank;
}

template <typename T>
BasicAdapterBank<T> BasicAdapterBank<T>::identity(const MatchPlan& plan) {
  BasicAdapterBank bank;
  for (const auto& p : plan.pairs) {
    const std::size_t in_c = p.student_shape[1], out_c = p.teacher_shape[1];
    if (in_c != out_c) {
      throw ConfigError("identity adapter needs equal channels, stage " +
                        std::to_string(p.stage));
    }
    BasicTensor<T> k({out_c, in_c, 1, 1});
    for (std::size_t c = 0; c < in_c; ++c) k[c * in_c + c] = T(1);
    bank.kernels_.emplace(p.stage, std::move(k));
  }
  return bank;
}

template <typename T>
const BasicTensor<T>& BasicAdapterBank<T>::kernel(std::size_t stage) const {
  auto it = kernels_.find(stage);
  if (it == kernels_.end()) {
    throw ConfigError("no adapter for stage " + std::to_string(stage));
  }
  return it->second;
}

template <typename T>
BasicTensor<T>& BasicAdapterBank<T>::kernel(std::size_t stage) {
  auto it = kernels_.find(stage);
  if (it == kernels_.end()) {
    throw ConfigError("no adapter for stage " + std::to_string(stage));
  }
  return it->second;
}

template <typename T>
void BasicAdapterBank<T>::set_kernel(std::size_t stage, BasicTensor<T> kernel) {
  kernels_[stage] = std::move(kernel);
}

template <typename T>
std::vector<std::size_t> BasicAdapterBank<T>::stages() const {
  std::vector<std::size_t> out;
  for (const auto& [s, k] : kernels_) out.push_back(s);
  return out;
}

template <typename T>
std::size_t BasicAdapterBank<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [s, k] : kernels_) n += k.numel();
  return n;
}

template <typename T>
BasicMatchedPair<T> adapt(const StagePair& pair,
                          const BasicTensor<T>& student_raw,
                          const BasicTensor<T>& teacher,
                          const BasicAdapterBank<T>& adapters) {
  const BasicTensor<T>& kernel = adapters.kernel(pair.stage);
  BasicMatchedPair<T> out;
  out.student_adapted = conv2d(student_raw, kernel, 1, 0);
  if (pair.resolution == Resolution::kResampleToTeacher) {
    out.student_adapted =
        bilinear_resize(out.student_adapted, teacher.dim(2), teacher.dim(3));
  }
  if (out.student_adapted.shape() != teacher.shape()) {
    throw DimensionError("adapt: stage " + std::to_string(pair.stage) +
                         " adapted " + to_string(out.student_adapted.shape()) +
                         " vs teacher " + to_string(teacher.shape()));
  }
  out.teacher = teacher;
  out.student_raw = student_raw;
  out.stage = pair.stage;
  out.resolution = pair.resolution;
  return out;
}

template <typename T>
AdaptGrads<T> adapt_backward(const StagePair& pair,
                             const BasicTensor<T>& student_raw,
                             const BasicAdapterBank<T>& adapters,
                             const BasicTensor<T>& grad_adapted) {
  const BasicTensor<T>& kernel = adapters.kernel(pair.stage);
  BasicTensor<T> grad_conv =
      pair.resolution == Resolution::kResampleToTeacher
          ? bilinear_resize_backward(grad_adapted, student_raw.dim(2),
                                     student_raw.dim(3))
          : grad_adapted;
  auto g = conv2d_backward(student_raw, kernel, grad_conv, 1, 0);
  return {std::move(g.input), std::move(g.kernel)};
}

template BasicStageFeatureSet<float> group_stages(std::vector<Tensor>);
template BasicStageFeatureSet<double> group_stages(std::vector<Tensor64>);
template std::vector<Tensor> select_last(const BasicStageFeatureSet<float>&);
template std::vector<Tensor64> select_last(const BasicStageFeatureSet<double>&);
template class BasicAdapterBank<float>;
template class BasicAdapterBank<double>;
template BasicMatchedPair<float> adapt(const StagePair&, const Tensor&,
                                       const Tensor&, const AdapterBank&);
template BasicMatchedPair<double> adapt(const StagePair&, const Tensor64&,
                                        const Tensor64&,
                                        const BasicAdapterBank<double>&);
template AdaptGrads<float> adapt_backward(const StagePair&, const Tensor&,
                                          const AdapterBank&, const Tensor&);
template AdaptGrads<double> adapt_backward(const StagePair&, const Tensor64&,
                                           const BasicAdapterBank<double>&,
                                           const Tensor64&);

}  // namespace hgd
