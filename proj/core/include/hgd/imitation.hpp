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
#ifndef HGD_IMITATION_HPP_
#define HGD_IMITATION_HPP_

// Feature imitation losses.
//
// A per-location loss compares the student channel vector V and the teacher
// channel vector Z at every (i, j) of a matched stage. Stage losses are the
// (optionally weighted) spatial average of those terms and the imitation loss
// L_i sums stages:
//
//   L_i = sum_s u_s * (1 / sum_ij v_sij) * sum_ij v_sij * l(V_sij, Z_sij)
//
// With u = 1 and v = 1 this is the plain per-stage mean. Batches are handled
// by averaging the per-image value over the batch. Weights are constants:
// no gradient flows into u, v, or the teacher features.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hgd/matching.hpp"
#include "hgd/tensor.hpp"

namespace hgd {

enum class Metric { kL2, kCosine };
enum class MacroWeight { kNone, kFocal, kStageMean, kStageVariance };
enum class MicroWeight { kNone, kSpatialMean, kSpatialVariance, kGtMask };

std::string_view name(Metric m);
std::string_view name(MacroWeight m);
std::string_view name(MicroWeight m);
Metric parse_metric(std::string_view s);
MacroWeight parse_macro(std::string_view s);
MicroWeight parse_micro(std::string_view s);

struct ImitationConfig {
  Metric metric = Metric::kCosine;
  MacroWeight macro = MacroWeight::kNone;
  MicroWeight micro = MicroWeight::kNone;
  double gamma = 2.0;    // focal exponent
  double lambda1 = 1.0;  // localisation weight
  // Imitation weight. Unset means auto-scale once at the end of warmup so
  // that lambda2 * L_i matches L_c + lambda1 * L_l, times lambda2_scale.
  std::optional<double> lambda2;
  double lambda2_scale = 1.0;
  double epsilon = 1e-8;  // cosine denominator guard

  // Throws ConfigError on negative gamma/lambdas or non-positive epsilon.
  void validate() const;
};

// Squared Euclidean distance. `grad_v`, if non-empty, receives 2 (V - Z).
template <typename T>
double l2_imitation(std::span<const T> v, std::span<const T> z,
                    std::span<T> grad_v = {});

// 1 - V.Z / max(|V| |Z|, epsilon), with the cosine clamped to [-1, 1]. A zero
// vector therefore scores 1. `grad_v` receives d loss / d V.
template <typename T>
double cosine_imitation(std::span<const T> v, std::span<const T> z,
                        double epsilon, std::span<T> grad_v = {});

// Per-location loss map (N x 1 x H x W) between two NCHW tensors.
template <typename T>
Tensor64 imitation_map(const BasicTensor<T>& student,
                       const BasicTensor<T>& teacher, Metric metric,
                       double epsilon);

// Gradient of sum_{n,i,j} weight_nij * l(V_nij, Z_nij) w.r.t. the student.
template <typename T>
BasicTensor<T> imitation_map_backward(const BasicTensor<T>& student,
                                      const BasicTensor<T>& teacher,
                                      Metric metric, double epsilon,
                                      const Tensor64& weight);

// Macro weights u[pair][image] and micro maps v[pair] (N x 1 x H x W).
struct WeightMaps {
  std::vector<std::vector<double>> u;
  std::vector<Tensor64> v;
  std::string macro = "none";
  std::string micro = "none";
};

template <typename T>
struct ImitationResult {
  double loss = 0.0;                // L_i, batch mean
  std::vector<double> stage_loss;   // weighted contribution per pair
  std::vector<double> stage_raw;    // unweighted stage mean per pair
  std::vector<double> stage_u;      // batch-mean u per pair
  std::vector<std::size_t> skipped; // images whose sum v was 0, per pair
  std::vector<BasicTensor<T>> grad; // d L_i / d student_adapted per pair
};

// Unweighted aggregation (u = 1, v = 1).
template <typename T>
ImitationResult<T> aggregate_imitation(std::span<const BasicMatchedPair<T>> pairs,
                                       Metric metric, double epsilon,
                                       bool want_grad = false);

// Weighted aggregation. A stage whose sum v is 0 for an image contributes 0
// for that image and is counted in `skipped`.
template <typename T>
ImitationResult<T> reweighted_aggregate(
    std::span<const BasicMatchedPair<T>> pairs, Metric metric, double epsilon,
    const WeightMaps& weights, bool want_grad = false);

// Per-pair, per-image normalised stage term (1 / sum v) sum v l, or 0 when
// sum v is 0. An empty `v` means uniform weights.
template <typename T>
std::vector<std::vector<double>> stage_terms(
    std::span<const BasicMatchedPair<T>> pairs, Metric metric, double epsilon,
    std::span<const Tensor64> v = {});

struct StageLossBreakdown {
  double l_c = 0, l_l = 0, l_i = 0;
  double lambda1 = 0, lambda2 = 0;
  double total = 0;
  std::vector<double> stage_raw;
  std::vector<double> stage_weighted;
  std::vector<double> u;
  std::vector<std::size_t> skipped;
};

// L_c + lambda1 * L_l + lambda2 * L_i. Throws InvariantError naming the first
// non-finite component.
double total_loss(double l_c, double l_l, double l_i, double lambda1,
                  double lambda2);

}  // namespace hgd

#endif  // HGD_IMITATION_HPP_
