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
#ifndef HGD_REWEIGHTING_HPP_
#define HGD_REWEIGHTING_HPP_

// Macro (per-stage) and micro (per-location) weights for the imitation loss.
//
//   focal          u_s = (1 - l_s / sum_k l_k)^gamma over the stage losses
//   stage_mean     u_s = mean_ij sigmoid(mean_c V_ij)
//   stage_variance u_s = mean_ij sigmoid(var_c V_ij)
//   spatial_*      v_ij = sigmoid(stat_c V_ij)
//   gt_mask        v_ij = 1 iff the cell centre lies inside a labelled box
//
// Statistics always come from the student feature before adaptation.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "hgd/box.hpp"
#include "hgd/imitation.hpp"
#include "hgd/matching.hpp"
#include "hgd/ops.hpp"

namespace hgd {

// Throws InvariantError on negative or non-finite losses. All-zero losses
// give uniform weights of 1.
std::vector<double> focal_stage_weights(std::span<const double> stage_losses,
                                        double gamma);

// sigmoid(channel_stats(mode)) as N x 1 x out_h x out_w; nearest-neighbour
// resized when the raw feature has a different resolution.
template <typename T>
Tensor64 spatial_stat_weights(const BasicTensor<T>& student_raw,
                              ChannelStat mode, std::size_t out_h,
                              std::size_t out_w);

double stage_weight_from_spatial(std::span<const double> v);

// One u per image of an N x 1 x H x W map.
std::vector<double> stage_weights_from_spatial(const Tensor64& v);

// Binary foreground mask, 1 x 1 x H x W.
Tensor64 gt_mask_weights(std::span<const BoundingBox> boxes, std::size_t h,
                         std::size_t w);
// Batched: one box list per image, N x 1 x H x W.
Tensor64 gt_mask_weights(std::span<const std::vector<BoundingBox>> boxes,
                         std::size_t h, std::size_t w);

// v per pair; `boxes` is only read for gt_mask.
template <typename T>
std::vector<Tensor64> micro_weights(MicroWeight mode,
                                    std::span<const BasicMatchedPair<T>> pairs,
                                    std::span<const std::vector<BoundingBox>> boxes);

// u[pair][image]; `stage_losses[pair][image]` is only read for focal.
template <typename T>
std::vector<std::vector<double>> macro_weights(
    const ImitationConfig& config, std::span<const BasicMatchedPair<T>> pairs,
    const std::vector<std::vector<double>>& stage_losses);

template <typename T>
WeightMaps compose_weights(const ImitationConfig& config,
                           std::span<const BasicMatchedPair<T>> pairs,
                           const std::vector<std::vector<double>>& stage_losses,
                           std::span<const std::vector<BoundingBox>> boxes);

// Throws InvariantError on negative or non-finite entries.
void validate(const WeightMaps& weights);

// H x W grid of image `image` of an N x 1 x H x W map, comma separated.
void write_grid_csv(std::ostream& os, const Tensor64& map, std::size_t image);

}  // namespace hgd

#endif  // HGD_REWEIGHTING_HPP_
