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
#include "hgd/reweighting.hpp"

#include <cmath>
#include <ostream>
#include <string>

namespace hgd {

std::vector<double> focal_stage_weights(std::span<const double> stage_losses,
                                        double gamma) {
  double total = 0;
  for (double l : stage_losses) {
    if (!(l >= 0) || !std::isfinite(l)) {
      throw InvariantError("focal weights: stage loss must be finite and >= 0, got " +
                           std::to_string(l));
    }
    total += l;
  }
  std::vector<double> u(stage_losses.size(), 1.0);
  if (total <= 0) return u;
  for (std::size_t s = 0; s < u.size(); ++s) {
    u[s] = std::pow(1.0 - stage_losses[s] / total, gamma);
  }
  return u;
}

template <typename T>
Tensor64 spatial_stat_weights(const BasicTensor<T>& student_raw,
                              ChannelStat mode, std::size_t out_h,
                              std::size_t out_w) {
  const BasicTensor<T> stats = channel_stats(student_raw, mode);
  Tensor64 v(stats.shape());
  for (std::size_t i = 0; i < stats.numel(); ++i) {
    v[i] = sigmoid_scalar(static_cast<double>(stats[i]));
  }
  return nearest_resize(v, out_h, out_w);
}

double stage_weight_from_spatial(std::span<const double> v) {
  if (v.empty()) throw DimensionError("stage weight: empty spatial map");
  double sum = 0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

std::vector<double> stage_weights_from_spatial(const Tensor64& v) {
  require_nchw(v, "stage_weights_from_spatial");
  const std::size_t plane = v.dim(1) * v.dim(2) * v.dim(3);
  std::vector<double> u;
  for (std::size_t n = 0; n < v.dim(0); ++n) {
    u.push_back(stage_weight_from_spatial(v.values().subspan(n * plane, plane)));
  }
  return u;
}

Tensor64 gt_mask_weights(std::span<const BoundingBox> boxes, std::size_t h,
                         std::size_t w) {
  Tensor64 mask({1, 1, h, w});
  for (std::size_t i = 0; i < h; ++i) {
    const double y = (static_cast<double>(i) + 0.5) / static_cast<double>(h);
    for (std::size_t j = 0; j < w; ++j) {
      const double x = (static_cast<double>(j) + 0.5) / static_cast<double>(w);
      for (const auto& b : boxes) {
        if (b.contains(x, y)) {
          mask[i * w + j] = 1.0;
          break;
        }
      }
    }
  }
  return mask;
}

Tensor64 gt_mask_weights(std::span<const std::vector<BoundingBox>> boxes,
                         std::size_t h, std::size_t w) {
  Tensor64 mask({boxes.size(), 1, h, w});
  for (std::size_t n = 0; n < boxes.size(); ++n) {
    const Tensor64 one = gt_mask_weights(boxes[n], h, w);
    std::copy(one.values().begin(), one.values().end(),
              mask.values().begin() + static_cast<std::ptrdiff_t>(n * h * w));
  }
  return mask;
}

template <typename T>
std::vector<Tensor64> micro_weights(MicroWeight mode,
                                    std::span<const BasicMatchedPair<T>> pairs,
                                    std::span<const std::vector<BoundingBox>> boxes) {
  std::vector<Tensor64> v;
  for (const auto& pair : pairs) {
    const auto& s = pair.student_adapted;
    const std::size_t n = s.dim(0), h = s.dim(2), w = s.dim(3);
    switch (mode) {
      case MicroWeight::kNone:
        v.emplace_back(Shape{n, 1, h, w}, 1.0);
        break;
      case MicroWeight::kSpatialMean:
        v.push_back(spatial_stat_weights(pair.student_raw, ChannelStat::kMean, h, w));
        break;
      case MicroWeight::kSpatialVariance:
        v.push_back(
            spatial_stat_weights(pair.student_raw, ChannelStat::kVariance, h, w));
        break;
      case MicroWeight::kGtMask:
        if (boxes.size() != n) {
          throw DimensionError("gt_mask: " + std::to_string(boxes.size()) +
                               " box lists for batch of " + std::to_string(n));
        }
        v.push_back(gt_mask_weights(boxes, h, w));
        break;
    }
  }
  return v;
}

template <typename T>
std::vector<std::vector<double>> macro_weights(
    const ImitationConfig& config, std::span<const BasicMatchedPair<T>> pairs,
    const std::vector<std::vector<double>>& stage_losses) {
  std::vector<std::vector<double>> u;
  if (pairs.empty()) return u;
  const std::size_t n = pairs.front().student_adapted.dim(0);
  switch (config.macro) {
    case MacroWeight::kNone:
      u.assign(pairs.size(), std::vector<double>(n, 1.0));
      break;
    case MacroWeight::kFocal: {
      if (stage_losses.size() != pairs.size()) {
        throw DimensionError("focal weights: stage loss count mismatch");
      }
      u.assign(pairs.size(), std::vector<double>(n, 1.0));
      std::vector<double> per_stage(pairs.size());
      for (std::size_t img = 0; img < n; ++img) {
        for (std::size_t s = 0; s < pairs.size(); ++s) {
          per_stage[s] = stage_losses[s].at(img);
        }
        const auto w = focal_stage_weights(per_stage, config.gamma);
        for (std::size_t s = 0; s < pairs.size(); ++s) u[s][img] = w[s];
      }
      break;
    }
    case MacroWeight::kStageMean:
    case MacroWeight::kStageVariance: {
      const ChannelStat mode = config.macro == MacroWeight::kStageMean
                                   ? ChannelStat::kMean
                                   : ChannelStat::kVariance;
      for (const auto& pair : pairs) {
        const auto& s = pair.student_adapted;
        u.push_back(stage_weights_from_spatial(
            spatial_stat_weights(pair.student_raw, mode, s.dim(2), s.dim(3))));
      }
      break;
    }
  }
  return u;
}

template <typename T>
WeightMaps compose_weights(const ImitationConfig& config,
                           std::span<const BasicMatchedPair<T>> pairs,
                           const std::vector<std::vector<double>>& stage_losses,
                           std::span<const std::vector<BoundingBox>> boxes) {
  WeightMaps w;
  w.v = micro_weights(config.micro, pairs, boxes);
  w.u = macro_weights(config, pairs, stage_losses);
  w.macro = std::string(name(config.macro));
  w.micro = std::string(name(config.micro));
  return w;
}

void validate(const WeightMaps& weights) {
  for (const auto& stage : weights.u) {
    for (double u : stage) {
      if (!(u >= 0) || !std::isfinite(u)) {
        throw InvariantError("macro weight out of range: " + std::to_string(u));
      }
    }
  }
  for (const auto& map : weights.v) {
    for (double v : map.values()) {
      if (!(v >= 0) || !std::isfinite(v)) {
        throw InvariantError("micro weight out of range: " + std::to_string(v));
      }
    }
  }
}

void write_grid_csv(std::ostream& os, const Tensor64& map, std::size_t image) {
  require_nchw(map, "write_grid_csv");
  const std::size_t h = map.dim(2), w = map.dim(3);
  const double* base = map.data() + image * map.dim(1) * h * w;
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      if (j) os << ',';
      os << base[i * w + j];
    }
    os << '\n';
  }
}

#define HGD_INSTANTIATE_REWEIGHTING(T)                                        \
  template Tensor64 spatial_stat_weights(const BasicTensor<T>&, ChannelStat,  \
                                         std::size_t, std::size_t);           \
  template std::vector<Tensor64> micro_weights(                               \
      MicroWeight, std::span<const BasicMatchedPair<T>>,                      \
      std::span<const std::vector<BoundingBox>>);                             \
  template std::vector<std::vector<double>> macro_weights(                    \
      const ImitationConfig&, std::span<const BasicMatchedPair<T>>,           \
      const std::vector<std::vector<double>>&);                               \
  template WeightMaps compose_weights(                                        \
      const ImitationConfig&, std::span<const BasicMatchedPair<T>>,           \
      const std::vector<std::vector<double>>&,                                \
      std::span<const std::vector<BoundingBox>>);

HGD_INSTANTIATE_REWEIGHTING(float)
HGD_INSTANTIATE_REWEIGHTING(double)

#undef HGD_INSTANTIATE_REWEIGHTING

}  // namespace hgd
