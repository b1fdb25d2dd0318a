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
#ifndef HGD_DETECTOR_HPP_
#define HGD_DETECTOR_HPP_

// A small single-shot detector.
//
// Backbone: per stage, 2x2 max pool followed by `blocks_per_stage` of
// (3x3 conv, pad 1 -> relu). Every relu output is a feature, in forward
// order, so a 64x64 input with four stages yields features at 32, 16, 8 and
// 4. Heads are 3x3 convs on the last feature of selected stages, predicting
// per cell (num_classes + 1) logits (index 0 is background) and four box
// offsets for one square anchor.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hgd/box.hpp"
#include "hgd/ops.hpp"
#include "hgd/tensor.hpp"

namespace hgd {

struct DetectorSpec {
  std::vector<std::size_t> widths{16, 32, 64, 64};
  std::size_t blocks_per_stage = 2;
  std::vector<std::size_t> head_stages{1, 2, 3};
  std::vector<double> anchor_scales{2.0, 2.0, 2.0};  // per head stage
  std::size_t num_classes = 2;
  std::size_t input_size = 64;
  std::size_t input_channels = 3;

  // Same architecture with ceil(width / 2) channels per stage.
  DetectorSpec halved() const;
  // Throws ConfigError.
  void validate() const;

  std::size_t stage_count() const { return widths.size(); }
  std::size_t stage_size(std::size_t stage) const {
    return input_size >> (stage + 1);
  }
  std::size_t stage_stride(std::size_t stage) const {
    return std::size_t{1} << (stage + 1);
  }
  std::size_t feature_count() const { return widths.size() * blocks_per_stage; }
  std::size_t anchor_count() const;
  std::size_t head_channels() const { return num_classes + 1 + 4; }

  // Sorted key=value lines; the checkpoint spec block.
  std::string canonical() const;
  static DetectorSpec parse(std::string_view canonical);
  std::uint64_t hash() const;

  bool operator==(const DetectorSpec&) const = default;
};

// One square anchor per cell of every head stage, centred on the cell, side
// scale * stride / input_size, clamped to [0, 1]^2. Order: head stage, then
// row-major cells.
struct AnchorGrid {
  std::vector<BoundingBox> boxes;
  std::vector<std::size_t> head_begin;
};
AnchorGrid make_anchors(const DetectorSpec& spec);

template <typename T>
struct DetectionOutput {
  BasicTensor<T> logits;   // N x A x (num_classes + 1)
  BasicTensor<T> offsets;  // N x A x 4 (dx, dy, dw, dh)
};

struct Layer {
  std::string name;
  Tensor weight;            // O x I x K x K
  std::vector<float> bias;  // O
};

struct ParamGrads {
  std::vector<Tensor> weight;
  std::vector<std::vector<float>> bias;

  void add(const ParamGrads& other);
  void scale(float factor);
};

// Extra gradient flowing into backbone feature `index` (e.g. from imitation).
struct FeatureGrad {
  std::size_t index = 0;
  Tensor grad;
};

class Detector {
 public:
  // All parameters zero.
  explicit Detector(DetectorSpec spec);
  // He-uniform backbone, small uniform heads, zero biases.
  static Detector create(DetectorSpec spec, std::uint64_t seed);

  const DetectorSpec& spec() const { return spec_; }
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::size_t parameter_count() const;
  // FNV-1a over the spec and every parameter bit pattern.
  std::uint64_t parameter_hash() const;

  std::size_t backbone_layer(std::size_t stage, std::size_t block) const {
    return stage * spec_.blocks_per_stage + block;
  }
  std::size_t head_layer(std::size_t head) const {
    return spec_.feature_count() + head;
  }
  // Feature index of the last block of `stage`.
  std::size_t stage_output(std::size_t stage) const {
    return backbone_layer(stage, spec_.blocks_per_stage - 1);
  }

  struct Pass {
    std::vector<Tensor> features;  // every post-relu backbone output
    DetectionOutput<float> outputs;
    std::vector<Tensor> pooled;  // per stage, conv input of block 0
    std::vector<std::vector<std::uint32_t>> pool_argmax;
    std::vector<Shape> pool_input_shape;
  };

  // Throws DimensionError when images are not N x C x S x S per the spec.
  Pass forward(const Tensor& images) const;
  DetectionOutput<float> infer(const Tensor& images) const {
    return forward(images).outputs;
  }

  ParamGrads zero_grads() const;
  ParamGrads backward(const Pass& pass, const DetectionOutput<float>& grad,
                      std::span<const FeatureGrad> feature_grads = {}) const;

 private:
  DetectorSpec spec_;
  std::vector<Layer> layers_;
};

// Per-anchor assignment: label 0 is background, k + 1 is class k.
struct AnchorTarget {
  int label = 0;
  std::array<double, 4> offset{};
};

// Centre/size encoding with the usual SSD variances:
//   dx = (cx_gt - cx_a) / (w_a * 0.1),  dw = log(w_gt / w_a) / 0.2
inline constexpr double kCenterVariance = 0.1;
inline constexpr double kSizeVariance = 0.2;
std::array<double, 4> encode_box(const BoundingBox& gt, const BoundingBox& anchor);
BoundingBox decode_box(std::span<const double, 4> offset, const BoundingBox& anchor);

// Positive when IoU >= pos_iou with some box (best box wins); each box's
// best anchor is forced positive. Offsets use the centre/size encoding.
std::vector<AnchorTarget> assign_targets(const AnchorGrid& anchors,
                                         std::span<const BoundingBox> boxes,
                                         double pos_iou = 0.5);

template <typename T>
struct DetectionLoss {
  double l_c = 0;  // classification, batch mean
  double l_l = 0;  // localisation, batch mean
  DetectionOutput<T> grad;  // d L_c / d logits, d L_l / d offsets
};

inline constexpr std::size_t kNegativeRatio = 3;
inline constexpr std::size_t kNegativesWithoutPositives = 8;

// L_l: mean smooth-L1 over positive anchors and the four coordinates.
// L_c: mean softmax cross-entropy over positives and the hardest negatives
// (3 per positive, or 8 when the image has no positives).
template <typename T>
DetectionLoss<T> detection_loss(const DetectionOutput<T>& outputs,
                                std::span<const std::vector<AnchorTarget>> targets,
                                bool want_grad = true);

// Greedy per-class suppression, highest score first; ties keep input order.
std::vector<ScoredBox> nms(std::vector<ScoredBox> boxes, double iou_threshold);

// Decodes image `image` of `outputs`: softmax, drop background, threshold,
// per-class NMS. Result sorted by descending score, at most max_detections.
std::vector<ScoredBox> infer_decode(const DetectionOutput<float>& outputs,
                                    std::size_t image, const AnchorGrid& anchors,
                                    double score_threshold, double nms_iou,
                                    std::size_t max_detections = 100);

}  // namespace hgd

#endif  // HGD_DETECTOR_HPP_
