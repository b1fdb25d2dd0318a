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
#ifndef HGD_EVALUATION_HPP_
#define HGD_EVALUATION_HPP_

// VOC-style mean average precision with all-point interpolation.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hgd/box.hpp"

namespace hgd {

struct ClassResult {
  int class_id = 0;
  double ap = 0;
  std::size_t tp = 0, fp = 0, fn = 0, num_gt = 0;
};

struct EvalResult {
  double iou_threshold = 0.5;
  std::vector<ClassResult> classes;  // every class in [0, num_classes)
  double map = 0;                    // over classes with at least one GT
  // mAP at each extra threshold, when requested.
  std::vector<double> sweep_thresholds;
  std::vector<double> sweep_map;

  std::string to_json() const;
};

// Detections of one class across images: image index plus scored box.
struct ImageDetection {
  std::size_t image = 0;
  ScoredBox det;
};

struct ApStats {
  double ap = 0;
  std::size_t tp = 0, fp = 0;
};

// Greedy matching in descending score order (stable for ties) against
// unmatched GT of the same image with IoU >= threshold; AP is the area under
// the monotone precision envelope.
ApStats average_precision(std::span<const ImageDetection> detections,
                          std::span<const std::vector<BoundingBox>> gts,
                          double iou_threshold = 0.5);

// Single-image convenience form.
double average_precision(std::span<const ScoredBox> detections,
                         std::span<const BoundingBox> gts,
                         double iou_threshold = 0.5);

// `detections[i]` and `gts[i]` belong to image i; classes are read from the
// boxes. Extra thresholds fill the sweep fields.
EvalResult mean_ap(std::span<const std::vector<ScoredBox>> detections,
                   std::span<const std::vector<BoundingBox>> gts,
                   std::size_t num_classes, double iou_threshold = 0.5,
                   std::span<const double> sweep = {});

}  // namespace hgd

#endif  // HGD_EVALUATION_HPP_
