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
#ifndef HGD_BOX_HPP_
#define HGD_BOX_HPP_

#include <algorithm>

namespace hgd {

inline constexpr double kMinBoxArea = 1e-4;

// Axis-aligned box in normalised [0, 1] image coordinates.
struct BoundingBox {
  int class_id = 0;
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  double cx() const { return 0.5 * (x1 + x2); }
  double cy() const { return 0.5 * (y1 + y2); }

  bool contains(double x, double y) const {
    return x >= x1 && x <= x2 && y >= y1 && y <= y2;
  }
  // x1 < x2, y1 < y2, inside [0,1]^2 and at least kMinBoxArea.
  bool valid() const {
    return x1 < x2 && y1 < y2 && x1 >= 0 && y1 >= 0 && x2 <= 1 && y2 <= 1 &&
           area() >= kMinBoxArea;
  }

  bool operator==(const BoundingBox&) const = default;
};

struct ScoredBox {
  BoundingBox box;
  double score = 0;
};

// Intersection over union; 0 when the union is empty.
inline double iou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

}  // namespace hgd

#endif  // HGD_BOX_HPP_
