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
#include "hgd/evaluation.hpp"

#include <algorithm>
#include <numeric>

#include "json.hpp"

namespace hgd {

ApStats average_precision(std::span<const ImageDetection> detections,
                          std::span<const std::vector<BoundingBox>> gts,
                          double iou_threshold) {
  std::size_t npos = 0;
  std::vector<std::vector<bool>> used(gts.size());
  for (std::size_t i = 0; i < gts.size(); ++i) {
    npos += gts[i].size();
    used[i].assign(gts[i].size(), false);
  }
  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].det.score > detections[b].det.score;
  });

  ApStats out;
  std::vector<double> precision, recall;
  precision.reserve(order.size());
  recall.reserve(order.size());
  std::vector<bool> is_tp;
  for (std::size_t k : order) {
    const auto& d = detections[k];
    const auto& g = gts[d.image];
    double best = -1.0;
    std::size_t best_j = g.size();
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (used[d.image][j]) continue;
      const double o = iou(d.det.box, g[j]);
      if (o > best) {
        best = o;
        best_j = j;
      }
    }
    const bool tp = best_j < g.size() && best >= iou_threshold;
    if (tp) {
      used[d.image][best_j] = true;
      ++out.tp;
    } else {
      ++out.fp;
    }
    is_tp.push_back(tp);
    precision.push_back(static_cast<double>(out.tp) / static_cast<double>(out.tp + out.fp));
    recall.push_back(npos ? static_cast<double>(out.tp) / static_cast<double>(npos) : 0.0);
  }
  if (npos == 0) return out;

  // Envelope from the right, then sum precision over the recall steps.
  for (std::size_t i = precision.size(); i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  double ap = 0;
  for (std::size_t i = 0; i < precision.size(); ++i) {
    if (is_tp[i]) ap += precision[i];
  }
  out.ap = ap / static_cast<double>(npos);
  return out;
}

double average_precision(std::span<const ScoredBox> detections,
                         std::span<const BoundingBox> gts, double iou_threshold) {
  std::vector<ImageDetection> dets;
  for (const auto& d : detections) dets.push_back({0, d});
  const std::vector<std::vector<BoundingBox>> g{{gts.begin(), gts.end()}};
  return average_precision(dets, g, iou_threshold).ap;
}

namespace {

EvalResult evaluate_at(std::span<const std::vector<ScoredBox>> detections,
                       std::span<const std::vector<BoundingBox>> gts,
                       std::size_t num_classes, double thr) {
  EvalResult r;
  r.iou_threshold = thr;
  double sum = 0;
  std::size_t counted = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    const int cls = static_cast<int>(c);
    std::vector<ImageDetection> dets;
    std::vector<std::vector<BoundingBox>> g(gts.size());
    for (std::size_t i = 0; i < gts.size(); ++i) {
      for (const auto& b : gts[i]) {
        if (b.class_id == cls) g[i].push_back(b);
      }
      if (i < detections.size()) {
        for (const auto& d : detections[i]) {
          if (d.box.class_id == cls) dets.push_back({i, d});
        }
      }
    }
    ClassResult cr;
    cr.class_id = cls;
    for (const auto& v : g) cr.num_gt += v.size();
    const ApStats s = average_precision(dets, g, thr);
    cr.ap = s.ap;
    cr.tp = s.tp;
    cr.fp = s.fp;
    cr.fn = cr.num_gt - s.tp;
    if (cr.num_gt > 0) {
      sum += cr.ap;
      ++counted;
    }
    r.classes.push_back(cr);
  }
  r.map = counted ? sum / static_cast<double>(counted) : 0.0;
  return r;
}

}  // namespace

EvalResult mean_ap(std::span<const std::vector<ScoredBox>> detections,
                   std::span<const std::vector<BoundingBox>> gts,
                   std::size_t num_classes, double iou_threshold,
                   std::span<const double> sweep) {
  EvalResult r = evaluate_at(detections, gts, num_classes, iou_threshold);
  for (double t : sweep) {
    r.sweep_thresholds.push_back(t);
    r.sweep_map.push_back(evaluate_at(detections, gts, num_classes, t).map);
  }
  return r;
}

std::string EvalResult::to_json() const {
  nlohmann::ordered_json j;
  j["iou_threshold"] = iou_threshold;
  j["mAP"] = map;
  auto& arr = j["classes"] = nlohmann::ordered_json::array();
  for (const auto& c : classes) {
    arr.push_back({{"class_id", c.class_id},
                   {"ap", c.ap},
                   {"num_gt", c.num_gt},
                   {"tp", c.tp},
                   {"fp", c.fp},
                   {"fn", c.fn}});
  }
  if (!sweep_thresholds.empty()) {
    auto& sw = j["sweep"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < sweep_thresholds.size(); ++i) {
      sw.push_back({{"iou_threshold", sweep_thresholds[i]}, {"mAP", sweep_map[i]}});
    }
  }
  return j.dump(2) + "\n";
}

}  // namespace hgd
