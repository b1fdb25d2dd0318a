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
#include <string>
#include <vector>

#include "doctest.h"
#include "hgd/evaluation.hpp"
#include "hgd/random.hpp"

using namespace hgd;

namespace {

BoundingBox box_at(double x, double y, double s = 0.1, int cls = 0) {
  return {cls, x, y, x + s, y + s};
}

// 3 GT; detections in score order are TP, FP, TP, TP.
struct Fixture {
  std::vector<BoundingBox> gts{box_at(0.1, 0.1), box_at(0.4, 0.4), box_at(0.7, 0.7)};
  std::vector<ScoredBox> dets{{box_at(0.1, 0.1), 0.9},
                              {box_at(0.85, 0.1), 0.8},
                              {box_at(0.4, 0.4), 0.7},
                              {box_at(0.7, 0.7), 0.6}};
};

}  // namespace

TEST_CASE("iou examples") {
  const BoundingBox a{0, 0, 0, 1, 1};
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, {0, 2, 2, 3, 3}) == 0.0);
  CHECK(iou(a, {0, 0.5, 0, 1.5, 1}) == 1.0 / 3.0);
}

TEST_CASE("average_precision examples") {
  const Fixture f;
  CHECK(average_precision(f.dets, f.gts) == 5.0 / 6.0);

  const std::vector<ScoredBox> perfect{{f.gts[0], 0.9}, {f.gts[1], 0.8}, {f.gts[2], 0.7}};
  CHECK(average_precision(perfect, f.gts) == 1.0);
  CHECK(average_precision(std::span<const ScoredBox>{}, f.gts) == 0.0);
}

TEST_CASE("duplicate detections of one object count as false positives") {
  const std::vector<BoundingBox> gts{box_at(0.1, 0.1)};
  const std::vector<ImageDetection> dets{{0, {box_at(0.1, 0.1), 0.9}},
                                         {0, {box_at(0.1, 0.1), 0.8}}};
  const std::vector<std::vector<BoundingBox>> per_image{gts};
  const auto s = average_precision(dets, per_image);
  CHECK(s.ap == 1.0);
  CHECK(s.tp == 1);
  CHECK(s.fp == 1);
}

TEST_CASE("AP depends only on the score ranking") {
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    std::vector<BoundingBox> gts;
    std::vector<ScoredBox> dets;
    for (int k = 0; k < 5; ++k) {
      const auto g = box_at(rng.uniform(0, 0.8), rng.uniform(0, 0.8), 0.15);
      gts.push_back(g);
      auto d = g;
      d.x1 += rng.uniform(-0.05, 0.05);
      d.x2 += rng.uniform(-0.05, 0.05);
      dets.push_back({d, rng.uniform(0.1, 1.0)});
      dets.push_back({box_at(rng.uniform(0, 0.8), rng.uniform(0, 0.8), 0.1), rng.uniform(0.1, 1.0)});
    }
    const double ap = average_precision(dets, gts);
    for (double c : {0.5, 3.0}) {
      auto scaled = dets;
      for (auto& d : scaled) d.score *= c;
      CHECK(average_precision(scaled, gts) == ap);
    }
    auto extra = dets;
    extra.push_back({box_at(0.95, 0.95, 0.04), 0.01});
    for (const auto& g : gts) REQUIRE(iou(g, extra.back().box) == 0.0);
    CHECK(average_precision(extra, gts) <= ap);
  }
}

TEST_CASE("mean_ap examples") {
  const Fixture f;
  SUBCASE("one class") {
    const std::vector<std::vector<ScoredBox>> dets{f.dets};
    const std::vector<std::vector<BoundingBox>> gts{f.gts};
    const auto r = mean_ap(dets, gts, 1);
    CHECK(r.map == 5.0 / 6.0);
    CHECK(r.classes[0].tp == 3);
    CHECK(r.classes[0].fp == 1);
    CHECK(r.classes[0].fn == 0);
    CHECK(r.classes[0].num_gt == 3);
  }
  SUBCASE("two classes with AP 1 and 0") {
    const std::vector<std::vector<ScoredBox>> dets{{{box_at(0.1, 0.1), 0.9}}};
    const std::vector<std::vector<BoundingBox>> gts{{box_at(0.1, 0.1), box_at(0.5, 0.5, 0.1, 1)}};
    const auto r = mean_ap(dets, gts, 2);
    CHECK(r.classes[0].ap == 1.0);
    CHECK(r.classes[1].ap == 0.0);
    CHECK(r.classes[1].fn == 1);
    CHECK(r.map == 0.5);
  }
  SUBCASE("a class without GT is left out of the mean") {
    const std::vector<std::vector<ScoredBox>> dets{
        {{box_at(0.1, 0.1), 0.9}, {box_at(0.5, 0.5, 0.1, 1), 0.9}}};
    const std::vector<std::vector<BoundingBox>> gts{{box_at(0.1, 0.1)}};
    const auto r = mean_ap(dets, gts, 2);
    CHECK(r.map == 1.0);
    CHECK(r.classes.size() == 2);
  }
  SUBCASE("threshold sweep and json") {
    const std::vector<std::vector<ScoredBox>> dets{f.dets};
    const std::vector<std::vector<BoundingBox>> gts{f.gts};
    const std::vector<double> sweep{0.5, 0.75};
    const auto r = mean_ap(dets, gts, 1, 0.5, sweep);
    REQUIRE(r.sweep_map.size() == 2);
    CHECK(r.sweep_map[0] == r.map);
    const auto json = r.to_json();
    CHECK(json.find("\"mAP\"") != std::string::npos);
    CHECK(json == mean_ap(dets, gts, 1, 0.5, sweep).to_json());
  }
  SUBCASE("detections across images match only their own image") {
    const std::vector<std::vector<ScoredBox>> dets{{}, {{box_at(0.1, 0.1), 0.9}}};
    const std::vector<std::vector<BoundingBox>> gts{{box_at(0.1, 0.1)}, {}};
    CHECK(mean_ap(dets, gts, 1).map == 0.0);
  }
}
