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
#include <cmath>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "hgd/checkpoint.hpp"
#include "hgd/detector.hpp"
#include "support/gradcheck.hpp"

using namespace hgd;
using hgd::testing::check_gradient;
using hgd::testing::random_tensor;

namespace {

DetectionOutput<double> random_outputs(Rng& rng, std::size_t n, std::size_t anchors,
                                       std::size_t classes) {
  return {random_tensor<double>({n, anchors, classes + 1}, rng, -2, 2),
          random_tensor<double>({n, anchors, 4}, rng, -2, 2)};
}

}  // namespace

TEST_CASE("forward exposes every feature in stage order") {
  const auto model = Detector::create(DetectorSpec{}, 1);
  Rng rng(2);
  const auto images = random_tensor<float>({3, 3, 64, 64}, rng, 0, 1);
  const auto pass = model.forward(images);
  REQUIRE(pass.features.size() == 8);
  const std::size_t sizes[] = {32, 32, 16, 16, 8, 8, 4, 4};
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(pass.features[i].dim(0) == 3);
    CHECK(pass.features[i].dim(2) == sizes[i]);
    CHECK(pass.features[i].dim(3) == sizes[i]);
  }
  const std::size_t anchors = 16 * 16 + 8 * 8 + 4 * 4;
  CHECK(pass.outputs.logits.shape() == Shape{3, anchors, 3});
  CHECK(pass.outputs.offsets.shape() == Shape{3, anchors, 4});
  CHECK(make_anchors(model.spec()).boxes.size() == anchors);
}

TEST_CASE("teacher and student share spatial sizes") {
  const DetectorSpec teacher;
  const auto student_spec = teacher.halved();
  CHECK(student_spec.widths == std::vector<std::size_t>{8, 16, 32, 32});
  const auto t = Detector::create(teacher, 1), s = Detector::create(student_spec, 1);
  Rng rng(3);
  const auto images = random_tensor<float>({1, 3, 64, 64}, rng, 0, 1);
  const auto ft = t.forward(images).features, fs = s.forward(images).features;
  for (std::size_t i = 0; i < ft.size(); ++i) {
    CHECK(ft[i].dim(2) == fs[i].dim(2));
    CHECK(fs[i].dim(1) * 2 == ft[i].dim(1));
  }
  CHECK(static_cast<double>(s.parameter_count()) <
        0.3 * static_cast<double>(t.parameter_count()));
}

TEST_CASE("odd widths round up when halved") {
  DetectorSpec spec;
  spec.widths = {15, 33, 7, 1};
  CHECK(spec.halved().widths == std::vector<std::size_t>{8, 17, 4, 1});
}

TEST_CASE("forward rejects a wrong input size") {
  const auto model = Detector::create(DetectorSpec{}, 1);
  CHECK_THROWS_AS(model.forward(Tensor({1, 3, 32, 32})), DimensionError);
  CHECK_THROWS_AS(model.forward(Tensor({1, 1, 64, 64})), DimensionError);
}

TEST_CASE("spec validation") {
  DetectorSpec spec;
  spec.head_stages = {1, 4};
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = {};
  spec.anchor_scales = {2.0};
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = {};
  CHECK(DetectorSpec::parse(spec.canonical()) == spec);
  CHECK(spec.hash() != spec.halved().hash());
}

TEST_CASE("anchors lie in the unit square") {
  for (const auto& a : make_anchors(DetectorSpec{}).boxes) {
    CHECK(a.x1 >= 0.0);
    CHECK(a.y1 >= 0.0);
    CHECK(a.x2 <= 1.0);
    CHECK(a.y2 <= 1.0);
  }
}

TEST_CASE("box encoding round trip") {
  const BoundingBox anchor{0, 0.2, 0.2, 0.4, 0.4};
  const BoundingBox gt{0, 0.25, 0.18, 0.5, 0.41};
  const auto off = encode_box(gt, anchor);
  const auto back = decode_box(std::span<const double, 4>(off), anchor);
  CHECK(back.x1 == doctest::Approx(gt.x1));
  CHECK(back.y1 == doctest::Approx(gt.y1));
  CHECK(back.x2 == doctest::Approx(gt.x2));
  CHECK(back.y2 == doctest::Approx(gt.y2));
}

TEST_CASE("assign_targets examples") {
  AnchorGrid grid;
  grid.boxes = {{0, 0.0, 0.0, 0.5, 0.5}, {0, 0.5, 0.5, 1.0, 1.0}, {0, 0.0, 0.5, 0.5, 1.0}};
  grid.head_begin = {0};

  SUBCASE("anchor equal to the box") {
    const std::vector<BoundingBox> boxes{{1, 0.0, 0.0, 0.5, 0.5}};
    const auto t = assign_targets(grid, boxes);
    CHECK(t[0].label == 2);
    for (double o : t[0].offset) CHECK(o == doctest::Approx(0.0).scale(1.0));
    CHECK(t[1].label == 0);
    CHECK(t[2].label == 0);
  }
  SUBCASE("no boxes") {
    for (const auto& t : assign_targets(grid, {})) CHECK(t.label == 0);
  }
  SUBCASE("best anchor below the IoU threshold is still positive") {
    // Box [0.5,0.5,0.8,0.9] has IoU 0.12 / 0.25 = 0.48 with anchor 1.
    const std::vector<BoundingBox> boxes{{0, 0.5, 0.5, 0.8, 0.9}};
    CHECK(iou(grid.boxes[1], boxes[0]) == doctest::Approx(0.48));
    const auto t = assign_targets(grid, boxes);
    CHECK(t[1].label == 1);
    CHECK(t[0].label == 0);
  }
}

TEST_CASE("detection_loss: constant offset error d gives 0.5 d^2") {
  const std::size_t anchors = 12;
  std::vector<std::vector<AnchorTarget>> targets(2, std::vector<AnchorTarget>(anchors));
  targets[0][3] = {1, {0.1, -0.2, 0.3, 0.0}};
  targets[1][5] = {2, {0.0, 0.4, -0.1, 0.2}};
  targets[1][7] = {1, {0.2, 0.2, 0.2, 0.2}};
  DetectionOutput<double> out{Tensor64({2, anchors, 3}), Tensor64({2, anchors, 4})};
  const double d = 0.3;
  for (std::size_t n = 0; n < 2; ++n) {
    for (std::size_t a = 0; a < anchors; ++a) {
      for (std::size_t k = 0; k < 4; ++k) {
        out.offsets[(n * anchors + a) * 4 + k] = targets[n][a].offset[k] + d;
      }
    }
  }
  const auto loss = detection_loss<double>(out, targets);
  CHECK(loss.l_l == doctest::Approx(0.5 * d * d).epsilon(1e-12));
}

TEST_CASE("detection_loss vanishes for confident correct outputs") {
  const std::size_t anchors = 40;
  std::vector<std::vector<AnchorTarget>> targets(1, std::vector<AnchorTarget>(anchors));
  targets[0][2] = {1, {0.1, 0.1, 0.1, 0.1}};
  targets[0][9] = {2, {0.5, -0.5, 0.0, 0.3}};
  DetectionOutput<double> out{Tensor64({1, anchors, 3}), Tensor64({1, anchors, 4})};
  for (std::size_t a = 0; a < anchors; ++a) {
    out.logits[a * 3 + static_cast<std::size_t>(targets[0][a].label)] = 50.0;
    for (std::size_t k = 0; k < 4; ++k) out.offsets[a * 4 + k] = targets[0][a].offset[k];
  }
  const auto loss = detection_loss<double>(out, targets);
  CHECK(loss.l_c < 1e-12);
  CHECK(loss.l_l == 0.0);
}

TEST_CASE("without positives only the eight hardest negatives count") {
  const std::size_t anchors = 20;
  std::vector<std::vector<AnchorTarget>> targets(1, std::vector<AnchorTarget>(anchors));
  DetectionOutput<double> out{Tensor64({1, anchors, 3}), Tensor64({1, anchors, 4})};
  // Every anchor scores log(3) under uniform logits; ten of them are made easy.
  for (std::size_t a = 0; a < 10; ++a) out.logits[a * 3] = 30.0;
  const auto loss = detection_loss<double>(out, targets);
  CHECK(loss.l_l == 0.0);
  CHECK(loss.l_c == doctest::Approx(std::log(3.0)));
}

TEST_CASE("detection_loss gradients match finite differences") {
  const auto spec = [] {
    DetectorSpec s;
    s.widths = {4, 4, 4, 4};
    return s;
  }();
  const auto anchors = make_anchors(spec);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    std::vector<std::vector<AnchorTarget>> targets;
    for (int n = 0; n < 2; ++n) {
      std::vector<BoundingBox> boxes;
      for (int k = 0; k < static_cast<int>(seed % 3); ++k) {
        const double x = rng.uniform(0, 0.6), y = rng.uniform(0, 0.6), s = rng.uniform(0.1, 0.4);
        boxes.push_back({static_cast<int>(k % 2), x, y, x + s, y + s});
      }
      targets.push_back(assign_targets(anchors, boxes));
    }
    const auto out = random_outputs(rng, 2, anchors.boxes.size(), 2);
    const auto loss = detection_loss<double>(out, targets);
    CHECK(check_gradient<double>(
              [&](const Tensor64& l) {
                return detection_loss<double>({l, out.offsets}, targets, false).l_c;
              },
              out.logits, loss.grad.logits) < 1e-4);
    if (seed % 3 != 0) {
      CHECK(check_gradient<double>(
                [&](const Tensor64& o) {
                  return detection_loss<double>({out.logits, o}, targets, false).l_l;
                },
                out.offsets, loss.grad.offsets) < 1e-4);
    }
  }
}

TEST_CASE("nms fixtures") {
  SUBCASE("identical boxes keep one") {
    const BoundingBox b{0, 0.1, 0.1, 0.5, 0.5};
    CHECK(nms({{b, 0.9}, {b, 0.8}}, 0.45).size() == 1);
  }
  SUBCASE("different classes do not suppress each other") {
    const BoundingBox a{0, 0.1, 0.1, 0.5, 0.5}, b{1, 0.1, 0.1, 0.5, 0.5};
    CHECK(nms({{a, 0.9}, {b, 0.8}}, 0.45).size() == 2);
  }
  SUBCASE("three boxes straddling the threshold") {
    // A-B IoU 0.6 (suppressed), A-C IoU 1/3 (kept), B-C irrelevant.
    const BoundingBox a{0, 0.0, 0.0, 1.0, 0.5};
    const BoundingBox b{0, 0.0, 0.0, 0.6, 0.5};
    const BoundingBox c{0, 0.5, 0.0, 1.5, 0.5};
    CHECK(iou(a, b) == doctest::Approx(0.6));
    CHECK(iou(a, c) == doctest::Approx(1.0 / 3.0));
    const auto kept = nms({{b, 0.8}, {c, 0.7}, {a, 0.9}}, 0.5);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].box == a);
    CHECK(kept[1].box == c);
  }
}

TEST_CASE("infer_decode thresholds scores") {
  const DetectorSpec spec;
  const auto anchors = make_anchors(spec);
  const std::size_t a_count = anchors.boxes.size();
  DetectionOutput<float> out{Tensor({1, a_count, 3}), Tensor({1, a_count, 4})};
  for (std::size_t a = 0; a < a_count; ++a) out.logits[a * 3] = 10.0f;
  CHECK(infer_decode(out, 0, anchors, 0.05, 0.45).empty());
  out.logits[7 * 3 + 2] = 20.0f;
  const auto dets = infer_decode(out, 0, anchors, 0.05, 0.45);
  REQUIRE(dets.size() == 1);
  CHECK(dets[0].box.class_id == 1);
  CHECK(dets[0].box.x1 == doctest::Approx(anchors.boxes[7].x1));
}

TEST_CASE("forward is deterministic and zero weights give zero features") {
  const auto model = Detector::create(DetectorSpec{}, 9);
  Rng rng(1);
  const auto images = random_tensor<float>({2, 3, 64, 64}, rng, 0, 1);
  CHECK(model.forward(images).outputs.logits == model.forward(images).outputs.logits);
  CHECK(Detector::create(DetectorSpec{}, 9).parameter_hash() == model.parameter_hash());
  CHECK(Detector::create(DetectorSpec{}, 10).parameter_hash() != model.parameter_hash());

  const Detector zero(DetectorSpec{});
  for (const auto& f : zero.forward(images).features) {
    for (float v : f.values()) CHECK(v == 0.0f);
  }
}

TEST_CASE("backbone backward agrees with finite differences on a tiny model") {
  DetectorSpec spec;
  spec.widths = {2, 2, 2, 2};
  spec.blocks_per_stage = 1;
  spec.input_size = 16;
  auto model = Detector::create(spec, 4);
  Rng rng(6);
  const auto images = random_tensor<float>({1, 3, 16, 16}, rng, 0, 1);
  const auto anchors = make_anchors(spec);
  const std::vector<BoundingBox> boxes{{0, 0.1, 0.2, 0.6, 0.7}};
  const std::vector<std::vector<AnchorTarget>> targets{assign_targets(anchors, boxes)};
  const auto pass = model.forward(images);
  const auto loss = detection_loss<float>(pass.outputs, targets);
  const auto grads = model.backward(pass, loss.grad);
  // Head layers sit after the last relu, so the objective is smooth in them.
  const std::size_t head = model.head_layer(0);
  auto objective = [&](const Tensor& w) {
    Detector m = model;
    m.layers()[head].weight = w;
    const auto l = detection_loss<float>(m.forward(images).outputs, targets, false);
    return l.l_c + l.l_l;
  };
  CHECK(check_gradient<float>(objective, model.layers()[head].weight, grads.weight[head],
                              1e-2) < 1e-2);
}

TEST_CASE("checkpoint round trip and rejection") {
  const auto model = Detector::create(DetectorSpec{}.halved(), 3);
  const auto bytes = encode_checkpoint(model);
  const auto back = decode_checkpoint(bytes);
  CHECK(back.parameter_hash() == model.parameter_hash());
  CHECK(back.spec() == model.spec());

  CHECK_THROWS_AS(decode_checkpoint(bytes, DetectorSpec{}), DataError);
  CHECK_THROWS_AS(decode_checkpoint("XXXX" + bytes.substr(4)), DataError);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), DataError);
  CHECK_THROWS_AS(decode_checkpoint(bytes + "z"), DataError);

  const auto dir = std::filesystem::temp_directory_path() / "hgd_test_checkpoint";
  std::filesystem::remove_all(dir);
  save_checkpoint(dir / "m.hgd", model);
  CHECK(load_checkpoint(dir / "m.hgd", model.spec()).parameter_hash() == model.parameter_hash());
  try {
    load_checkpoint(dir / "m.hgd", DetectorSpec{});
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("m.hgd") != std::string::npos);
  }
  std::filesystem::remove_all(dir);
}
