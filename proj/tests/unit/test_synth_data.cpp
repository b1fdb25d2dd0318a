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
#include <string>

#include "doctest.h"
#include "hgd/io.hpp"
#include "hgd/random.hpp"
#include "hgd/synth_data.hpp"

using namespace hgd;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("scenes are deterministic in the seed") {
  const auto a = generate_scene(42), b = generate_scene(42), c = generate_scene(43);
  CHECK(a.image == b.image);
  CHECK(a.boxes == b.boxes);
  CHECK(!(a.image == c.image));
}

TEST_CASE("scene contents respect the generator contract") {
  std::size_t counts[5] = {};
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto s = generate_scene(mix_seed(7, seed));
    REQUIRE(s.boxes.size() <= 4);
    ++counts[s.boxes.size()];
    CHECK(s.image.shape() == Shape{3, 64, 64});
    for (float v : s.image.values()) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
      const float k = v * 255.0f;
      CHECK(k == doctest::Approx(std::round(k)).epsilon(1e-5));
    }
    for (const auto& b : s.boxes) {
      CHECK(b.valid());
      CHECK((b.class_id == 0 || b.class_id == 1));
    }
  }
  for (auto c : counts) CHECK(c > 0);
}

TEST_CASE("rendered square matches its analytic extent") {
  Tensor image({3, 64, 64});
  const auto box = draw_shape(image, ShapeKind::kSquare, 10, 20, 12, {1.0f, 0.5f, 0.0f});
  CHECK(box.class_id == 1);
  CHECK(std::abs(box.x1 * 64 - 10) <= 1.0);
  CHECK(std::abs(box.y1 * 64 - 20) <= 1.0);
  CHECK(std::abs(box.x2 * 64 - 22) <= 1.0);
  CHECK(std::abs(box.y2 * 64 - 32) <= 1.0);
  CHECK(image[(0 * 64 + 25) * 64 + 15] == 1.0f);
  CHECK(image[(0 * 64 + 5) * 64 + 5] == 0.0f);

  Tensor disc({3, 64, 64});
  const auto circle = draw_shape(disc, ShapeKind::kCircle, 30, 30, 9, {1.0f, 1.0f, 1.0f});
  CHECK(circle.class_id == 0);
  CHECK(std::abs(circle.x1 * 64 - 30) <= 1.0);
  CHECK(std::abs(circle.x2 * 64 - 39) <= 1.0);
  CHECK(disc[(0 * 64 + 30) * 64 + 30] == 0.0f);  // corner of the bounding square
}

TEST_CASE("classes are balanced within 10 percent") {
  const auto data = generate_dataset(1, 400, 0);
  std::size_t per_class[2] = {};
  for (const auto& s : data.split("train")) {
    for (const auto& b : s.boxes) ++per_class[b.class_id];
  }
  const double total = static_cast<double>(per_class[0] + per_class[1]);
  CHECK(total > 0);
  CHECK(std::abs(static_cast<double>(per_class[0]) / total - 0.5) < 0.1);
}

TEST_CASE("labels encode and decode") {
  const std::vector<BoundingBox> boxes{{1, 0.1234567, 0.2, 0.5, 0.75}, {0, 0, 0, 1, 1}};
  const auto back = decode_labels(encode_labels(boxes));
  REQUIRE(back.size() == 2);
  CHECK(back[0].class_id == 1);
  CHECK(std::abs(back[0].x1 - 0.1234567) <= 1e-6);
  CHECK(back[1] == boxes[1]);
  CHECK(decode_labels("").empty());
  try {
    decode_labels("a b c", "labels/00003.txt");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("labels/00003.txt:1:") != std::string::npos);
  }
  CHECK_THROWS_AS(decode_labels("0 0.1 0.1 0.2 0.2\n0 0.5 0.5 0.4 0.6\n"), DataError);
}

TEST_CASE("ppm encode and decode") {
  const auto scene = generate_scene(5);
  const auto bytes = encode_ppm(scene.image);
  CHECK(bytes.rfind("P6\n64 64\n255\n", 0) == 0);
  CHECK(decode_ppm(bytes) == scene.image);
  CHECK_THROWS_AS(decode_ppm("P5\n1 1\n255\n\x01"), DataError);
  CHECK_THROWS_AS(decode_ppm(bytes.substr(0, bytes.size() - 1)), DataError);
}

TEST_CASE("dataset round trip through disk") {
  const auto dir = fresh_dir("hgd_test_dataset");
  const auto data = generate_dataset(3, 6, 4);
  write_dataset(dir, data);
  CHECK(fs::exists(dir / "images" / "00000.ppm"));
  CHECK(fs::exists(dir / "labels" / "00009.txt"));
  const auto back = read_dataset(dir);
  for (const char* split : {"train", "test"}) {
    const auto& a = data.split(split);
    const auto& b = back.split(split);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].image == b[i].image);
      REQUIRE(a[i].boxes.size() == b[i].boxes.size());
      for (std::size_t k = 0; k < a[i].boxes.size(); ++k) {
        CHECK(a[i].boxes[k].class_id == b[i].boxes[k].class_id);
        CHECK(std::abs(a[i].boxes[k].x1 - b[i].boxes[k].x1) <= 1e-6);
        CHECK(std::abs(a[i].boxes[k].y2 - b[i].boxes[k].y2) <= 1e-6);
      }
    }
  }
  CHECK_THROWS_AS(back.split("val"), DataError);

  // Regeneration reproduces the same bytes.
  const auto dir2 = fresh_dir("hgd_test_dataset2");
  write_dataset(dir2, generate_dataset(3, 6, 4));
  for (const char* f : {"index.txt", "images/00004.ppm", "labels/00007.txt"}) {
    CHECK(read_file(dir / f) == read_file(dir2 / f));
  }

  // A scene with no objects reads back empty.
  write_file_atomic(dir / "labels" / "00000.txt", "");
  CHECK(read_dataset(dir).split("train")[0].boxes.empty());

  write_file_atomic(dir / "labels" / "00001.txt", "0 0.1 0.1\n");
  CHECK_THROWS_AS(read_dataset(dir), DataError);
  fs::remove_all(dir);
  fs::remove_all(dir2);
  CHECK_THROWS_AS(read_dataset(dir), DataError);
}

TEST_CASE("stack_images builds a batch") {
  const auto data = generate_dataset(2, 3, 0);
  const std::vector<std::size_t> idx{2, 0};
  const auto batch = stack_images(data.split("train"), idx);
  CHECK(batch.shape() == Shape{2, 3, 64, 64});
  CHECK(batch[0] == data.split("train")[2].image[0]);
  CHECK(batch[3 * 64 * 64] == data.split("train")[0].image[0]);
}
