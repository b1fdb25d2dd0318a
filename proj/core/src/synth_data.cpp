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
#include "hgd/synth_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "hgd/io.hpp"
#include "hgd/random.hpp"
#include "hgd/strings.hpp"

namespace fs = std::filesystem;

namespace hgd {

namespace {

float quantize(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<float>(std::lround(c * 255.0)) / 255.0f;
}

std::string scene_name(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05zu", index);
  return buf;
}

double color_distance(const std::array<float, 3>& a, const std::array<float, 3>& b) {
  double d = 0;
  for (int c = 0; c < 3; ++c) d += (a[c] - b[c]) * (a[c] - b[c]);
  return std::sqrt(d);
}

bool overlaps(const BoundingBox& a, const BoundingBox& b, double margin) {
  return a.x1 < b.x2 + margin && b.x1 < a.x2 + margin && a.y1 < b.y2 + margin &&
         b.y1 < a.y2 + margin;
}

}  // namespace

BoundingBox draw_shape(Tensor& image, ShapeKind kind, std::size_t x0,
                       std::size_t y0, std::size_t side,
                       const std::array<float, 3>& color) {
  const std::size_t h = image.dim(1), w = image.dim(2);
  const double cx = static_cast<double>(x0) + 0.5 * static_cast<double>(side);
  const double cy = static_cast<double>(y0) + 0.5 * static_cast<double>(side);
  const double r2 = 0.25 * static_cast<double>(side * side);
  std::size_t min_x = w, min_y = h, max_x = 0, max_y = 0;
  for (std::size_t y = y0; y < std::min(y0 + side, h); ++y) {
    for (std::size_t x = x0; x < std::min(x0 + side, w); ++x) {
      if (kind == ShapeKind::kCircle) {
        const double dx = static_cast<double>(x) + 0.5 - cx;
        const double dy = static_cast<double>(y) + 0.5 - cy;
        if (dx * dx + dy * dy > r2) continue;
      }
      for (std::size_t c = 0; c < 3; ++c) image[(c * h + y) * w + x] = color[c];
      min_x = std::min(min_x, x);
      min_y = std::min(min_y, y);
      max_x = std::max(max_x, x);
      max_y = std::max(max_y, y);
    }
  }
  const double fw = static_cast<double>(w), fh = static_cast<double>(h);
  return {static_cast<int>(kind), static_cast<double>(min_x) / fw,
          static_cast<double>(min_y) / fh, static_cast<double>(max_x + 1) / fw,
          static_cast<double>(max_y + 1) / fh};
}

LabeledScene generate_scene(std::uint64_t seed, const SceneSpec& spec) {
  Rng rng(seed);
  const std::size_t s = spec.size;
  LabeledScene scene;
  scene.seed = seed;
  scene.image = Tensor({3, s, s});

  // Background: base colour plus two low-frequency waves per channel.
  std::array<float, 3> base{};
  for (auto& c : base) c = static_cast<float>(rng.uniform(0.2, 0.8));
  struct Wave { double fx, fy, phase, amp; };
  std::array<std::array<Wave, 2>, 3> waves{};
  for (auto& ch : waves) {
    for (auto& wv : ch) {
      wv = {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3),
            rng.uniform(0.0, 2.0 * std::numbers::pi), rng.uniform(0.03, 0.1)};
    }
  }
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < s; ++y) {
      for (std::size_t x = 0; x < s; ++x) {
        double v = base[c];
        for (const auto& wv : waves[c]) {
          v += wv.amp * std::sin(wv.fx * static_cast<double>(x) +
                                 wv.fy * static_cast<double>(y) + wv.phase);
        }
        scene.image[(c * s + y) * s + x] = static_cast<float>(v);
      }
    }
  }

  const auto count = static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<std::int64_t>(spec.max_objects)));
  for (std::size_t i = 0; i < count; ++i) {
    const auto kind = static_cast<ShapeKind>(
        rng.uniform_int(0, static_cast<std::int64_t>(spec.num_classes) - 1) % 2);
    std::array<float, 3> color{};
    do {
      for (auto& c : color) c = static_cast<float>(rng.uniform01());
    } while (color_distance(color, base) < 0.4);
    // Up to 20 placements; a shape that never fits without overlap is skipped.
    for (int attempt = 0; attempt < 20; ++attempt) {
      const auto side = static_cast<std::size_t>(rng.uniform_int(
          static_cast<std::int64_t>(spec.min_side), static_cast<std::int64_t>(spec.max_side)));
      const auto x0 = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(s - side)));
      const auto y0 = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(s - side)));
      const BoundingBox candidate{0, static_cast<double>(x0) / s, static_cast<double>(y0) / s,
                                  static_cast<double>(x0 + side) / s,
                                  static_cast<double>(y0 + side) / s};
      const bool clash = std::any_of(
          scene.boxes.begin(), scene.boxes.end(),
          [&](const BoundingBox& b) { return overlaps(b, candidate, 1.0 / s); });
      if (clash) continue;
      BoundingBox box = draw_shape(scene.image, kind, x0, y0, side, color);
      box.class_id = static_cast<int>(kind);
      scene.boxes.push_back(box);
      break;
    }
  }

  for (auto& v : scene.image.values()) v = quantize(v + rng.normal(0.0, spec.noise));
  return scene;
}

const std::vector<LabeledScene>& Dataset::split(const std::string& name) const {
  auto it = splits.find(name);
  if (it == splits.end()) throw DataError("dataset has no split '" + name + "'");
  return it->second;
}

Dataset generate_dataset(std::uint64_t seed, std::size_t train, std::size_t test,
                         const SceneSpec& spec) {
  Dataset d;
  auto& tr = d.splits["train"];
  auto& te = d.splits["test"];
  for (std::size_t i = 0; i < train + test; ++i) {
    (i < train ? tr : te).push_back(generate_scene(mix_seed(seed, i), spec));
  }
  return d;
}

std::string encode_ppm(const Tensor& image) {
  const std::size_t h = image.dim(1), w = image.dim(2);
  std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  out.reserve(out.size() + 3 * h * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = std::clamp<double>(image[(c * h + y) * w + x], 0.0, 1.0);
        out.push_back(static_cast<char>(std::lround(v * 255.0)));
      }
    }
  }
  return out;
}

Tensor decode_ppm(std::string_view bytes, const std::string& origin) {
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return std::string(bytes.substr(start, pos - start));
  };
  if (token() != "P6") throw DataError(origin + ": not a binary PPM (P6)");
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = parse_size(token());
    h = parse_size(token());
    maxval = parse_size(token());
  } catch (const ConfigError& e) {
    throw DataError(origin + ": bad PPM header: " + e.what());
  }
  if (maxval != 255 || w == 0 || h == 0) {
    throw DataError(origin + ": unsupported PPM geometry");
  }
  ++pos;  // single whitespace after maxval
  if (bytes.size() < pos + 3 * w * h) throw DataError(origin + ": truncated PPM");
  Tensor image({3, h, w});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const auto b = static_cast<unsigned char>(bytes[pos++]);
        image[(c * h + y) * w + x] = static_cast<float>(b) / 255.0f;
      }
    }
  }
  return image;
}

std::string encode_labels(std::span<const BoundingBox> boxes) {
  std::string out;
  char buf[128];
  for (const auto& b : boxes) {
    std::snprintf(buf, sizeof buf, "%d %.6f %.6f %.6f %.6f\n", b.class_id, b.x1, b.y1,
                  b.x2, b.y2);
    out += buf;
  }
  return out;
}

std::vector<BoundingBox> decode_labels(std::string_view text, const std::string& origin) {
  std::vector<BoundingBox> boxes;
  std::size_t line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::istringstream is(line);
    for (std::string f; is >> f;) fields.push_back(f);
    const std::string where = origin + ":" + std::to_string(line_no) + ": ";
    if (fields.size() != 5) {
      throw DataError(where + "expected 'class_id x1 y1 x2 y2', got '" + line + "'");
    }
    BoundingBox b;
    try {
      b.class_id = static_cast<int>(parse_int(fields[0]));
      b.x1 = parse_double(fields[1]);
      b.y1 = parse_double(fields[2]);
      b.x2 = parse_double(fields[3]);
      b.y2 = parse_double(fields[4]);
    } catch (const ConfigError& e) {
      throw DataError(where + e.what());
    }
    if (b.class_id < 0 || !b.valid()) {
      throw DataError(where + "degenerate or out-of-range box '" + line + "'");
    }
    boxes.push_back(b);
  }
  return boxes;
}

void write_dataset(const fs::path& dir, const Dataset& data) {
  std::vector<std::string> order;
  for (const char* s : {"train", "test"}) {
    if (data.splits.count(s)) order.emplace_back(s);
  }
  for (const auto& [name, scenes] : data.splits) {
    if (name != "train" && name != "test") order.push_back(name);
  }
  std::string index;
  std::size_t n = 0;
  for (const auto& split_name : order) {
    for (const auto& scene : data.splits.at(split_name)) {
      const std::string id = scene_name(n++);
      write_file_atomic(dir / "images" / (id + ".ppm"), encode_ppm(scene.image));
      write_file_atomic(dir / "labels" / (id + ".txt"), encode_labels(scene.boxes));
      index += id + " " + split_name + "\n";
    }
  }
  write_file_atomic(dir / "index.txt", index);
}

Dataset read_dataset(const fs::path& dir) {
  const fs::path index_path = dir / "index.txt";
  const std::string index = read_file(index_path);
  Dataset d;
  std::size_t line_no = 0;
  for (const auto& raw : split(index, '\n')) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const auto sp = line.find(' ');
    if (sp == std::string::npos) {
      throw DataError(index_path.string() + ":" + std::to_string(line_no) +
                      ": expected 'NNNNN split'");
    }
    const std::string id = line.substr(0, sp);
    const std::string split_name = trim(line.substr(sp + 1));
    const fs::path img = dir / "images" / (id + ".ppm");
    const fs::path lab = dir / "labels" / (id + ".txt");
    LabeledScene scene;
    scene.image = decode_ppm(read_file(img), img.string());
    scene.boxes = decode_labels(read_file(lab), lab.string());
    d.splits[split_name].push_back(std::move(scene));
  }
  return d;
}

Tensor stack_images(std::span<const LabeledScene> scenes,
                    std::span<const std::size_t> indices) {
  if (indices.empty()) throw DimensionError("stack_images: empty batch");
  const Shape& s = scenes[indices[0]].image.shape();
  Tensor batch({indices.size(), s[0], s[1], s[2]});
  const std::size_t stride = shape_numel(s);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const Tensor& img = scenes[indices[i]].image;
    if (img.shape() != s) throw DimensionError("stack_images: mixed image shapes");
    std::copy(img.values().begin(), img.values().end(),
              batch.values().begin() + static_cast<std::ptrdiff_t>(i * stride));
  }
  return batch;
}

}  // namespace hgd
