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
#ifndef HGD_SYNTH_DATA_HPP_
#define HGD_SYNTH_DATA_HPP_

// Synthetic detection scenes: coloured circles (class 0) and squares
// (class 1) on a noisy textured background, with tight boxes.
//
// On-disk layout:
//   images/NNNNN.ppm   binary P6, 8-bit
//   labels/NNNNN.txt   one "class_id x1 y1 x2 y2" line per box, 6 decimals
//   index.txt          one "NNNNN split" line per scene

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hgd/box.hpp"
#include "hgd/tensor.hpp"

namespace hgd {

struct LabeledScene {
  Tensor image;  // 3 x H x W, values k / 255
  std::vector<BoundingBox> boxes;
  std::uint64_t seed = 0;
};

struct SceneSpec {
  std::size_t size = 64;
  std::size_t num_classes = 2;
  std::size_t max_objects = 4;
  std::size_t min_side = 8;   // pixels
  std::size_t max_side = 28;  // pixels
  double noise = 0.06;        // per-pixel noise std
};

enum class ShapeKind { kCircle = 0, kSquare = 1 };

// Paints a filled shape whose bounding square has top-left (x0, y0) and side
// `side` pixels; returns the tight box of the painted pixels (normalised).
BoundingBox draw_shape(Tensor& image, ShapeKind kind, std::size_t x0,
                       std::size_t y0, std::size_t side,
                       const std::array<float, 3>& color);

// Deterministic in `seed`.
LabeledScene generate_scene(std::uint64_t seed, const SceneSpec& spec = {});

struct Dataset {
  std::map<std::string, std::vector<LabeledScene>> splits;

  // Throws DataError naming the split when it is absent.
  const std::vector<LabeledScene>& split(const std::string& name) const;
};

// `train` scenes then `test` scenes; scene i uses seed mix_seed(seed, i).
Dataset generate_dataset(std::uint64_t seed, std::size_t train, std::size_t test,
                         const SceneSpec& spec = {});

std::string encode_ppm(const Tensor& image);
Tensor decode_ppm(std::string_view bytes, const std::string& origin = "ppm");

std::string encode_labels(std::span<const BoundingBox> boxes);
// Throws DataError "<origin>:<line>: ..." on a malformed line.
std::vector<BoundingBox> decode_labels(std::string_view text,
                                       const std::string& origin = "labels");

// Scenes are numbered in split order: train first, then test, then any
// other split in name order.
void write_dataset(const std::filesystem::path& dir, const Dataset& data);
Dataset read_dataset(const std::filesystem::path& dir);

// Stacks scene images at `indices` into an N x 3 x H x W batch.
Tensor stack_images(std::span<const LabeledScene> scenes,
                    std::span<const std::size_t> indices);

}  // namespace hgd

#endif  // HGD_SYNTH_DATA_HPP_
