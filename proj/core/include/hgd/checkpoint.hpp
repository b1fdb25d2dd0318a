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
#ifndef HGD_CHECKPOINT_HPP_
#define HGD_CHECKPOINT_HPP_

// Binary model checkpoints. All integers are little-endian u32 unless noted.
//
//   "HGD1"
//   u32 spec_len, spec_len bytes   DetectorSpec::canonical()
//   u64 spec_hash                  FNV-1a of the spec bytes
//   u32 array_count
//   per array: u32 name_len, name, u32 rank, u32 dims[rank],
//              f32 values[prod(dims)]
//
// Arrays are "<layer>.weight" and "<layer>.bias" in layer order.

#include <filesystem>
#include <optional>
#include <string>

#include "hgd/detector.hpp"

namespace hgd {

std::string encode_checkpoint(const Detector& model);
// Throws DataError on a bad magic, corrupt spec block, spec hash mismatch
// against `expected`, or array shape/name mismatch.
Detector decode_checkpoint(std::string_view bytes,
                           const std::optional<DetectorSpec>& expected = std::nullopt);

void save_checkpoint(const std::filesystem::path& path, const Detector& model);
Detector load_checkpoint(const std::filesystem::path& path,
                         const std::optional<DetectorSpec>& expected = std::nullopt);

}  // namespace hgd

#endif  // HGD_CHECKPOINT_HPP_
