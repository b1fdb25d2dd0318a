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
#include "hgd/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>

#include "hgd/hash.hpp"
#include "hgd/io.hpp"

namespace hgd {

namespace {

constexpr char kMagic[4] = {'H', 'G', 'D', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_array(std::string& out, const std::string& name, const Shape& shape,
               std::span<const float> values) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out += name;
  put_u32(out, static_cast<std::uint32_t>(shape.size()));
  for (auto d : shape) put_u32(out, static_cast<std::uint32_t>(d));
  for (float v : values) put_u32(out, std::bit_cast<std::uint32_t>(v));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view take(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw DataError("checkpoint truncated");
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint32_t u32() {
    auto b = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    }
    return v;
  }
  std::uint64_t u64() {
    const std::uint64_t lo = u32();
    return lo | (static_cast<std::uint64_t>(u32()) << 32);
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

void read_array(Reader& r, const std::string& expected_name, const Shape& expected_shape,
                std::span<float> dst) {
  const std::string name(r.take(r.u32()));
  if (name != expected_name) {
    throw DataError("checkpoint: expected array '" + expected_name + "', found '" +
                    name + "'");
  }
  Shape shape(r.u32());
  for (auto& d : shape) d = r.u32();
  if (shape != expected_shape) {
    throw DataError("checkpoint: array '" + name + "' has shape " + to_string(shape) +
                    ", model expects " + to_string(expected_shape));
  }
  for (float& v : dst) v = std::bit_cast<float>(r.u32());
}

}  // namespace

std::string encode_checkpoint(const Detector& model) {
  std::string out(kMagic, 4);
  const std::string spec = model.spec().canonical();
  put_u32(out, static_cast<std::uint32_t>(spec.size()));
  out += spec;
  put_u64(out, fnv1a64(spec));
  put_u32(out, static_cast<std::uint32_t>(2 * model.layers().size()));
  for (const auto& l : model.layers()) {
    put_array(out, l.name + ".weight", l.weight.shape(), l.weight.values());
    put_array(out, l.name + ".bias", {l.bias.size()}, l.bias);
  }
  return out;
}

Detector decode_checkpoint(std::string_view bytes,
                           const std::optional<DetectorSpec>& expected) {
  Reader r(bytes);
  if (r.take(4) != std::string_view(kMagic, 4)) {
    throw DataError("checkpoint: bad magic (expected HGD1)");
  }
  const std::string spec_text(r.take(r.u32()));
  const std::uint64_t stored_hash = r.u64();
  if (stored_hash != fnv1a64(spec_text)) {
    throw DataError("checkpoint: spec block corrupt (hash mismatch)");
  }
  if (expected && expected->hash() != stored_hash) {
    throw DataError("checkpoint: spec hash " + hex64(stored_hash) +
                    " does not match expected " + hex64(expected->hash()));
  }
  DetectorSpec spec;
  try {
    spec = DetectorSpec::parse(spec_text);
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint: bad spec block: ") + e.what());
  }
  Detector model = [&] {
    try {
      return Detector(spec);
    } catch (const ConfigError& e) {
      throw DataError(std::string("checkpoint: bad spec block: ") + e.what());
    }
  }();
  const std::uint32_t count = r.u32();
  if (count != 2 * model.layers().size()) {
    throw DataError("checkpoint: " + std::to_string(count) + " arrays, model has " +
                    std::to_string(2 * model.layers().size()));
  }
  for (auto& l : model.layers()) {
    read_array(r, l.name + ".weight", l.weight.shape(), l.weight.values());
    read_array(r, l.name + ".bias", {l.bias.size()}, l.bias);
  }
  if (!r.done()) throw DataError("checkpoint: trailing bytes");
  return model;
}

void save_checkpoint(const std::filesystem::path& path, const Detector& model) {
  write_file_atomic(path, encode_checkpoint(model));
}

Detector load_checkpoint(const std::filesystem::path& path,
                         const std::optional<DetectorSpec>& expected) {
  try {
    return decode_checkpoint(read_file(path), expected);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace hgd
