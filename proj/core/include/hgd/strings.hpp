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
#ifndef HGD_STRINGS_HPP_
#define HGD_STRINGS_HPP_

// Small text helpers shared by the config, dataset and checkpoint readers.
// Parse failures throw ConfigError.

#include <cstddef>
#include <sstream>
#include <type_traits>
#include <string>
#include <string_view>
#include <vector>

namespace hgd {

std::vector<std::string> split(std::string_view s, char sep);
std::string trim(std::string_view s);

std::size_t parse_size(std::string_view s);
long long parse_int(std::string_view s);
double parse_double(std::string_view s);
std::vector<std::size_t> parse_size_list(std::string_view s);
std::vector<double> parse_double_list(std::string_view s);

// Shortest round-trip decimal form.
std::string format_double(double v);

template <typename Range>
std::string join_numbers(const Range& values, char sep = ',') {
  std::string out;
  bool first = true;
  for (const auto& v : values) {
    if (!first) out += sep;
    first = false;
    if constexpr (std::is_floating_point_v<std::decay_t<decltype(v)>>) {
      out += format_double(static_cast<double>(v));
    } else {
      out += std::to_string(v);
    }
  }
  return out;
}

}  // namespace hgd

#endif  // HGD_STRINGS_HPP_
