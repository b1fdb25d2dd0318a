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
#ifndef HGD_IO_HPP_
#define HGD_IO_HPP_

#include <filesystem>
#include <string>
#include <string_view>

namespace hgd {

// Writes to a sibling temporary file and renames it over `path`. Parent
// directories are created. Throws DataError on failure.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

// Whole file as bytes; throws DataError naming the path.
std::string read_file(const std::filesystem::path& path);

}  // namespace hgd

#endif  // HGD_IO_HPP_
