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
#ifndef HGD_ERRORS_HPP_
#define HGD_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace hgd {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Feature list violates the non-increasing spatial size rule.
class OrderingError : public Error {
 public:
  using Error::Error;
};

// Bad configuration value, unknown key or strategy name, missing adapter.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Unreadable or malformed dataset, report or checkpoint file.
class DataError : public Error {
 public:
  using Error::Error;
};

// An internal invariant failed (non-finite loss, teacher mutated, ...).
class InvariantError : public Error {
 public:
  using Error::Error;
};

// CLI exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitInvariant = 4;

}  // namespace hgd

#endif  // HGD_ERRORS_HPP_
