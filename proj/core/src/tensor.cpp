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
#include "hgd/tensor.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

namespace hgd {

std::string to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

bool finite_checks_enabled() {
  static const bool enabled = [] {
    const char* v = std::getenv("HGD_CHECK_FINITE");
    return v != nullptr && std::string(v) == "1";
  }();
  return enabled;
}

template <typename T>
void assert_finite(const BasicTensor<T>& t, std::string_view op) {
  for (std::size_t i = 0; i < t.numel(); ++i) {
    if (!std::isfinite(t[i])) {
      throw InvariantError(std::string(op) + ": non-finite value at flat index " +
                           std::to_string(i) + " of " + to_string(t.shape()));
    }
  }
}

template <typename T>
void require_nchw(const BasicTensor<T>& t, std::string_view what) {
  if (t.rank() != 4) {
    throw DimensionError(std::string(what) + ": expected NCHW tensor, got " +
                         to_string(t.shape()));
  }
}

template void assert_finite(const BasicTensor<float>&, std::string_view);
template void assert_finite(const BasicTensor<double>&, std::string_view);
template void require_nchw(const BasicTensor<float>&, std::string_view);
template void require_nchw(const BasicTensor<double>&, std::string_view);

}  // namespace hgd
