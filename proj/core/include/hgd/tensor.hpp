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
#ifndef HGD_TENSOR_HPP_
#define HGD_TENSOR_HPP_

#include <algorithm>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hgd/errors.hpp"

namespace hgd {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

// Dense row-major array. Feature maps use NCHW order.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T(0))
      : shape_(std::move(shape)), values_(shape_numel(shape_), fill) {}
  BasicTensor(Shape shape, std::vector<T> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != shape_numel(shape_)) {
      throw DimensionError("tensor shape " + to_string(shape_) + " needs " +
                           std::to_string(shape_numel(shape_)) +
                           " values, got " + std::to_string(values_.size()));
    }
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t numel() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }
  T* data() { return values_.data(); }
  const T* data() const { return values_.data(); }

  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }

  // NCHW element access; rank must be 4.
  T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return values_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  const T& at(std::size_t n, std::size_t c, std::size_t h,
              std::size_t w) const {
    return values_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  void fill(T value) { std::fill(values_.begin(), values_.end(), value); }

  // Reinterprets the values under a new shape with the same element count.
  BasicTensor reshaped(Shape shape) const {
    return BasicTensor(std::move(shape), values_);
  }

  template <typename U>
  BasicTensor<U> cast() const {
    return BasicTensor<U>(shape_, std::vector<U>(values_.begin(), values_.end()));
  }

  bool operator==(const BasicTensor&) const = default;

 private:
  Shape shape_;
  std::vector<T> values_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

// True when HGD_CHECK_FINITE=1 is set in the environment (read once).
bool finite_checks_enabled();

// Throws InvariantError naming `op` if any value is NaN or infinite.
template <typename T>
void assert_finite(const BasicTensor<T>& t, std::string_view op);

template <typename T>
inline void check_finite(const BasicTensor<T>& t, std::string_view op) {
  if (finite_checks_enabled()) assert_finite(t, op);
}

// Throws DimensionError unless `t` has rank 4.
template <typename T>
void require_nchw(const BasicTensor<T>& t, std::string_view what);

}  // namespace hgd

#endif  // HGD_TENSOR_HPP_
