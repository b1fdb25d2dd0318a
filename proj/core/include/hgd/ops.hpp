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
#ifndef HGD_OPS_HPP_
#define HGD_OPS_HPP_

// Forward/backward pairs for the fixed op set used by the detector and the
// imitation losses. Every op is a pure function; backward functions take the
// forward inputs (or outputs, where cheaper) plus the upstream gradient.
// Instantiated for float (training) and double (gradient checks).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hgd/tensor.hpp"

namespace hgd {

// ---- convolution ----------------------------------------------------------

// Cross-correlation of an NCHW input with an OIKK kernel. `bias` is either
// empty or holds one value per output channel.
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                      std::size_t stride, std::size_t pad,
                      std::span<const T> bias = {});

template <typename T>
struct Conv2dGrads {
  BasicTensor<T> input;  // empty when not requested
  BasicTensor<T> kernel;
  std::vector<T> bias;
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const BasicTensor<T>& input,
                               const BasicTensor<T>& kernel,
                               const BasicTensor<T>& grad_output,
                               std::size_t stride, std::size_t pad,
                               bool want_input_grad = true);

// ---- resampling -----------------------------------------------------------

// Bilinear resize with the align-corners-false convention: the source
// coordinate of output index i is (i + 0.5) * in / out - 0.5, clamped to
// [0, in - 1].
template <typename T>
BasicTensor<T> bilinear_resize(const BasicTensor<T>& input, std::size_t out_h,
                               std::size_t out_w);

template <typename T>
BasicTensor<T> bilinear_resize_backward(const BasicTensor<T>& grad_output,
                                        std::size_t in_h, std::size_t in_w);

// Nearest-neighbour resize; source index floor((i + 0.5) * in / out).
template <typename T>
BasicTensor<T> nearest_resize(const BasicTensor<T>& input, std::size_t out_h,
                              std::size_t out_w);

// ---- statistics -----------------------------------------------------------

enum class ChannelStat { kMean, kVariance };

// Per-location statistic over the channel axis, N x 1 x H x W. Variance is
// the population variance (divides by C).
template <typename T>
BasicTensor<T> channel_stats(const BasicTensor<T>& feature, ChannelStat mode);

// ---- elementwise ----------------------------------------------------------

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x);
// Uses the forward output as the mask.
template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& output,
                             const BasicTensor<T>& grad_output);

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> sigmoid_backward(const BasicTensor<T>& output,
                                const BasicTensor<T>& grad_output);

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& x, T factor);
template <typename T>
BasicTensor<T> add_scalar(const BasicTensor<T>& x, T offset);

// In-place a += b; used for gradient accumulation.
template <typename T>
void accumulate(BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
inline T sigmoid_scalar(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

// ---- pooling --------------------------------------------------------------

template <typename T>
struct PoolResult {
  BasicTensor<T> output;
  std::vector<std::uint32_t> argmax;  // flat input index per output element
};

// 2x2 max pooling with stride 2; odd trailing rows/columns are dropped. Ties
// resolve to the first element in row-major window order.
template <typename T>
PoolResult<T> maxpool2x2(const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> maxpool2x2_backward(const BasicTensor<T>& grad_output,
                                   std::span<const std::uint32_t> argmax,
                                   const Shape& input_shape);

// ---- loss primitives ------------------------------------------------------

// -log softmax(logits)[class_index]. When `grad` is non-empty it receives
// d loss / d logits (softmax - onehot).
template <typename T>
T softmax_cross_entropy(std::span<const T> logits, std::size_t class_index,
                        std::span<T> grad = {});

// Smooth L1 with threshold 1: 0.5 d^2 for |d| < 1, |d| - 0.5 otherwise.
template <typename T>
inline T smooth_l1(T pred, T target) {
  const T d = pred - target;
  const T a = d < T(0) ? -d : d;
  return a < T(1) ? T(0.5) * d * d : a - T(0.5);
}

template <typename T>
inline T smooth_l1_grad(T pred, T target) {
  const T d = pred - target;
  if (d >= T(1)) return T(1);
  if (d <= T(-1)) return T(-1);
  return d;
}

// Sum of elementwise smooth L1; fills `grad` with d sum / d pred if given.
template <typename T>
T smooth_l1_sum(std::span<const T> pred, std::span<const T> target,
                std::span<T> grad = {});

}  // namespace hgd

#endif  // HGD_OPS_HPP_
