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
#include "hgd/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace hgd {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

struct ConvDims {
  std::size_t n, c, h, w;  // input
  std::size_t o, k;        // kernel
  std::size_t oh, ow;      // output
  std::size_t stride, pad;

  std::size_t patch() const { return c * k * k; }
  std::size_t out_plane() const { return oh * ow; }
  bool pointwise() const { return k == 1 && stride == 1 && pad == 0; }
};

template <typename T>
ConvDims conv_dims(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                   std::size_t stride, std::size_t pad) {
  require_nchw(input, "conv2d input");
  require_nchw(kernel, "conv2d kernel");
  if (kernel.dim(1) != input.dim(1) || kernel.dim(2) != kernel.dim(3)) {
    throw DimensionError("conv2d: kernel " + to_string(kernel.shape()) +
                         " incompatible with input " + to_string(input.shape()));
  }
  if (stride < 1) throw DimensionError("conv2d: stride must be >= 1");
  ConvDims d{input.dim(0), input.dim(1), input.dim(2), input.dim(3),
             kernel.dim(0), kernel.dim(2), 0, 0, stride, pad};
  if (d.h + 2 * pad < d.k || d.w + 2 * pad < d.k) {
    throw DimensionError("conv2d: kernel " + to_string(kernel.shape()) +
                         " larger than padded input " + to_string(input.shape()));
  }
  d.oh = (d.h + 2 * pad - d.k) / stride + 1;
  d.ow = (d.w + 2 * pad - d.k) / stride + 1;
  return d;
}

// col[(c*K + ki)*K + kj][oy*OW + ox] = img[c][oy*s - p + ki][ox*s - p + kj].
template <typename T>
void im2col(const T* img, const ConvDims& d, T* col) {
  const long pad = static_cast<long>(d.pad);
  for (std::size_t c = 0; c < d.c; ++c) {
    for (std::size_t ki = 0; ki < d.k; ++ki) {
      for (std::size_t kj = 0; kj < d.k; ++kj) {
        T* row = col + ((c * d.k + ki) * d.k + kj) * d.out_plane();
        for (std::size_t oy = 0; oy < d.oh; ++oy) {
          const long y = static_cast<long>(oy * d.stride + ki) - pad;
          T* dst = row + oy * d.ow;
          if (y < 0 || y >= static_cast<long>(d.h)) {
            std::fill(dst, dst + d.ow, T(0));
            continue;
          }
          const T* src = img + (c * d.h + static_cast<std::size_t>(y)) * d.w;
          for (std::size_t ox = 0; ox < d.ow; ++ox) {
            const long x = static_cast<long>(ox * d.stride + kj) - pad;
            dst[ox] = (x < 0 || x >= static_cast<long>(d.w))
                          ? T(0)
                          : src[static_cast<std::size_t>(x)];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, const ConvDims& d, T* img) {
  const long pad = static_cast<long>(d.pad);
  for (std::size_t c = 0; c < d.c; ++c) {
    for (std::size_t ki = 0; ki < d.k; ++ki) {
      for (std::size_t kj = 0; kj < d.k; ++kj) {
        const T* row = col + ((c * d.k + ki) * d.k + kj) * d.out_plane();
        for (std::size_t oy = 0; oy < d.oh; ++oy) {
          const long y = static_cast<long>(oy * d.stride + ki) - pad;
          if (y < 0 || y >= static_cast<long>(d.h)) continue;
          const T* src = row + oy * d.ow;
          T* dst = img + (c * d.h + static_cast<std::size_t>(y)) * d.w;
          for (std::size_t ox = 0; ox < d.ow; ++ox) {
            const long x = static_cast<long>(ox * d.stride + kj) - pad;
            if (x >= 0 && x < static_cast<long>(d.w)) {
              dst[static_cast<std::size_t>(x)] += src[ox];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b,
                        const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

struct LinearTap {
  std::size_t lo, hi;
  double frac;  // weight of `hi`
};

std::vector<LinearTap> bilinear_taps(std::size_t in, std::size_t out) {
  std::vector<LinearTap> taps(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * ratio - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto lo = static_cast<std::size_t>(std::floor(src));
    taps[i] = {lo, std::min(lo + 1, in - 1), src - static_cast<double>(lo)};
  }
  return taps;
}

}  // namespace

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                      std::size_t stride, std::size_t pad,
                      std::span<const T> bias) {
  const ConvDims d = conv_dims(input, kernel, stride, pad);
  if (!bias.empty() && bias.size() != d.o) {
    throw DimensionError("conv2d: bias length " + std::to_string(bias.size()) +
                         " != output channels " + std::to_string(d.o));
  }
  BasicTensor<T> out({d.n, d.o, d.oh, d.ow});
  std::vector<T> col(d.pointwise() ? 0 : d.patch() * d.out_plane());
  const ConstMatMap<T> weights(kernel.data(), d.o, d.patch());
  for (std::size_t n = 0; n < d.n; ++n) {
    const T* img = input.data() + n * d.c * d.h * d.w;
    const T* cols = img;
    if (!d.pointwise()) {
      im2col(img, d, col.data());
      cols = col.data();
    }
    MatMap<T> dst(out.data() + n * d.o * d.out_plane(), d.o, d.out_plane());
    dst.noalias() = weights * ConstMatMap<T>(cols, d.patch(), d.out_plane());
    if (!bias.empty()) dst.colwise() += Eigen::Map<const Eigen::Vector<T, Eigen::Dynamic>>(bias.data(), d.o);
  }
  check_finite(out, "conv2d");
  return out;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const BasicTensor<T>& input,
                               const BasicTensor<T>& kernel,
                               const BasicTensor<T>& grad_output,
                               std::size_t stride, std::size_t pad,
                               bool want_input_grad) {
  const ConvDims d = conv_dims(input, kernel, stride, pad);
  if (grad_output.shape() != Shape{d.n, d.o, d.oh, d.ow}) {
    throw DimensionError("conv2d_backward: grad " +
                         to_string(grad_output.shape()) + " vs expected " +
                         to_string(Shape{d.n, d.o, d.oh, d.ow}));
  }
  Conv2dGrads<T> g;
  g.kernel = BasicTensor<T>(kernel.shape());
  g.bias.assign(d.o, T(0));
  if (want_input_grad) g.input = BasicTensor<T>(input.shape());

  std::vector<T> col(d.pointwise() ? 0 : d.patch() * d.out_plane());
  std::vector<T> grad_col(want_input_grad && !d.pointwise()
                              ? d.patch() * d.out_plane()
                              : 0);
  const ConstMatMap<T> weights(kernel.data(), d.o, d.patch());
  MatMap<T> grad_weights(g.kernel.data(), d.o, d.patch());
  for (std::size_t n = 0; n < d.n; ++n) {
    const T* img = input.data() + n * d.c * d.h * d.w;
    const ConstMatMap<T> gout(grad_output.data() + n * d.o * d.out_plane(), d.o,
                              d.out_plane());
    const T* cols = img;
    if (!d.pointwise()) {
      im2col(img, d, col.data());
      cols = col.data();
    }
    grad_weights.noalias() +=
        gout * ConstMatMap<T>(cols, d.patch(), d.out_plane()).transpose();
    for (std::size_t o = 0; o < d.o; ++o) g.bias[o] += gout.row(o).sum();
    if (want_input_grad) {
      T* gin = g.input.data() + n * d.c * d.h * d.w;
      if (d.pointwise()) {
        MatMap<T>(gin, d.patch(), d.out_plane()).noalias() =
            weights.transpose() * gout;
      } else {
        MatMap<T>(grad_col.data(), d.patch(), d.out_plane()).noalias() =
            weights.transpose() * gout;
        col2im(grad_col.data(), d, gin);
      }
    }
  }
  return g;
}

template <typename T>
BasicTensor<T> bilinear_resize(const BasicTensor<T>& input, std::size_t out_h,
                               std::size_t out_w) {
  require_nchw(input, "bilinear_resize");
  if (out_h < 1 || out_w < 1) {
    throw DimensionError("bilinear_resize: output size must be >= 1");
  }
  const std::size_t h = input.dim(2), w = input.dim(3);
  if (h == out_h && w == out_w) return input;
  const std::size_t planes = input.dim(0) * input.dim(1);
  const auto ty = bilinear_taps(h, out_h);
  const auto tx = bilinear_taps(w, out_w);
  BasicTensor<T> out({input.dim(0), input.dim(1), out_h, out_w});
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = input.data() + p * h * w;
    T* dst = out.data() + p * out_h * out_w;
    for (std::size_t y = 0; y < out_h; ++y) {
      const T fy = static_cast<T>(ty[y].frac);
      const T* r0 = src + ty[y].lo * w;
      const T* r1 = src + ty[y].hi * w;
      for (std::size_t x = 0; x < out_w; ++x) {
        const T fx = static_cast<T>(tx[x].frac);
        const T top = (T(1) - fx) * r0[tx[x].lo] + fx * r0[tx[x].hi];
        const T bot = (T(1) - fx) * r1[tx[x].lo] + fx * r1[tx[x].hi];
        dst[y * out_w + x] = (T(1) - fy) * top + fy * bot;
      }
    }
  }
  check_finite(out, "bilinear_resize");
  return out;
}

template <typename T>
BasicTensor<T> bilinear_resize_backward(const BasicTensor<T>& grad_output,
                                        std::size_t in_h, std::size_t in_w) {
  require_nchw(grad_output, "bilinear_resize_backward");
  const std::size_t out_h = grad_output.dim(2), out_w = grad_output.dim(3);
  if (in_h == out_h && in_w == out_w) return grad_output;
  const std::size_t planes = grad_output.dim(0) * grad_output.dim(1);
  const auto ty = bilinear_taps(in_h, out_h);
  const auto tx = bilinear_taps(in_w, out_w);
  BasicTensor<T> grad({grad_output.dim(0), grad_output.dim(1), in_h, in_w});
  for (std::size_t p = 0; p < planes; ++p) {
    const T* g = grad_output.data() + p * out_h * out_w;
    T* dst = grad.data() + p * in_h * in_w;
    for (std::size_t y = 0; y < out_h; ++y) {
      const T fy = static_cast<T>(ty[y].frac);
      T* r0 = dst + ty[y].lo * in_w;
      T* r1 = dst + ty[y].hi * in_w;
      for (std::size_t x = 0; x < out_w; ++x) {
        const T fx = static_cast<T>(tx[x].frac);
        const T v = g[y * out_w + x];
        r0[tx[x].lo] += (T(1) - fy) * (T(1) - fx) * v;
        r0[tx[x].hi] += (T(1) - fy) * fx * v;
        r1[tx[x].lo] += fy * (T(1) - fx) * v;
        r1[tx[x].hi] += fy * fx * v;
      }
    }
  }
  return grad;
}

template <typename T>
BasicTensor<T> nearest_resize(const BasicTensor<T>& input, std::size_t out_h,
                              std::size_t out_w) {
  require_nchw(input, "nearest_resize");
  if (out_h < 1 || out_w < 1) {
    throw DimensionError("nearest_resize: output size must be >= 1");
  }
  const std::size_t h = input.dim(2), w = input.dim(3);
  if (h == out_h && w == out_w) return input;
  auto index = [](std::size_t i, std::size_t in, std::size_t out) {
    return std::min((2 * i + 1) * in / (2 * out), in - 1);
  };
  const std::size_t planes = input.dim(0) * input.dim(1);
  BasicTensor<T> out({input.dim(0), input.dim(1), out_h, out_w});
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t y = 0; y < out_h; ++y) {
      const std::size_t sy = index(y, h, out_h);
      for (std::size_t x = 0; x < out_w; ++x) {
        out[(p * out_h + y) * out_w + x] =
            input[(p * h + sy) * w + index(x, w, out_w)];
      }
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> channel_stats(const BasicTensor<T>& feature, ChannelStat mode) {
  require_nchw(feature, "channel_stats");
  const std::size_t n = feature.dim(0), c = feature.dim(1);
  const std::size_t plane = feature.dim(2) * feature.dim(3);
  if (c == 0) throw DimensionError("channel_stats: zero channels");
  BasicTensor<T> out({n, 1, feature.dim(2), feature.dim(3)});
  std::vector<double> mean(plane), sq(plane);
  for (std::size_t b = 0; b < n; ++b) {
    std::fill(mean.begin(), mean.end(), 0.0);
    const T* f = feature.data() + b * c * plane;
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t i = 0; i < plane; ++i) mean[i] += f[ch * plane + i];
    }
    for (double& m : mean) m /= static_cast<double>(c);
    T* dst = out.data() + b * plane;
    if (mode == ChannelStat::kMean) {
      for (std::size_t i = 0; i < plane; ++i) dst[i] = static_cast<T>(mean[i]);
      continue;
    }
    std::fill(sq.begin(), sq.end(), 0.0);
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t i = 0; i < plane; ++i) {
        const double d = f[ch * plane + i] - mean[i];
        sq[i] += d * d;
      }
    }
    for (std::size_t i = 0; i < plane; ++i) {
      dst[i] = static_cast<T>(sq[i] / static_cast<double>(c));
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
  BasicTensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
  check_finite(out, "relu");
  return out;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& output,
                             const BasicTensor<T>& grad_output) {
  require_same_shape(output, grad_output, "relu_backward");
  BasicTensor<T> grad(output.shape());
  for (std::size_t i = 0; i < output.numel(); ++i) {
    grad[i] = output[i] > T(0) ? grad_output[i] : T(0);
  }
  return grad;
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x) {
  BasicTensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = sigmoid_scalar(x[i]);
  check_finite(out, "sigmoid");
  return out;
}

template <typename T>
BasicTensor<T> sigmoid_backward(const BasicTensor<T>& output,
                                const BasicTensor<T>& grad_output) {
  require_same_shape(output, grad_output, "sigmoid_backward");
  BasicTensor<T> grad(output.shape());
  for (std::size_t i = 0; i < output.numel(); ++i) {
    grad[i] = grad_output[i] * output[i] * (T(1) - output[i]);
  }
  return grad;
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "add");
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] + b[i];
  check_finite(out, "add");
  return out;
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "mul");
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] * b[i];
  check_finite(out, "mul");
  return out;
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& x, T factor) {
  BasicTensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i] * factor;
  check_finite(out, "scale");
  return out;
}

template <typename T>
BasicTensor<T> add_scalar(const BasicTensor<T>& x, T offset) {
  BasicTensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i] + offset;
  check_finite(out, "add_scalar");
  return out;
}

template <typename T>
void accumulate(BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "accumulate");
  for (std::size_t i = 0; i < a.numel(); ++i) a[i] += b[i];
}

template <typename T>
PoolResult<T> maxpool2x2(const BasicTensor<T>& input) {
  require_nchw(input, "maxpool2x2");
  const std::size_t h = input.dim(2), w = input.dim(3);
  const std::size_t oh = h / 2, ow = w / 2;
  if (oh == 0 || ow == 0) {
    throw DimensionError("maxpool2x2: input too small " + to_string(input.shape()));
  }
  const std::size_t planes = input.dim(0) * input.dim(1);
  PoolResult<T> r{BasicTensor<T>({input.dim(0), input.dim(1), oh, ow}), {}};
  r.argmax.resize(r.output.numel());
  for (std::size_t p = 0; p < planes; ++p) {
    const std::size_t base = p * h * w;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        std::size_t best = base + 2 * y * w + 2 * x;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = base + (2 * y + dy) * w + 2 * x + dx;
            if (input[idx] > input[best]) best = idx;
          }
        }
        const std::size_t o = (p * oh + y) * ow + x;
        r.output[o] = input[best];
        r.argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return r;
}

template <typename T>
BasicTensor<T> maxpool2x2_backward(const BasicTensor<T>& grad_output,
                                   std::span<const std::uint32_t> argmax,
                                   const Shape& input_shape) {
  if (argmax.size() != grad_output.numel()) {
    throw DimensionError("maxpool2x2_backward: argmax size mismatch");
  }
  BasicTensor<T> grad(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) grad[argmax[i]] += grad_output[i];
  return grad;
}

template <typename T>
T softmax_cross_entropy(std::span<const T> logits, std::size_t class_index,
                        std::span<T> grad) {
  if (class_index >= logits.size()) {
    throw DimensionError("softmax_cross_entropy: class " +
                         std::to_string(class_index) + " out of " +
                         std::to_string(logits.size()));
  }
  if (!grad.empty() && grad.size() != logits.size()) {
    throw DimensionError("softmax_cross_entropy: grad size mismatch");
  }
  const T peak = *std::max_element(logits.begin(), logits.end());
  T sum = 0;
  for (T l : logits) sum += std::exp(l - peak);
  const T loss = std::log(sum) + peak - logits[class_index];
  if (!grad.empty()) {
    for (std::size_t k = 0; k < logits.size(); ++k) {
      grad[k] = std::exp(logits[k] - peak) / sum - (k == class_index ? T(1) : T(0));
    }
  }
  return loss;
}

template <typename T>
T smooth_l1_sum(std::span<const T> pred, std::span<const T> target,
                std::span<T> grad) {
  if (pred.size() != target.size() || (!grad.empty() && grad.size() != pred.size())) {
    throw DimensionError("smooth_l1: length mismatch " +
                         std::to_string(pred.size()) + " vs " +
                         std::to_string(target.size()));
  }
  T total = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    total += smooth_l1(pred[i], target[i]);
    if (!grad.empty()) grad[i] = smooth_l1_grad(pred[i], target[i]);
  }
  return total;
}

#define HGD_INSTANTIATE_OPS(T)                                                  \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&, \
                                 std::size_t, std::size_t, std::span<const T>); \
  template Conv2dGrads<T> conv2d_backward(                                      \
      const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,      \
      std::size_t, std::size_t, bool);                                          \
  template BasicTensor<T> bilinear_resize(const BasicTensor<T>&, std::size_t,  \
                                          std::size_t);                         \
  template BasicTensor<T> bilinear_resize_backward(const BasicTensor<T>&,      \
                                                   std::size_t, std::size_t);   \
  template BasicTensor<T> nearest_resize(const BasicTensor<T>&, std::size_t,   \
                                         std::size_t);                          \
  template BasicTensor<T> channel_stats(const BasicTensor<T>&, ChannelStat);   \
  template BasicTensor<T> relu(const BasicTensor<T>&);                          \
  template BasicTensor<T> relu_backward(const BasicTensor<T>&,                  \
                                        const BasicTensor<T>&);                 \
  template BasicTensor<T> sigmoid(const BasicTensor<T>&);                       \
  template BasicTensor<T> sigmoid_backward(const BasicTensor<T>&,               \
                                           const BasicTensor<T>&);              \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);    \
  template BasicTensor<T> mul(const BasicTensor<T>&, const BasicTensor<T>&);    \
  template BasicTensor<T> scale(const BasicTensor<T>&, T);                      \
  template BasicTensor<T> add_scalar(const BasicTensor<T>&, T);                 \
  template void accumulate(BasicTensor<T>&, const BasicTensor<T>&);             \
  template PoolResult<T> maxpool2x2(const BasicTensor<T>&);                     \
  template BasicTensor<T> maxpool2x2_backward(                                  \
      const BasicTensor<T>&, std::span<const std::uint32_t>, const Shape&);     \
  template T softmax_cross_entropy(std::span<const T>, std::size_t,            \
                                   std::span<T>);                               \
  template T smooth_l1_sum(std::span<const T>, std::span<const T>, std::span<T>);

HGD_INSTANTIATE_OPS(float)
HGD_INSTANTIATE_OPS(double)

#undef HGD_INSTANTIATE_OPS

}  // namespace hgd
