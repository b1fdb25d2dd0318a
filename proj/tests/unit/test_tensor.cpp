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
#include <cmath>
#include <cstdlib>
#include <limits>

#include "doctest.h"
#include "hgd/ops.hpp"
#include "support/gradcheck.hpp"

using namespace hgd;
using hgd::testing::check_gradient;
using hgd::testing::random_tensor;
using hgd::testing::weighted_sum;

namespace {

// Direct seven-loop cross-correlation.
Tensor64 naive_conv(const Tensor64& x, const Tensor64& k, std::size_t s, std::size_t p,
                    std::span<const double> bias) {
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t o = k.dim(0), kk = k.dim(2);
  const std::size_t oh = (h + 2 * p - kk) / s + 1, ow = (w + 2 * p - kk) / s + 1;
  Tensor64 y({n, o, oh, ow});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t oc = 0; oc < o; ++oc)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          double acc = bias.empty() ? 0.0 : bias[oc];
          for (std::size_t ic = 0; ic < c; ++ic)
            for (std::size_t ki = 0; ki < kk; ++ki)
              for (std::size_t kj = 0; kj < kk; ++kj) {
                const long yy = static_cast<long>(i * s + ki) - static_cast<long>(p);
                const long xx = static_cast<long>(j * s + kj) - static_cast<long>(p);
                if (yy < 0 || xx < 0 || yy >= static_cast<long>(h) || xx >= static_cast<long>(w))
                  continue;
                acc += x.at(b, ic, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx)) *
                       k.at(oc, ic, ki, kj);
              }
          y.at(b, oc, i, j) = acc;
        }
  return y;
}

}  // namespace

TEST_CASE("tensor shape and value count must agree") {
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<float>(5)), DimensionError);
  Tensor t({2, 3}, 1.5f);
  CHECK(t.numel() == 6);
  CHECK(t.reshaped({3, 2}).shape() == Shape{3, 2});
}

TEST_CASE("conv2d examples") {
  SUBCASE("identity 1x1 kernel") {
    Tensor x({1, 1, 2, 2}, {1, 2, 3, 4});
    Tensor k({1, 1, 1, 1}, {1});
    CHECK(conv2d(x, k, 1, 0) == x);
  }
  SUBCASE("ones over ones") {
    Tensor x({1, 1, 3, 3}, 1.0f);
    Tensor k({1, 1, 3, 3}, 1.0f);
    const Tensor y = conv2d(x, k, 1, 0);
    CHECK(y.shape() == Shape{1, 1, 1, 1});
    CHECK(y[0] == 9.0f);
  }
  SUBCASE("channel mismatch names both shapes") {
    Tensor x({1, 3, 4, 4});
    Tensor k({2, 4, 1, 1});
    try {
      conv2d(x, k, 1, 0);
      FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("[2x4x1x1]") != std::string::npos);
      CHECK(msg.find("[1x3x4x4]") != std::string::npos);
    }
  }
}

TEST_CASE("conv2d matches a direct loop for strides and padding") {
  Rng rng(11);
  for (std::size_t stride : {1u, 2u}) {
    for (std::size_t pad : {0u, 1u, 2u}) {
      for (std::size_t kk : {1u, 3u}) {
        const auto x = random_tensor<double>({2, 3, 6, 5}, rng);
        const auto k = random_tensor<double>({4, 3, kk, kk}, rng);
        std::vector<double> bias{0.1, -0.2, 0.3, 0.0};
        const auto got = conv2d(x, k, stride, pad, std::span<const double>(bias));
        const auto want = naive_conv(x, k, stride, pad, bias);
        REQUIRE(got.shape() == want.shape());
        for (std::size_t i = 0; i < got.numel(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("identity 1x1 conv is exact on random data") {
  Rng rng(3);
  const auto x = random_tensor<float>({2, 4, 5, 5}, rng, -100, 100);
  Tensor k({4, 4, 1, 1});
  for (std::size_t c = 0; c < 4; ++c) k.at(c, c, 0, 0) = 1.0f;
  CHECK(conv2d(x, k, 1, 0) == x);
}

TEST_CASE("bilinear_resize examples") {
  SUBCASE("same size is the identity") {
    Rng rng(5);
    const auto x = random_tensor<float>({2, 3, 4, 7}, rng);
    CHECK(bilinear_resize(x, 4, 7) == x);
  }
  SUBCASE("[0, 2] to width 4") {
    Tensor x({1, 1, 1, 2}, {0, 2});
    const Tensor y = bilinear_resize(x, 1, 4);
    CHECK(y.values()[0] == 0.0f);
    CHECK(y.values()[1] == 0.5f);
    CHECK(y.values()[2] == 1.5f);
    CHECK(y.values()[3] == 2.0f);
  }
  SUBCASE("constant stays constant") {
    Tensor x({1, 2, 3, 5}, 0.7f);
    const std::vector<std::pair<std::size_t, std::size_t>> sizes{{1, 1}, {6, 10}, {2, 3}, {9, 4}};
    for (auto [h, w] : sizes) {
      const auto out_v = bilinear_resize(x, h, w);
      for (float v : out_v.values()) CHECK(v == doctest::Approx(0.7f));
    }
  }
}

TEST_CASE("channel_stats examples") {
  Tensor zero({1, 4, 1, 1});
  CHECK(channel_stats(zero, ChannelStat::kMean)[0] == 0.0f);
  Tensor constant({1, 5, 2, 2}, 3.25f);
  const auto out_v = channel_stats(constant, ChannelStat::kVariance);
  for (float v : out_v.values()) CHECK(v == 0.0f);
  Tensor pair({1, 2, 1, 1}, {1, 3});
  CHECK(channel_stats(pair, ChannelStat::kVariance)[0] == 1.0f);
  CHECK(channel_stats(pair, ChannelStat::kMean)[0] == 2.0f);
  CHECK(channel_stats(pair, ChannelStat::kMean).shape() == Shape{1, 1, 1, 1});
}

TEST_CASE("channel variance is never negative") {
  Rng rng(9);
  for (int seed = 0; seed < 10; ++seed) {
    const auto x = random_tensor<float>({2, 8, 6, 6}, rng, 1000.0, 1000.001);
    const auto out_v = channel_stats(x, ChannelStat::kVariance);
    for (float v : out_v.values()) CHECK(v >= 0.0f);
  }
}

TEST_CASE("elementwise examples") {
  CHECK(sigmoid_scalar(0.0) == 0.5);
  CHECK(smooth_l1(0.3, 0.3) == 0.0);
  CHECK(smooth_l1(2.0, 0.0) == 1.5);
  CHECK(smooth_l1(0.5, 0.0) == 0.125);
  Tensor x({1, 1, 1, 3}, {-1, 0, 2});
  CHECK(relu(x).values()[0] == 0.0f);
  CHECK(relu(x).values()[2] == 2.0f);
  CHECK_THROWS_AS(add(Tensor({2}), Tensor({3})), DimensionError);
  CHECK_THROWS_AS(mul(Tensor({2}), Tensor({2, 1})), DimensionError);
  const std::vector<double> logits{1.0, 2.0, 0.5};
  const double lse = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(0.5));
  CHECK(softmax_cross_entropy(std::span<const double>(logits), 1) == doctest::Approx(lse - 2.0));
}

TEST_CASE("maxpool picks the window maximum") {
  Tensor x({1, 1, 2, 4}, {1, 5, 2, 0, 3, 4, 7, 6});
  const auto p = maxpool2x2(x);
  CHECK(p.output.shape() == Shape{1, 1, 1, 2});
  CHECK(p.output[0] == 5.0f);
  CHECK(p.output[1] == 7.0f);
}

// ---- gradient checks, 10 seeds each ----------------------------------------

TEST_CASE("conv2d gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const std::size_t stride = 1 + seed % 2, pad = seed % 3 == 0 ? 0 : 1;
    const auto x = random_tensor<double>({2, 3, 5, 5}, rng);
    const auto k = random_tensor<double>({4, 3, 3, 3}, rng);
    std::vector<double> bias{0.1, 0.2, -0.3, 0.4};
    const auto y = conv2d(x, k, stride, pad, std::span<const double>(bias));
    const auto r = random_tensor<double>(y.shape(), rng);
    const auto g = conv2d_backward(x, k, r, stride, pad);
    CHECK(check_gradient<double>(
              [&](const Tensor64& xi) { return weighted_sum(conv2d(xi, k, stride, pad), r); }, x,
              g.input) < 1e-4);
    CHECK(check_gradient<double>(
              [&](const Tensor64& ki) { return weighted_sum(conv2d(x, ki, stride, pad), r); }, k,
              g.kernel) < 1e-4);
    const Tensor64 b(Shape{4}, bias);
    const Tensor64 gb(Shape{4}, g.bias);
    CHECK(check_gradient<double>(
              [&](const Tensor64& bi) {
                return weighted_sum(conv2d(x, k, stride, pad, bi.values()), r);
              },
              b, gb) < 1e-4);
  }
}

TEST_CASE("bilinear_resize gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(100 + seed);
    const auto x = random_tensor<double>({2, 2, 4, 5}, rng);
    const std::size_t oh = 1 + seed % 7, ow = 2 + (seed * 3) % 9;
    const auto r = random_tensor<double>({2, 2, oh, ow}, rng);
    const auto g = bilinear_resize_backward(r, 4, 5);
    CHECK(check_gradient<double>(
              [&](const Tensor64& xi) { return weighted_sum(bilinear_resize(xi, oh, ow), r); }, x,
              g) < 1e-4);
  }
}

TEST_CASE("sigmoid and relu gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(200 + seed);
    auto x = random_tensor<double>({2, 4, 5, 5}, rng, -3, 3);
    // Keep relu inputs away from the kink.
    for (auto& v : x.values()) {
      if (std::abs(v) < 1e-3) v = 0.5;
    }
    const auto r = random_tensor<double>(x.shape(), rng);
    CHECK(check_gradient<double>([&](const Tensor64& xi) { return weighted_sum(sigmoid(xi), r); },
                                 x, sigmoid_backward(sigmoid(x), r)) < 1e-4);
    CHECK(check_gradient<double>([&](const Tensor64& xi) { return weighted_sum(relu(xi), r); }, x,
                                 relu_backward(relu(x), r)) < 1e-4);
  }
}

TEST_CASE("maxpool gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(300 + seed);
    // A shuffled ramp has no ties, so the argmax is stable under +-h.
    Tensor64 x({2, 3, 4, 5});
    for (std::size_t i = 0; i < x.numel(); ++i) x[i] = 0.01 * static_cast<double>(i);
    for (std::size_t i = x.numel(); i > 1; --i) {
      std::swap(x[i - 1], x[static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(i) - 1))]);
    }
    const auto p = maxpool2x2(x);
    const auto r = random_tensor<double>(p.output.shape(), rng);
    CHECK(check_gradient<double>(
              [&](const Tensor64& xi) { return weighted_sum(maxpool2x2(xi).output, r); }, x,
              maxpool2x2_backward(r, p.argmax, x.shape())) < 1e-4);
  }
}

TEST_CASE("smooth_l1 and softmax cross-entropy gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(400 + seed);
    auto pred = random_tensor<double>({12}, rng, -3, 3);
    const auto target = random_tensor<double>({12}, rng, -1, 1);
    for (std::size_t i = 0; i < 12; ++i) {
      if (std::abs(std::abs(pred[i] - target[i]) - 1.0) < 1e-3) pred[i] += 0.1;
    }
    Tensor64 g({12});
    smooth_l1_sum<double>(pred.values(), target.values(), g.values());
    CHECK(check_gradient<double>(
              [&](const Tensor64& p) { return smooth_l1_sum<double>(p.values(), target.values()); },
              pred, g) < 1e-4);

    const auto logits = random_tensor<double>({5}, rng, -4, 4);
    const std::size_t cls = seed % 5;
    Tensor64 gl({5});
    softmax_cross_entropy<double>(logits.values(), cls, gl.values());
    CHECK(check_gradient<double>(
              [&](const Tensor64& l) { return softmax_cross_entropy<double>(l.values(), cls); },
              logits, gl) < 1e-4);
  }
}

TEST_CASE("32-bit gradients are within the looser tolerance") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(500 + seed);
    const auto x = random_tensor<float>({1, 2, 4, 4}, rng);
    const auto k = random_tensor<float>({3, 2, 3, 3}, rng);
    const auto r = random_tensor<float>({1, 3, 4, 4}, rng);
    const auto g = conv2d_backward(x, k, r, 1, 1);
    CHECK(check_gradient<float>(
              [&](const Tensor& xi) { return weighted_sum(conv2d(xi, k, 1, 1), r); }, x,
              g.input) < 1e-2);
    const auto rr = random_tensor<float>({1, 2, 7, 3}, rng);
    CHECK(check_gradient<float>(
              [&](const Tensor& xi) { return weighted_sum(bilinear_resize(xi, 7, 3), rr); }, x,
              bilinear_resize_backward(rr, 4, 4)) < 1e-2);
  }
}

TEST_CASE("ops are pure") {
  Rng rng(7);
  const auto x = random_tensor<float>({2, 3, 8, 8}, rng);
  const auto k = random_tensor<float>({5, 3, 3, 3}, rng);
  CHECK(conv2d(x, k, 1, 1) == conv2d(x, k, 1, 1));
  CHECK(bilinear_resize(x, 5, 11) == bilinear_resize(x, 5, 11));
  CHECK(channel_stats(x, ChannelStat::kVariance) == channel_stats(x, ChannelStat::kVariance));
}

TEST_CASE("finiteness assertion") {
  Tensor t({3}, {1.0f, std::numeric_limits<float>::quiet_NaN(), 2.0f});
  CHECK_THROWS_AS(assert_finite(t, "test"), InvariantError);
  CHECK_NOTHROW(assert_finite(Tensor({3}, 1.0f), "test"));
}
