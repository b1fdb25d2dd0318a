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
#include <limits>
#include <vector>

#include "doctest.h"
#include "hgd/imitation.hpp"
#include "support/gradcheck.hpp"

using namespace hgd;
using hgd::testing::check_gradient;
using hgd::testing::random_tensor;

namespace {

using Pair64 = BasicMatchedPair<double>;

// S stages of N x C x H x W, with H and W shrinking per stage.
std::vector<Pair64> random_pairs(Rng& rng, std::size_t stages, std::size_t n, std::size_t c,
                                 std::size_t size) {
  std::vector<Pair64> pairs;
  for (std::size_t s = 0; s < stages; ++s) {
    const std::size_t h = std::max<std::size_t>(1, size >> s);
    const std::size_t w = std::max<std::size_t>(1, (size + 3) >> s);
    Pair64 p;
    p.student_adapted = random_tensor<double>({n, c, h, w}, rng);
    p.teacher = random_tensor<double>({n, c, h, w}, rng);
    p.student_raw = p.student_adapted;
    p.stage = s;
    pairs.push_back(std::move(p));
  }
  return pairs;
}

double naive_l2(const std::vector<double>& v, const std::vector<double>& z) {
  double s = 0;
  for (std::size_t k = 0; k < v.size(); ++k) s += (v[k] - z[k]) * (v[k] - z[k]);
  return s;
}

double naive_cos(const std::vector<double>& v, const std::vector<double>& z) {
  double d = 0, nv = 0, nz = 0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    d += v[k] * z[k];
    nv += v[k] * v[k];
    nz += z[k] * z[k];
  }
  return 1.0 - d / std::max(std::sqrt(nv) * std::sqrt(nz), 1e-8);
}

// Batch mean of sum_s (1 / (H W)) sum_ij l(V_sij, Z_sij), written as loops.
double naive_aggregate(const std::vector<Pair64>& pairs, Metric metric) {
  const std::size_t n = pairs[0].teacher.dim(0);
  double total = 0;
  for (std::size_t b = 0; b < n; ++b) {
    for (const auto& p : pairs) {
      const std::size_t c = p.teacher.dim(1), h = p.teacher.dim(2), w = p.teacher.dim(3);
      double stage = 0;
      for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
          std::vector<double> v(c), z(c);
          for (std::size_t k = 0; k < c; ++k) {
            v[k] = p.student_adapted.at(b, k, i, j);
            z[k] = p.teacher.at(b, k, i, j);
          }
          stage += metric == Metric::kL2 ? naive_l2(v, z) : naive_cos(v, z);
        }
      }
      total += stage / static_cast<double>(h * w);
    }
  }
  return total / static_cast<double>(n);
}

WeightMaps uniform_weights(const std::vector<Pair64>& pairs) {
  WeightMaps w;
  for (const auto& p : pairs) {
    const Shape& s = p.teacher.shape();
    w.u.emplace_back(s[0], 1.0);
    w.v.emplace_back(Shape{s[0], 1, s[2], s[3]}, 1.0);
  }
  return w;
}

double rel(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

}  // namespace

TEST_CASE("l2_imitation examples") {
  std::vector<double> v{1, 2}, z{0, 0}, g(2);
  CHECK(l2_imitation<double>(v, v) == 0.0);
  CHECK(l2_imitation<double>(v, z, g) == 5.0);
  CHECK(g[0] == 2.0);
  CHECK(g[1] == 4.0);
  std::vector<double> shorter{1};
  CHECK_THROWS_AS(l2_imitation<double>(v, shorter), DimensionError);
}

TEST_CASE("cosine_imitation examples") {
  auto cos = [](std::vector<double> v, std::vector<double> z) {
    return cosine_imitation<double>(v, z, 1e-8);
  };
  CHECK(cos({0.3, -2}, {0.3, -2}) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(cos({1, 0}, {0, 1}) == 1.0);
  CHECK(cos({1, 0}, {-1, 0}) == 2.0);
  CHECK(cos({2, 0}, {1, 0}) == 0.0);
  CHECK(cos({0, 0}, {1, 0}) == 1.0);
  std::vector<double> a{1, 2}, b{1};
  CHECK_THROWS_AS(cosine_imitation<double>(a, b, 1e-8), DimensionError);
}

TEST_CASE("cosine range and positive-scale invariance") {
  Rng rng(4);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t c = 1 + static_cast<std::size_t>(rng.uniform_int(0, 15));
    std::vector<double> v(c), z(c), vs(c), zs(c);
    for (std::size_t k = 0; k < c; ++k) {
      v[k] = rng.uniform(-1, 1);
      z[k] = rng.uniform(-1, 1);
    }
    const double a = std::exp(rng.uniform(-5, 5)), b = std::exp(rng.uniform(-5, 5));
    for (std::size_t k = 0; k < c; ++k) {
      vs[k] = a * v[k];
      zs[k] = b * z[k];
    }
    const double l = cosine_imitation<double>(v, z, 1e-8);
    CHECK(l >= 0.0);
    CHECK(l <= 2.0);
    CHECK(std::abs(cosine_imitation<double>(vs, zs, 1e-8) - l) < 1e-6);
  }
}

TEST_CASE("l2 is zero only for equal vectors") {
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> v(4), z(4);
    for (auto& x : v) x = rng.uniform(-1, 1);
    z = v;
    CHECK(l2_imitation<double>(v, z) == 0.0);
    z[static_cast<std::size_t>(t % 4)] += 1e-3;
    CHECK(l2_imitation<double>(v, z) > 0.0);
  }
}

TEST_CASE("aggregate_imitation examples") {
  SUBCASE("1x1 spatial equals the per-vector loss") {
    Pair64 p;
    p.student_adapted = Tensor64({1, 2, 1, 1}, {1, 2});
    p.teacher = Tensor64({1, 2, 1, 1}, {0, 0});
    const std::vector<Pair64> pairs{p};
    CHECK(aggregate_imitation<double>(pairs, Metric::kL2, 1e-8).loss == 5.0);
  }
  SUBCASE("student equal to teacher gives zero") {
    Rng rng(1);
    auto pairs = random_pairs(rng, 3, 2, 4, 6);
    for (auto& p : pairs) p.student_adapted = p.teacher;
    CHECK(aggregate_imitation<double>(pairs, Metric::kL2, 1e-8).loss == 0.0);
    CHECK(aggregate_imitation<double>(pairs, Metric::kCosine, 1e-8).loss ==
          doctest::Approx(0.0).scale(1.0));
  }
  SUBCASE("two stages of 2x1 maps by hand") {
    // Stage 0 locations: (1,0) vs (0,0) -> 1, (0,2) vs (0,0) -> 4; mean 2.5.
    // Stage 1 locations: (1,1) vs (1,1) -> 0, (3,0) vs (1,0) -> 4; mean 2.
    Pair64 a, b;
    a.student_adapted = Tensor64({1, 2, 2, 1}, {1, 0, 0, 2});
    a.teacher = Tensor64({1, 2, 2, 1}, 0.0);
    b.student_adapted = Tensor64({1, 2, 2, 1}, {1, 3, 1, 0});
    b.teacher = Tensor64({1, 2, 2, 1}, {1, 1, 1, 0});
    b.stage = 1;
    const std::vector<Pair64> pairs{a, b};
    CHECK(aggregate_imitation<double>(pairs, Metric::kL2, 1e-8).loss == 4.5);
    CHECK(naive_aggregate(pairs, Metric::kL2) == 4.5);
  }
  SUBCASE("shape mismatch inside a pair") {
    Pair64 p;
    p.student_adapted = Tensor64({1, 2, 2, 2});
    p.teacher = Tensor64({1, 3, 2, 2});
    const std::vector<Pair64> pairs{p};
    CHECK_THROWS_AS(aggregate_imitation<double>(pairs, Metric::kL2, 1e-8), DimensionError);
  }
}

TEST_CASE("aggregate_imitation matches the loop oracle") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const std::size_t stages = 1 + seed % 4;
    const auto pairs = random_pairs(rng, stages, 1 + seed % 2, 1 + seed % 8, 4 + seed % 13);
    for (Metric m : {Metric::kL2, Metric::kCosine}) {
      const double got = aggregate_imitation<double>(pairs, m, 1e-8).loss;
      CHECK(std::abs(got - naive_aggregate(pairs, m)) < 1e-6);
    }
  }
}

TEST_CASE("uniform weights reduce the weighted form to the plain one") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(50 + seed);
    const auto pairs = random_pairs(rng, 4, 2, 8, 16);
    for (Metric m : {Metric::kL2, Metric::kCosine}) {
      const double plain = aggregate_imitation<double>(pairs, m, 1e-8).loss;
      const double weighted =
          reweighted_aggregate<double>(pairs, m, 1e-8, uniform_weights(pairs)).loss;
      CHECK(rel(plain, weighted) < 1e-9);
    }
  }
}

TEST_CASE("scaling one stage's v leaves the loss unchanged") {
  Rng rng(8);
  const auto pairs = random_pairs(rng, 3, 2, 4, 8);
  auto w = uniform_weights(pairs);
  for (auto& v : w.v) {
    for (auto& x : v.values()) x = rng.uniform(0.1, 1.0);
  }
  const double base = reweighted_aggregate<double>(pairs, Metric::kCosine, 1e-8, w).loss;
  for (double c : {1e-3, 0.5, 7.0, 1e4}) {
    auto scaled = w;
    for (auto& x : scaled.v[1].values()) x *= c;
    CHECK(rel(reweighted_aggregate<double>(pairs, Metric::kCosine, 1e-8, scaled).loss, base) <
          1e-12);
  }
}

TEST_CASE("v = (1, 0) on a 2x1 map selects the first location") {
  Pair64 p;
  p.student_adapted = Tensor64({1, 2, 2, 1}, {1, 0, 0, 2});
  p.teacher = Tensor64({1, 2, 2, 1}, 0.0);
  const std::vector<Pair64> pairs{p};
  WeightMaps w;
  w.u = {{0.7}};
  w.v = {Tensor64({1, 1, 2, 1}, {1, 0})};
  // Location losses are (1, 4).
  CHECK(reweighted_aggregate<double>(pairs, Metric::kL2, 1e-8, w).loss ==
        doctest::Approx(0.7 * 1.0).epsilon(1e-15));
}

TEST_CASE("a stage with zero total v is skipped") {
  Rng rng(2);
  const auto pairs = random_pairs(rng, 2, 2, 3, 4);
  auto w = uniform_weights(pairs);
  const std::size_t cells = w.v[0].numel() / 2;
  for (std::size_t i = 0; i < cells; ++i) w.v[0][i] = 0.0;  // image 0 of stage 0
  const auto r = reweighted_aggregate<double>(pairs, Metric::kL2, 1e-8, w);
  REQUIRE(r.skipped.size() == 2);
  CHECK(r.skipped[0] == 1);
  CHECK(r.skipped[1] == 0);
  CHECK(std::isfinite(r.loss));
}

TEST_CASE("imitation gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(100 + seed);
    for (Metric m : {Metric::kL2, Metric::kCosine}) {
      auto pairs = random_pairs(rng, 2, 2, 4, 5);
      auto w = uniform_weights(pairs);
      for (auto& v : w.v) {
        for (auto& x : v.values()) x = rng.uniform(0.0, 1.0);
      }
      for (auto& u : w.u) {
        for (auto& x : u) x = rng.uniform(0.2, 1.5);
      }
      const auto plain = aggregate_imitation<double>(pairs, m, 1e-8, true);
      const auto weighted = reweighted_aggregate<double>(pairs, m, 1e-8, w, true);
      for (std::size_t s = 0; s < pairs.size(); ++s) {
        auto f_plain = [&](const Tensor64& x) {
          auto p2 = pairs;
          p2[s].student_adapted = x;
          return aggregate_imitation<double>(p2, m, 1e-8).loss;
        };
        auto f_weighted = [&](const Tensor64& x) {
          auto p2 = pairs;
          p2[s].student_adapted = x;
          return reweighted_aggregate<double>(p2, m, 1e-8, w).loss;
        };
        CHECK(check_gradient<double>(f_plain, pairs[s].student_adapted, plain.grad[s]) < 1e-4);
        CHECK(check_gradient<double>(f_weighted, pairs[s].student_adapted, weighted.grad[s]) <
              1e-4);
      }
    }
  }
}

TEST_CASE("per-vector metric gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(200 + seed);
    const auto v = random_tensor<double>({6}, rng);
    const auto z = random_tensor<double>({6}, rng);
    Tensor64 g2({6}), gc({6});
    l2_imitation<double>(v.values(), z.values(), g2.values());
    cosine_imitation<double>(v.values(), z.values(), 1e-8, gc.values());
    CHECK(check_gradient<double>(
              [&](const Tensor64& x) { return l2_imitation<double>(x.values(), z.values()); }, v,
              g2) < 1e-4);
    CHECK(check_gradient<double>(
              [&](const Tensor64& x) {
                return cosine_imitation<double>(x.values(), z.values(), 1e-8);
              },
              v, gc) < 1e-4);
  }
}

TEST_CASE("total_loss") {
  CHECK(total_loss(1, 2, 3, 0, 0) == 1.0);
  CHECK(total_loss(1, 2, 3, 1, 0.5) == 4.5);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  try {
    total_loss(1, nan, 3, 1, 1);
    FAIL("expected InvariantError");
  } catch (const InvariantError& e) {
    CHECK(std::string(e.what()).find("L_l") != std::string::npos);
  }
  CHECK_THROWS_AS(total_loss(1, 2, std::numeric_limits<double>::infinity(), 1, 1),
                  InvariantError);
}

TEST_CASE("imitation config validation and names") {
  ImitationConfig c;
  CHECK_NOTHROW(c.validate());
  c.gamma = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.epsilon = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.lambda2 = -0.1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  for (auto m : {MacroWeight::kNone, MacroWeight::kFocal, MacroWeight::kStageMean,
                 MacroWeight::kStageVariance}) {
    CHECK(parse_macro(name(m)) == m);
  }
  for (auto m : {MicroWeight::kNone, MicroWeight::kSpatialMean, MicroWeight::kSpatialVariance,
                 MicroWeight::kGtMask}) {
    CHECK(parse_micro(name(m)) == m);
  }
  CHECK(parse_metric("l2") == Metric::kL2);
  CHECK_THROWS_AS(parse_metric("kl"), ConfigError);
}
