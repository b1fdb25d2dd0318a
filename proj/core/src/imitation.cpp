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
#include "hgd/imitation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hgd {

std::string_view name(Metric m) {
  return m == Metric::kL2 ? "l2" : "cosine";
}

std::string_view name(MacroWeight m) {
  switch (m) {
    case MacroWeight::kNone: return "none";
    case MacroWeight::kFocal: return "focal";
    case MacroWeight::kStageMean: return "stage_mean";
    case MacroWeight::kStageVariance: return "stage_variance";
  }
  return "?";
}

std::string_view name(MicroWeight m) {
  switch (m) {
    case MicroWeight::kNone: return "none";
    case MicroWeight::kSpatialMean: return "spatial_mean";
    case MicroWeight::kSpatialVariance: return "spatial_variance";
    case MicroWeight::kGtMask: return "gt_mask";
  }
  return "?";
}

Metric parse_metric(std::string_view s) {
  if (s == "l2") return Metric::kL2;
  if (s == "cosine") return Metric::kCosine;
  throw ConfigError("unknown imitation metric '" + std::string(s) +
                    "' (expected l2|cosine)");
}

MacroWeight parse_macro(std::string_view s) {
  for (auto m : {MacroWeight::kNone, MacroWeight::kFocal,
                 MacroWeight::kStageMean, MacroWeight::kStageVariance}) {
    if (s == name(m)) return m;
  }
  throw ConfigError("unknown macro weighting '" + std::string(s) +
                    "' (expected none|focal|stage_mean|stage_variance)");
}

MicroWeight parse_micro(std::string_view s) {
  for (auto m : {MicroWeight::kNone, MicroWeight::kSpatialMean,
                 MicroWeight::kSpatialVariance, MicroWeight::kGtMask}) {
    if (s == name(m)) return m;
  }
  throw ConfigError("unknown micro weighting '" + std::string(s) +
                    "' (expected none|spatial_mean|spatial_variance|gt_mask)");
}

void ImitationConfig::validate() const {
  if (!(gamma >= 0)) throw ConfigError("imitation.gamma must be >= 0");
  if (!(lambda1 >= 0)) throw ConfigError("imitation.lambda1 must be >= 0");
  if (lambda2 && !(*lambda2 >= 0)) {
    throw ConfigError("imitation.lambda2 must be >= 0 or 'auto'");
  }
  if (!(lambda2_scale > 0)) {
    throw ConfigError("imitation.lambda2_scale must be > 0");
  }
  if (!(epsilon > 0)) throw ConfigError("imitation.epsilon must be > 0");
}

namespace {

void require_equal_length(std::size_t a, std::size_t b, const char* op) {
  if (a != b) {
    throw DimensionError(std::string(op) + ": vector lengths " +
                         std::to_string(a) + " vs " + std::to_string(b));
  }
}

// Cosine loss and its gradient scale from the three reductions. Returns the
// loss; `coef_t` and `coef_s` are such that dL/dV = coef_t * Z + coef_s * V.
double cosine_from_sums(double dot, double ss, double tt, double epsilon,
                        double& coef_t, double& coef_s) {
  const double ns = std::sqrt(ss), nt = std::sqrt(tt);
  const double prod = ns * nt;
  if (prod > epsilon) {
    coef_t = -1.0 / prod;
    coef_s = dot / (ss * prod);
    const double cos = std::clamp(dot / prod, -1.0, 1.0);
    return 1.0 - cos;
  }
  coef_t = -1.0 / epsilon;
  coef_s = 0.0;
  return 1.0 - std::clamp(dot / epsilon, -1.0, 1.0);
}

template <typename T>
void require_pair_shapes(const BasicTensor<T>& s, const BasicTensor<T>& t,
                         const char* op) {
  require_nchw(s, op);
  if (s.shape() != t.shape()) {
    throw DimensionError(std::string(op) + ": student " + to_string(s.shape()) +
                         " vs teacher " + to_string(t.shape()));
  }
}

}  // namespace

template <typename T>
double l2_imitation(std::span<const T> v, std::span<const T> z,
                    std::span<T> grad_v) {
  require_equal_length(v.size(), z.size(), "l2_imitation");
  if (!grad_v.empty()) require_equal_length(v.size(), grad_v.size(), "l2_imitation grad");
  double sum = 0;
  for (std::size_t c = 0; c < v.size(); ++c) {
    const double d = static_cast<double>(v[c]) - static_cast<double>(z[c]);
    sum += d * d;
    if (!grad_v.empty()) grad_v[c] = static_cast<T>(2.0 * d);
  }
  return sum;
}

template <typename T>
double cosine_imitation(std::span<const T> v, std::span<const T> z,
                        double epsilon, std::span<T> grad_v) {
  require_equal_length(v.size(), z.size(), "cosine_imitation");
  if (!grad_v.empty()) require_equal_length(v.size(), grad_v.size(), "cosine_imitation grad");
  double dot = 0, ss = 0, tt = 0;
  for (std::size_t c = 0; c < v.size(); ++c) {
    dot += static_cast<double>(v[c]) * z[c];
    ss += static_cast<double>(v[c]) * v[c];
    tt += static_cast<double>(z[c]) * z[c];
  }
  double ct = 0, cs = 0;
  const double loss = cosine_from_sums(dot, ss, tt, epsilon, ct, cs);
  if (!grad_v.empty()) {
    for (std::size_t c = 0; c < v.size(); ++c) {
      grad_v[c] = static_cast<T>(ct * z[c] + cs * v[c]);
    }
  }
  return loss;
}

template <typename T>
Tensor64 imitation_map(const BasicTensor<T>& student,
                       const BasicTensor<T>& teacher, Metric metric,
                       double epsilon) {
  require_pair_shapes(student, teacher, "imitation_map");
  const std::size_t n = student.dim(0), c = student.dim(1);
  const std::size_t plane = student.dim(2) * student.dim(3);
  Tensor64 out({n, 1, student.dim(2), student.dim(3)});
  std::vector<double> a(plane), b(plane), d(plane);
  for (std::size_t img = 0; img < n; ++img) {
    const T* s = student.data() + img * c * plane;
    const T* t = teacher.data() + img * c * plane;
    double* dst = out.data() + img * plane;
    if (metric == Metric::kL2) {
      std::fill(a.begin(), a.end(), 0.0);
      for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t p = 0; p < plane; ++p) {
          const double diff = static_cast<double>(s[ch * plane + p]) - t[ch * plane + p];
          a[p] += diff * diff;
        }
      }
      std::copy(a.begin(), a.end(), dst);
      continue;
    }
    std::fill(a.begin(), a.end(), 0.0);  // dot
    std::fill(b.begin(), b.end(), 0.0);  // |s|^2
    std::fill(d.begin(), d.end(), 0.0);  // |t|^2
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t p = 0; p < plane; ++p) {
        const double sv = s[ch * plane + p], tv = t[ch * plane + p];
        a[p] += sv * tv;
        b[p] += sv * sv;
        d[p] += tv * tv;
      }
    }
    for (std::size_t p = 0; p < plane; ++p) {
      double ct, cs;
      dst[p] = cosine_from_sums(a[p], b[p], d[p], epsilon, ct, cs);
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> imitation_map_backward(const BasicTensor<T>& student,
                                      const BasicTensor<T>& teacher,
                                      Metric metric, double epsilon,
                                      const Tensor64& weight) {
  require_pair_shapes(student, teacher, "imitation_map_backward");
  const std::size_t n = student.dim(0), c = student.dim(1);
  const std::size_t plane = student.dim(2) * student.dim(3);
  if (weight.numel() != n * plane) {
    throw DimensionError("imitation_map_backward: weight " +
                         to_string(weight.shape()) + " vs feature " +
                         to_string(student.shape()));
  }
  BasicTensor<T> grad(student.shape());
  std::vector<double> dot(plane), ss(plane), tt(plane), ct(plane), cs(plane);
  for (std::size_t img = 0; img < n; ++img) {
    const T* s = student.data() + img * c * plane;
    const T* t = teacher.data() + img * c * plane;
    const double* w = weight.data() + img * plane;
    T* g = grad.data() + img * c * plane;
    if (metric == Metric::kL2) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t p = 0; p < plane; ++p) {
          const std::size_t k = ch * plane + p;
          g[k] = static_cast<T>(2.0 * w[p] * (static_cast<double>(s[k]) - t[k]));
        }
      }
      continue;
    }
    std::fill(dot.begin(), dot.end(), 0.0);
    std::fill(ss.begin(), ss.end(), 0.0);
    std::fill(tt.begin(), tt.end(), 0.0);
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t p = 0; p < plane; ++p) {
        const double sv = s[ch * plane + p], tv = t[ch * plane + p];
        dot[p] += sv * tv;
        ss[p] += sv * sv;
        tt[p] += tv * tv;
      }
    }
    for (std::size_t p = 0; p < plane; ++p) {
      cosine_from_sums(dot[p], ss[p], tt[p], epsilon, ct[p], cs[p]);
      ct[p] *= w[p];
      cs[p] *= w[p];
    }
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t p = 0; p < plane; ++p) {
        const std::size_t k = ch * plane + p;
        g[k] = static_cast<T>(ct[p] * t[k] + cs[p] * s[k]);
      }
    }
  }
  return grad;
}

template <typename T>
std::vector<std::vector<double>> stage_terms(
    std::span<const BasicMatchedPair<T>> pairs, Metric metric, double epsilon,
    std::span<const Tensor64> v) {
  if (!v.empty() && v.size() != pairs.size()) {
    throw DimensionError("stage_terms: " + std::to_string(v.size()) +
                         " weight maps for " + std::to_string(pairs.size()) +
                         " pairs");
  }
  std::vector<std::vector<double>> terms;
  for (std::size_t s = 0; s < pairs.size(); ++s) {
    const auto& pair = pairs[s];
    const Tensor64 loss =
        imitation_map(pair.student_adapted, pair.teacher, metric, epsilon);
    const std::size_t n = loss.dim(0), plane = loss.dim(2) * loss.dim(3);
    if (!v.empty() && v[s].numel() != loss.numel()) {
      throw DimensionError("stage_terms: weight map " + to_string(v[s].shape()) +
                           " vs stage " + to_string(loss.shape()));
    }
    std::vector<double> per_image(n, 0.0);
    for (std::size_t img = 0; img < n; ++img) {
      double num = 0, den = 0;
      for (std::size_t p = 0; p < plane; ++p) {
        const double w = v.empty() ? 1.0 : v[s][img * plane + p];
        num += w * loss[img * plane + p];
        den += w;
      }
      per_image[img] = den > 0 ? num / den : 0.0;
    }
    terms.push_back(std::move(per_image));
  }
  return terms;
}

template <typename T>
ImitationResult<T> reweighted_aggregate(
    std::span<const BasicMatchedPair<T>> pairs, Metric metric, double epsilon,
    const WeightMaps& weights, bool want_grad) {
  if (pairs.empty()) throw ConfigError("imitation: empty pair list");
  if (weights.u.size() != pairs.size() || weights.v.size() != pairs.size()) {
    throw DimensionError("reweighted_aggregate: weights for " +
                         std::to_string(weights.u.size()) + "/" +
                         std::to_string(weights.v.size()) + " stages, " +
                         std::to_string(pairs.size()) + " pairs");
  }
  const std::size_t n = pairs.front().student_adapted.dim(0);
  ImitationResult<T> r;
  r.stage_loss.assign(pairs.size(), 0.0);
  r.stage_raw.assign(pairs.size(), 0.0);
  r.stage_u.assign(pairs.size(), 0.0);
  r.skipped.assign(pairs.size(), 0);
  for (std::size_t s = 0; s < pairs.size(); ++s) {
    const auto& pair = pairs[s];
    const Tensor64 loss =
        imitation_map(pair.student_adapted, pair.teacher, metric, epsilon);
    const Tensor64& v = weights.v[s];
    const std::vector<double>& u = weights.u[s];
    const std::size_t plane = loss.dim(2) * loss.dim(3);
    if (loss.dim(0) != n || v.numel() != loss.numel() || u.size() != n) {
      throw DimensionError("reweighted_aggregate: stage " + std::to_string(s) +
                           " weights " + to_string(v.shape()) + " vs loss " +
                           to_string(loss.shape()));
    }
    Tensor64 grad_weight(loss.shape());
    for (std::size_t img = 0; img < n; ++img) {
      double num = 0, den = 0, raw = 0;
      for (std::size_t p = 0; p < plane; ++p) {
        const double l = loss[img * plane + p];
        const double w = v[img * plane + p];
        num += w * l;
        den += w;
        raw += l;
      }
      r.stage_raw[s] += raw / static_cast<double>(plane) / static_cast<double>(n);
      r.stage_u[s] += u[img] / static_cast<double>(n);
      if (!(den > 0)) {
        ++r.skipped[s];
        continue;
      }
      r.stage_loss[s] += u[img] * num / den / static_cast<double>(n);
      const double coef = u[img] / den / static_cast<double>(n);
      for (std::size_t p = 0; p < plane; ++p) {
        grad_weight[img * plane + p] = coef * v[img * plane + p];
      }
    }
    r.loss += r.stage_loss[s];
    if (want_grad) {
      r.grad.push_back(imitation_map_backward(pair.student_adapted, pair.teacher,
                                              metric, epsilon, grad_weight));
    }
  }
  return r;
}

template <typename T>
ImitationResult<T> aggregate_imitation(std::span<const BasicMatchedPair<T>> pairs,
                                       Metric metric, double epsilon,
                                       bool want_grad) {
  if (pairs.empty()) throw ConfigError("imitation: empty pair list");
  const std::size_t n = pairs.front().student_adapted.dim(0);
  ImitationResult<T> r;
  for (const auto& pair : pairs) {
    const Tensor64 loss =
        imitation_map(pair.student_adapted, pair.teacher, metric, epsilon);
    if (loss.dim(0) != n) {
      throw DimensionError("aggregate_imitation: batch size differs across pairs");
    }
    const std::size_t plane = loss.dim(2) * loss.dim(3);
    double sum = 0;
    for (double l : loss.values()) sum += l;
    const double stage = sum / static_cast<double>(plane) / static_cast<double>(n);
    r.stage_loss.push_back(stage);
    r.stage_raw.push_back(stage);
    r.stage_u.push_back(1.0);
    r.skipped.push_back(0);
    r.loss += stage;
    if (want_grad) {
      const Tensor64 w(loss.shape(), 1.0 / static_cast<double>(plane * n));
      r.grad.push_back(imitation_map_backward(pair.student_adapted, pair.teacher,
                                              metric, epsilon, w));
    }
  }
  return r;
}

double total_loss(double l_c, double l_l, double l_i, double lambda1,
                  double lambda2) {
  const std::pair<const char*, double> parts[] = {
      {"L_c", l_c}, {"L_l", l_l}, {"L_i", l_i}};
  for (const auto& [label, value] : parts) {
    if (!std::isfinite(value)) {
      throw InvariantError(std::string("training aborted: non-finite ") + label +
                           " (" + std::to_string(value) + ")");
    }
  }
  return l_c + lambda1 * l_l + lambda2 * l_i;
}

#define HGD_INSTANTIATE_IMITATION(T)                                           \
  template double l2_imitation(std::span<const T>, std::span<const T>,         \
                               std::span<T>);                                  \
  template double cosine_imitation(std::span<const T>, std::span<const T>,     \
                                   double, std::span<T>);                      \
  template Tensor64 imitation_map(const BasicTensor<T>&, const BasicTensor<T>&, \
                                  Metric, double);                             \
  template BasicTensor<T> imitation_map_backward(                              \
      const BasicTensor<T>&, const BasicTensor<T>&, Metric, double,            \
      const Tensor64&);                                                        \
  template std::vector<std::vector<double>> stage_terms(                       \
      std::span<const BasicMatchedPair<T>>, Metric, double,                    \
      std::span<const Tensor64>);                                              \
  template ImitationResult<T> reweighted_aggregate(                            \
      std::span<const BasicMatchedPair<T>>, Metric, double, const WeightMaps&, \
      bool);                                                                   \
  template ImitationResult<T> aggregate_imitation(                             \
      std::span<const BasicMatchedPair<T>>, Metric, double, bool);

HGD_INSTANTIATE_IMITATION(float)
HGD_INSTANTIATE_IMITATION(double)

#undef HGD_INSTANTIATE_IMITATION

}  // namespace hgd
