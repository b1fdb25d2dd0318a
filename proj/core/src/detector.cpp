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
#include "hgd/detector.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "hgd/hash.hpp"
#include "hgd/random.hpp"
#include "hgd/strings.hpp"

namespace hgd {

// ---- spec -------------------------------------------------------------------

DetectorSpec DetectorSpec::halved() const {
  DetectorSpec s = *this;
  for (auto& w : s.widths) w = (w + 1) / 2;
  return s;
}

void DetectorSpec::validate() const {
  if (widths.empty()) throw ConfigError("detector: no stages");
  for (auto w : widths) {
    if (w == 0) throw ConfigError("detector: zero stage width");
  }
  if (blocks_per_stage == 0) throw ConfigError("detector: blocks_per_stage must be >= 1");
  if (num_classes == 0) throw ConfigError("detector: num_classes must be >= 1");
  if (input_channels == 0) throw ConfigError("detector: input_channels must be >= 1");
  if (widths.size() >= 16 || stage_size(widths.size() - 1) == 0 ||
      input_size % (std::size_t{1} << widths.size()) != 0) {
    throw ConfigError("detector: input_size " + std::to_string(input_size) +
                      " must be divisible by 2^" + std::to_string(widths.size()));
  }
  if (head_stages.empty()) throw ConfigError("detector: no head stages");
  for (std::size_t i = 0; i < head_stages.size(); ++i) {
    if (head_stages[i] >= widths.size()) {
      throw ConfigError("detector: head stage " + std::to_string(head_stages[i]) +
                        " outside stage set");
    }
    if (i && head_stages[i] <= head_stages[i - 1]) {
      throw ConfigError("detector: head stages must be strictly increasing");
    }
  }
  if (anchor_scales.size() != head_stages.size()) {
    throw ConfigError("detector: one anchor scale per head stage required");
  }
  for (double s : anchor_scales) {
    if (!(s > 0)) throw ConfigError("detector: anchor scales must be > 0");
  }
}

std::size_t DetectorSpec::anchor_count() const {
  std::size_t n = 0;
  for (auto s : head_stages) n += stage_size(s) * stage_size(s);
  return n;
}

std::string DetectorSpec::canonical() const {
  std::ostringstream os;
  os << "anchor_scales=" << join_numbers(anchor_scales) << "\n"
     << "blocks_per_stage=" << blocks_per_stage << "\n"
     << "head_stages=" << join_numbers(head_stages) << "\n"
     << "input_channels=" << input_channels << "\n"
     << "input_size=" << input_size << "\n"
     << "num_classes=" << num_classes << "\n"
     << "widths=" << join_numbers(widths) << "\n";
  return os.str();
}

DetectorSpec DetectorSpec::parse(std::string_view canonical) {
  DetectorSpec s;
  std::map<std::string, std::string> kv;
  for (const auto& line : split(canonical, '\n')) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw DataError("detector spec: bad line '" + t + "'");
    kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  auto take = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw DataError(std::string("detector spec: missing ") + key);
    return it->second;
  };
  s.anchor_scales = parse_double_list(take("anchor_scales"));
  s.blocks_per_stage = parse_size(take("blocks_per_stage"));
  s.head_stages = parse_size_list(take("head_stages"));
  s.input_channels = parse_size(take("input_channels"));
  s.input_size = parse_size(take("input_size"));
  s.num_classes = parse_size(take("num_classes"));
  s.widths = parse_size_list(take("widths"));
  return s;
}

std::uint64_t DetectorSpec::hash() const { return fnv1a64(canonical()); }

AnchorGrid make_anchors(const DetectorSpec& spec) {
  AnchorGrid grid;
  const double size = static_cast<double>(spec.input_size);
  for (std::size_t h = 0; h < spec.head_stages.size(); ++h) {
    const std::size_t stage = spec.head_stages[h];
    const std::size_t cells = spec.stage_size(stage);
    const double stride = static_cast<double>(spec.stage_stride(stage));
    const double half = 0.5 * spec.anchor_scales[h] * stride / size;
    grid.head_begin.push_back(grid.boxes.size());
    for (std::size_t y = 0; y < cells; ++y) {
      for (std::size_t x = 0; x < cells; ++x) {
        const double cx = (static_cast<double>(x) + 0.5) / static_cast<double>(cells);
        const double cy = (static_cast<double>(y) + 0.5) / static_cast<double>(cells);
        grid.boxes.push_back({0, std::max(0.0, cx - half), std::max(0.0, cy - half),
                              std::min(1.0, cx + half), std::min(1.0, cy + half)});
      }
    }
  }
  return grid;
}

// ---- parameters -------------------------------------------------------------

void ParamGrads::add(const ParamGrads& other) {
  for (std::size_t i = 0; i < weight.size(); ++i) {
    accumulate(weight[i], other.weight[i]);
    for (std::size_t j = 0; j < bias[i].size(); ++j) bias[i][j] += other.bias[i][j];
  }
}

void ParamGrads::scale(float factor) {
  for (std::size_t i = 0; i < weight.size(); ++i) {
    for (auto& v : weight[i].values()) v *= factor;
    for (auto& v : bias[i]) v *= factor;
  }
}

Detector::Detector(DetectorSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  std::size_t in = spec_.input_channels;
  for (std::size_t s = 0; s < spec_.stage_count(); ++s) {
    for (std::size_t b = 0; b < spec_.blocks_per_stage; ++b) {
      const std::size_t out = spec_.widths[s];
      layers_.push_back({"stage" + std::to_string(s) + ".conv" + std::to_string(b),
                         Tensor({out, in, 3, 3}), std::vector<float>(out, 0.0f)});
      in = out;
    }
  }
  for (std::size_t h = 0; h < spec_.head_stages.size(); ++h) {
    const std::size_t c = spec_.widths[spec_.head_stages[h]];
    const std::size_t out = spec_.head_channels();
    layers_.push_back({"head" + std::to_string(h), Tensor({out, c, 3, 3}),
                       std::vector<float>(out, 0.0f)});
  }
}

Detector Detector::create(DetectorSpec spec, std::uint64_t seed) {
  Detector d(std::move(spec));
  Rng rng(seed);
  for (std::size_t i = 0; i < d.layers_.size(); ++i) {
    Tensor& w = d.layers_[i].weight;
    const double fan_in = static_cast<double>(w.dim(1) * w.dim(2) * w.dim(3));
    const bool head = i >= d.spec_.feature_count();
    const double bound = head ? 1.0 / std::sqrt(fan_in) : std::sqrt(6.0 / fan_in);
    for (auto& v : w.values()) v = static_cast<float>(rng.uniform(-bound, bound));
  }
  return d;
}

std::size_t Detector::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.numel() + l.bias.size();
  return n;
}

std::uint64_t Detector::parameter_hash() const {
  Fnv1a h;
  h.update(spec_.canonical());
  for (const auto& l : layers_) {
    h.update(l.name).update(l.weight.values()).update(l.bias);
  }
  return h.digest();
}

ParamGrads Detector::zero_grads() const {
  ParamGrads g;
  for (const auto& l : layers_) {
    g.weight.emplace_back(l.weight.shape());
    g.bias.emplace_back(l.bias.size(), 0.0f);
  }
  return g;
}

// ---- forward / backward -----------------------------------------------------

Detector::Pass Detector::forward(const Tensor& images) const {
  require_nchw(images, "detector input");
  if (images.dim(1) != spec_.input_channels || images.dim(2) != spec_.input_size ||
      images.dim(3) != spec_.input_size) {
    throw DimensionError("detector input " + to_string(images.shape()) +
                         " does not match spec " +
                         to_string({images.dim(0), spec_.input_channels,
                                    spec_.input_size, spec_.input_size}));
  }
  Pass pass;
  const Tensor centered = add_scalar(images, -0.5f);
  const Tensor* x = &centered;
  for (std::size_t s = 0; s < spec_.stage_count(); ++s) {
    pass.pool_input_shape.push_back(x->shape());
    auto pooled = maxpool2x2(*x);
    pass.pooled.push_back(std::move(pooled.output));
    pass.pool_argmax.push_back(std::move(pooled.argmax));
    x = &pass.pooled.back();
    for (std::size_t b = 0; b < spec_.blocks_per_stage; ++b) {
      const Layer& l = layers_[backbone_layer(s, b)];
      Tensor y = conv2d(*x, l.weight, 1, 1, std::span<const float>(l.bias));
      for (auto& v : y.values()) v = v > 0.0f ? v : 0.0f;
      pass.features.push_back(std::move(y));
      x = &pass.features.back();
    }
  }

  const std::size_t n = images.dim(0), k1 = spec_.num_classes + 1;
  const std::size_t anchors = spec_.anchor_count();
  pass.outputs.logits = Tensor({n, anchors, k1});
  pass.outputs.offsets = Tensor({n, anchors, 4});
  std::size_t begin = 0;
  for (std::size_t h = 0; h < spec_.head_stages.size(); ++h) {
    const Layer& l = layers_[head_layer(h)];
    const Tensor out = conv2d(pass.features[stage_output(spec_.head_stages[h])],
                              l.weight, 1, 1, std::span<const float>(l.bias));
    const std::size_t plane = out.dim(2) * out.dim(3);
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t c = 0; c < spec_.head_channels(); ++c) {
        const float* src = out.data() + (b * spec_.head_channels() + c) * plane;
        for (std::size_t p = 0; p < plane; ++p) {
          const std::size_t a = b * anchors + begin + p;
          if (c < k1) {
            pass.outputs.logits[a * k1 + c] = src[p];
          } else {
            pass.outputs.offsets[a * 4 + (c - k1)] = src[p];
          }
        }
      }
    }
    begin += plane;
  }
  return pass;
}

ParamGrads Detector::backward(const Pass& pass, const DetectionOutput<float>& grad,
                              std::span<const FeatureGrad> feature_grads) const {
  ParamGrads g = zero_grads();
  std::vector<Tensor> grad_features;
  for (const auto& f : pass.features) grad_features.emplace_back(f.shape());
  for (const auto& fg : feature_grads) accumulate(grad_features.at(fg.index), fg.grad);

  const std::size_t n = pass.outputs.logits.dim(0), k1 = spec_.num_classes + 1;
  const std::size_t anchors = spec_.anchor_count();
  std::size_t begin = 0;
  for (std::size_t h = 0; h < spec_.head_stages.size(); ++h) {
    const std::size_t feat = stage_output(spec_.head_stages[h]);
    const Tensor& input = pass.features[feat];
    const std::size_t cells = input.dim(2) * input.dim(3);
    Tensor gout({n, spec_.head_channels(), input.dim(2), input.dim(3)});
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t c = 0; c < spec_.head_channels(); ++c) {
        float* dst = gout.data() + (b * spec_.head_channels() + c) * cells;
        for (std::size_t p = 0; p < cells; ++p) {
          const std::size_t a = b * anchors + begin + p;
          dst[p] = c < k1 ? grad.logits[a * k1 + c] : grad.offsets[a * 4 + (c - k1)];
        }
      }
    }
    const std::size_t li = head_layer(h);
    auto cg = conv2d_backward(input, layers_[li].weight, gout, 1, 1);
    g.weight[li] = std::move(cg.kernel);
    g.bias[li] = std::move(cg.bias);
    accumulate(grad_features[feat], cg.input);
    begin += cells;
  }

  for (std::size_t s = spec_.stage_count(); s-- > 0;) {
    for (std::size_t b = spec_.blocks_per_stage; b-- > 0;) {
      const std::size_t li = backbone_layer(s, b);
      const Tensor& input = b == 0 ? pass.pooled[s] : pass.features[li - 1];
      const Tensor gpre = relu_backward(pass.features[li], grad_features[li]);
      const bool need_input = !(s == 0 && b == 0);
      auto cg = conv2d_backward(input, layers_[li].weight, gpre, 1, 1, need_input);
      g.weight[li] = std::move(cg.kernel);
      g.bias[li] = std::move(cg.bias);
      if (!need_input) continue;
      if (b > 0) {
        accumulate(grad_features[li - 1], cg.input);
      } else {
        const Tensor gin =
            maxpool2x2_backward(cg.input, pass.pool_argmax[s], pass.pool_input_shape[s]);
        accumulate(grad_features[stage_output(s - 1)], gin);
      }
    }
  }
  return g;
}

// ---- targets and losses -----------------------------------------------------

std::array<double, 4> encode_box(const BoundingBox& gt, const BoundingBox& anchor) {
  return {(gt.cx() - anchor.cx()) / anchor.width() / kCenterVariance,
          (gt.cy() - anchor.cy()) / anchor.height() / kCenterVariance,
          std::log(gt.width() / anchor.width()) / kSizeVariance,
          std::log(gt.height() / anchor.height()) / kSizeVariance};
}

BoundingBox decode_box(std::span<const double, 4> offset, const BoundingBox& anchor) {
  // exp() argument bound keeps a wild prediction finite.
  constexpr double kMaxLogScale = 4.135166556742356;  // log(1000 / 16)
  const double cx = anchor.cx() + offset[0] * kCenterVariance * anchor.width();
  const double cy = anchor.cy() + offset[1] * kCenterVariance * anchor.height();
  const double w =
      anchor.width() * std::exp(std::min(offset[2] * kSizeVariance, kMaxLogScale));
  const double h =
      anchor.height() * std::exp(std::min(offset[3] * kSizeVariance, kMaxLogScale));
  return {0, std::clamp(cx - 0.5 * w, 0.0, 1.0), std::clamp(cy - 0.5 * h, 0.0, 1.0),
          std::clamp(cx + 0.5 * w, 0.0, 1.0), std::clamp(cy + 0.5 * h, 0.0, 1.0)};
}

std::vector<AnchorTarget> assign_targets(const AnchorGrid& anchors,
                                         std::span<const BoundingBox> boxes,
                                         double pos_iou) {
  const std::size_t a_count = anchors.boxes.size();
  std::vector<AnchorTarget> targets(a_count);
  if (boxes.empty()) return targets;
  std::vector<int> match(a_count, -1);
  std::vector<double> best_iou(a_count, 0.0);
  for (std::size_t a = 0; a < a_count; ++a) {
    for (std::size_t b = 0; b < boxes.size(); ++b) {
      const double v = iou(anchors.boxes[a], boxes[b]);
      if (v > best_iou[a]) {
        best_iou[a] = v;
        match[a] = static_cast<int>(b);
      }
    }
    if (best_iou[a] < pos_iou) match[a] = -1;
  }
  for (std::size_t b = 0; b < boxes.size(); ++b) {
    std::size_t best = 0;
    double best_v = -1;
    for (std::size_t a = 0; a < a_count; ++a) {
      const double v = iou(anchors.boxes[a], boxes[b]);
      if (v > best_v) {
        best_v = v;
        best = a;
      }
    }
    match[best] = static_cast<int>(b);
  }
  for (std::size_t a = 0; a < a_count; ++a) {
    if (match[a] < 0) continue;
    const BoundingBox& gt = boxes[static_cast<std::size_t>(match[a])];
    targets[a].label = gt.class_id + 1;
    targets[a].offset = encode_box(gt, anchors.boxes[a]);
  }
  return targets;
}

template <typename T>
DetectionLoss<T> detection_loss(const DetectionOutput<T>& outputs,
                                std::span<const std::vector<AnchorTarget>> targets,
                                bool want_grad) {
  const auto& logits = outputs.logits;
  const auto& offsets = outputs.offsets;
  if (logits.rank() != 3 || offsets.rank() != 3 || offsets.dim(2) != 4 ||
      logits.dim(0) != offsets.dim(0) || logits.dim(1) != offsets.dim(1)) {
    throw DimensionError("detection_loss: logits " + to_string(logits.shape()) +
                         " / offsets " + to_string(offsets.shape()));
  }
  const std::size_t n = logits.dim(0), anchors = logits.dim(1), k1 = logits.dim(2);
  if (targets.size() != n) {
    throw DimensionError("detection_loss: " + std::to_string(targets.size()) +
                         " target lists for batch of " + std::to_string(n));
  }
  DetectionLoss<T> r;
  if (want_grad) {
    r.grad.logits = BasicTensor<T>(logits.shape());
    r.grad.offsets = BasicTensor<T>(offsets.shape());
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<T> row_grad(k1);
  std::vector<std::pair<double, std::size_t>> negatives;
  for (std::size_t b = 0; b < n; ++b) {
    const auto& tg = targets[b];
    if (tg.size() != anchors) {
      throw DimensionError("detection_loss: target count " + std::to_string(tg.size()) +
                           " vs anchors " + std::to_string(anchors));
    }
    auto row = [&](std::size_t a) {
      return std::span<const T>(logits.data() + (b * anchors + a) * k1, k1);
    };
    std::vector<std::size_t> positives;
    negatives.clear();
    for (std::size_t a = 0; a < anchors; ++a) {
      if (tg[a].label > 0) {
        positives.push_back(a);
      } else {
        negatives.emplace_back(
            static_cast<double>(softmax_cross_entropy(row(a), std::size_t{0})), a);
      }
    }
    const std::size_t want = positives.empty()
                                 ? kNegativesWithoutPositives
                                 : kNegativeRatio * positives.size();
    const std::size_t keep = std::min(want, negatives.size());
    std::stable_sort(negatives.begin(), negatives.end(),
                     [](const auto& l, const auto& r) { return l.first > r.first; });

    const std::size_t cls_count = positives.size() + keep;
    if (cls_count > 0) {
      const double norm = inv_n / static_cast<double>(cls_count);
      auto add_ce = [&](std::size_t a, std::size_t label) {
        const T ce = softmax_cross_entropy(row(a), label,
                                           want_grad ? std::span<T>(row_grad)
                                                     : std::span<T>());
        r.l_c += norm * static_cast<double>(ce);
        if (want_grad) {
          T* g = r.grad.logits.data() + (b * anchors + a) * k1;
          for (std::size_t k = 0; k < k1; ++k) g[k] = static_cast<T>(norm * row_grad[k]);
        }
      };
      for (std::size_t a : positives) add_ce(a, static_cast<std::size_t>(tg[a].label));
      for (std::size_t i = 0; i < keep; ++i) add_ce(negatives[i].second, 0);
    }

    if (!positives.empty()) {
      const double norm = inv_n / (4.0 * static_cast<double>(positives.size()));
      for (std::size_t a : positives) {
        const T* p = offsets.data() + (b * anchors + a) * 4;
        for (std::size_t j = 0; j < 4; ++j) {
          const T target = static_cast<T>(tg[a].offset[j]);
          r.l_l += norm * static_cast<double>(smooth_l1(p[j], target));
          if (want_grad) {
            r.grad.offsets[(b * anchors + a) * 4 + j] =
                static_cast<T>(norm * static_cast<double>(smooth_l1_grad(p[j], target)));
          }
        }
      }
    }
  }
  return r;
}

std::vector<ScoredBox> nms(std::vector<ScoredBox> boxes, double iou_threshold) {
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return boxes[a].score > boxes[b].score;
  });
  std::vector<ScoredBox> kept;
  for (std::size_t i : order) {
    bool suppressed = false;
    for (const auto& k : kept) {
      if (k.box.class_id == boxes[i].box.class_id &&
          iou(k.box, boxes[i].box) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(boxes[i]);
  }
  return kept;
}

std::vector<ScoredBox> infer_decode(const DetectionOutput<float>& outputs,
                                    std::size_t image, const AnchorGrid& anchors,
                                    double score_threshold, double nms_iou,
                                    std::size_t max_detections) {
  const std::size_t a_count = outputs.logits.dim(1), k1 = outputs.logits.dim(2);
  if (a_count != anchors.boxes.size()) {
    throw DimensionError("infer_decode: " + std::to_string(a_count) +
                         " predictions for " + std::to_string(anchors.boxes.size()) +
                         " anchors");
  }
  std::vector<ScoredBox> candidates;
  std::vector<double> prob(k1);
  for (std::size_t a = 0; a < a_count; ++a) {
    const float* l = outputs.logits.data() + (image * a_count + a) * k1;
    const double peak = *std::max_element(l, l + k1);
    double sum = 0;
    for (std::size_t k = 0; k < k1; ++k) sum += prob[k] = std::exp(l[k] - peak);
    const float* o = outputs.offsets.data() + (image * a_count + a) * 4;
    const std::array<double, 4> off{o[0], o[1], o[2], o[3]};
    for (std::size_t k = 1; k < k1; ++k) {
      const double score = prob[k] / sum;
      if (score < score_threshold) continue;
      BoundingBox box = decode_box(off, anchors.boxes[a]);
      if (!(box.x2 > box.x1 && box.y2 > box.y1)) continue;
      box.class_id = static_cast<int>(k - 1);
      candidates.push_back({box, score});
    }
  }
  auto kept = nms(std::move(candidates), nms_iou);
  if (kept.size() > max_detections) kept.resize(max_detections);
  return kept;
}

template DetectionLoss<float> detection_loss(
    const DetectionOutput<float>&, std::span<const std::vector<AnchorTarget>>, bool);
template DetectionLoss<double> detection_loss(
    const DetectionOutput<double>&, std::span<const std::vector<AnchorTarget>>, bool);

}  // namespace hgd
