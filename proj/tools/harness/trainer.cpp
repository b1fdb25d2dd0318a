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
#include "harness/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "hgd/checkpoint.hpp"
#include "hgd/hash.hpp"
#include "hgd/imitation.hpp"
#include "hgd/io.hpp"
#include "hgd/random.hpp"
#include "hgd/reweighting.hpp"
#include "hgd/strings.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace hgd::harness {

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kAdapterStream = 2;
constexpr std::uint64_t kShuffleStream = 3;
constexpr std::size_t kEvalBatch = 25;

// Momentum SGD or Adam; L2 decay on weights only. Detector layers and
// adapter kernels are updated with the same rule.
class Optimizer {
 public:
  Optimizer(const TrainConfig& config) : config_(config) {}

  void begin_step() { ++t_; }

  void update(const std::string& key, std::span<float> w, std::span<const float> g,
              float lr, bool decay) {
    auto& st = state_[key];
    if (st.m.empty()) {
      st.m.assign(w.size(), 0.0f);
      if (config_.optimizer == "adam") st.v.assign(w.size(), 0.0f);
    }
    const float wd = decay ? static_cast<float>(config_.weight_decay) : 0.0f;
    if (config_.optimizer == "adam") {
      const float b1 = static_cast<float>(config_.momentum), b2 = 0.999f;
      const float c1 = 1.0f - std::pow(b1, static_cast<float>(t_));
      const float c2 = 1.0f - std::pow(b2, static_cast<float>(t_));
      for (std::size_t k = 0; k < w.size(); ++k) {
        const float gk = g[k] + wd * w[k];
        st.m[k] = b1 * st.m[k] + (1.0f - b1) * gk;
        st.v[k] = b2 * st.v[k] + (1.0f - b2) * gk * gk;
        w[k] -= lr * (st.m[k] / c1) / (std::sqrt(st.v[k] / c2) + 1e-8f);
      }
      return;
    }
    const float mu = static_cast<float>(config_.momentum);
    for (std::size_t k = 0; k < w.size(); ++k) {
      st.m[k] = mu * st.m[k] + g[k] + wd * w[k];
      w[k] -= lr * st.m[k];
    }
  }

  void step(Detector& model, const ParamGrads& grads, float lr) {
    auto& layers = model.layers();
    for (std::size_t i = 0; i < layers.size(); ++i) {
      update(layers[i].name + ".weight", layers[i].weight.values(),
             grads.weight[i].values(), lr, true);
      update(layers[i].name + ".bias", layers[i].bias, grads.bias[i], lr, false);
    }
  }

  void step(AdapterBank& adapters, const std::map<std::size_t, Tensor>& grads, float lr) {
    for (const auto& [stage, g] : grads) {
      update("adapter" + std::to_string(stage), adapters.kernel(stage).values(), g.values(),
             lr, true);
    }
  }

 private:
  struct State {
    std::vector<float> m, v;
  };
  const TrainConfig& config_;
  std::map<std::string, State> state_;
  std::size_t t_ = 0;
};

// Gathers rows `indices` of an N x C x H x W tensor.
Tensor gather(const Tensor& all, std::span<const std::size_t> indices) {
  Shape s = all.shape();
  const std::size_t stride = all.numel() / s[0];
  s[0] = indices.size();
  Tensor out(s);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::copy_n(all.data() + indices[i] * stride, stride, out.data() + i * stride);
  }
  return out;
}

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(v[i - 1], v[j]);
  }
}

// Teacher representatives for the selected stages over the whole train split.
std::vector<Tensor> teacher_cache(const Detector& teacher,
                                  std::span<const LabeledScene> scenes,
                                  std::span<const std::size_t> stages) {
  std::vector<Tensor> cache;
  const auto all = iota_indices(scenes.size());
  for (std::size_t b = 0; b < scenes.size(); b += kEvalBatch) {
    const std::size_t e = std::min(scenes.size(), b + kEvalBatch);
    const std::span<const std::size_t> idx(all.data() + b, e - b);
    const auto pass = teacher.forward(stack_images(scenes, idx));
    for (std::size_t k = 0; k < stages.size(); ++k) {
      const Tensor& f = pass.features[teacher.stage_output(stages[k])];
      if (cache.size() <= k) {
        Shape s = f.shape();
        s[0] = scenes.size();
        cache.emplace_back(s);
      }
      std::copy(f.values().begin(), f.values().end(),
                cache[k].data() + b * (f.numel() / f.dim(0)));
    }
  }
  return cache;
}

std::string stage_json_line(std::size_t step, std::size_t epoch, double l_c, double l_l,
                            const ImitationResult<float>& imit, double lambda2,
                            double total) {
  nlohmann::ordered_json j;
  j["step"] = step;
  j["epoch"] = epoch;
  j["L_c"] = l_c;
  j["L_l"] = l_l;
  j["L_i"] = imit.loss;
  j["lambda2"] = lambda2;
  j["total"] = total;
  j["stage_raw"] = imit.stage_raw;
  j["stage_weighted"] = imit.stage_loss;
  j["u"] = imit.stage_u;
  j["skipped"] = imit.skipped;
  return j.dump() + "\n";
}

struct LoopSetup {
  std::string kind;
  const Detector* teacher = nullptr;
  std::vector<std::size_t> stages;
  Schedule schedule;
  bool imitation_active = false;
};

RunResult run_loop(const ExperimentConfig& config, const Dataset& data, Detector model,
                   const LoopSetup& setup, const RunOptions& options) {
  const auto& train = data.split("train");
  const auto& test = data.split("test");
  const auto anchors = make_anchors(model.spec());
  std::vector<std::vector<AnchorTarget>> targets;
  std::vector<std::vector<BoundingBox>> boxes;
  for (const auto& s : train) {
    targets.push_back(assign_targets(anchors, s.boxes));
    boxes.push_back(s.boxes);
  }

  MatchPlan plan;
  AdapterBank adapters;
  std::vector<Tensor> cache;
  if (!setup.stages.empty()) {
    plan = plan_for(model.spec(), setup.teacher->spec());
    adapters = AdapterBank::create(plan, mix_seed(config.train.seed, kAdapterStream));
    cache = teacher_cache(*setup.teacher, train, setup.stages);
  }

  TrainReport report;
  report.kind = setup.kind;
  report.run = config.run.empty() ? setup.kind : config.run;
  report.config_hash = hex64(config.hash);
  report.spec_hash = hex64(model.spec().hash());
  report.stages = setup.stages;
  if (setup.teacher) report.teacher_hash_before = hex64(setup.teacher->parameter_hash());

  const ImitationConfig& ic = config.imitation;
  std::optional<double> lambda2 = ic.lambda2;
  if (!setup.imitation_active) lambda2 = 0.0;
  double warm_det = 0, warm_imit = 0;

  Optimizer opt(config.train);
  Rng order_rng(mix_seed(config.train.seed, kShuffleStream));
  auto order = iota_indices(train.size());
  const std::size_t bs = config.train.batch_size;
  std::string steps_log;
  std::size_t step = 0;
  WeightMaps last_weights;
  std::vector<std::size_t> last_batch;

  for (std::size_t epoch = 0; epoch < setup.schedule.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const bool warmup = epoch < setup.schedule.warmup;
    if (!warmup && !lambda2) {
      lambda2 = warm_imit > 0 ? ic.lambda2_scale * warm_det / warm_imit : 0.0;
      report.lambda2 = lambda2;
      if (options.log) *options.log << "  lambda2 frozen at " << *lambda2 << "\n";
    }
    const double lambda2_eff = warmup ? 0.0 : *lambda2;
    const double lr = setup.schedule.lr_at(epoch, config.train.lr, config.train.lr_decay);
    shuffle(order, order_rng);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.lambda2 = lambda2_eff;
    std::size_t steps_in_epoch = 0;
    if (epoch + 1 == setup.schedule.warmup) {
      warm_det = warm_imit = 0;
    }

    for (std::size_t b = 0; b < order.size(); b += bs) {
      const std::size_t e = std::min(order.size(), b + bs);
      const std::span<const std::size_t> idx(order.data() + b, e - b);
      const Tensor images = stack_images(train, idx);
      std::vector<Tensor> teacher_batch;
      for (const auto& c : cache) teacher_batch.push_back(gather(c, idx));
      auto tf = training_forward(model, adapters, plan, setup.stages, teacher_batch, images);

      std::vector<std::vector<AnchorTarget>> batch_targets;
      std::vector<std::vector<BoundingBox>> batch_boxes;
      for (auto i : idx) {
        batch_targets.push_back(targets[i]);
        batch_boxes.push_back(boxes[i]);
      }
      auto det = detection_loss(tf.pass.outputs, batch_targets, true);

      ImitationResult<float> imit;
      WeightMaps weights;
      const bool want_imit_grad = lambda2_eff > 0;
      if (!tf.pairs.empty()) {
        const std::span<const MatchedPair> pairs(tf.pairs);
        weights.v = micro_weights(ic.micro, pairs, batch_boxes);
        std::vector<std::vector<double>> terms;
        if (ic.macro == MacroWeight::kFocal) {
          terms = stage_terms(pairs, ic.metric, ic.epsilon, std::span<const Tensor64>(weights.v));
        }
        weights.u = macro_weights(ic, pairs, terms);
        weights.macro = std::string(name(ic.macro));
        weights.micro = std::string(name(ic.micro));
        validate(weights);
        imit = reweighted_aggregate(pairs, ic.metric, ic.epsilon, weights, want_imit_grad);
      }
      const double total =
          total_loss(det.l_c, det.l_l, imit.loss, ic.lambda1, lambda2_eff);
      if (warmup && epoch + 1 == setup.schedule.warmup) {
        warm_det += det.l_c + ic.lambda1 * det.l_l;
        warm_imit += imit.loss;
      }
      if (!lambda2 && setup.schedule.warmup == 0) {
        // No warmup: scale from the first batch before any update.
        lambda2 = imit.loss > 0 ? ic.lambda2_scale * (det.l_c + ic.lambda1 * det.l_l) / imit.loss
                                : 0.0;
        report.lambda2 = lambda2;
      }

      for (auto& g : det.grad.offsets.values()) g *= static_cast<float>(ic.lambda1);
      std::vector<FeatureGrad> feature_grads;
      std::map<std::size_t, Tensor> adapter_grads;
      if (want_imit_grad) {
        for (std::size_t k = 0; k < tf.pairs.size(); ++k) {
          const std::size_t stage = setup.stages[k];
          Tensor g = scale(imit.grad[k], static_cast<float>(lambda2_eff));
          auto ag = adapt_backward(*plan.find(stage), tf.pairs[k].student_raw, adapters, g);
          feature_grads.push_back({model.stage_output(stage), std::move(ag.student_raw)});
          adapter_grads.emplace(stage, std::move(ag.kernel));
        }
      }
      const ParamGrads grads = model.backward(tf.pass, det.grad, feature_grads);
      opt.begin_step();
      opt.step(model, grads, static_cast<float>(lr));
      opt.step(adapters, adapter_grads, static_cast<float>(lr));

      rec.l_c += det.l_c;
      rec.l_l += det.l_l;
      rec.l_i += imit.loss;
      rec.total += total;
      ++steps_in_epoch;
      steps_log += stage_json_line(step++, epoch, det.l_c, det.l_l, imit, lambda2_eff, total);
      last_weights = std::move(weights);
      last_batch.assign(idx.begin(), idx.end());
    }
    const double inv = 1.0 / static_cast<double>(steps_in_epoch);
    rec.l_c *= inv;
    rec.l_l *= inv;
    rec.l_i *= inv;
    rec.total *= inv;
    const bool last = epoch + 1 == setup.schedule.epochs;
    const std::size_t every = config.train.eval_every;
    if (last || (every > 0 && (epoch + 1) % every == 0)) {
      rec.map = evaluate(model, test, config.eval).map;
    }
    report.epochs.push_back(rec);
    if (options.log) {
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      *options.log << "  [" << report.run << "] epoch " << epoch + 1 << "/"
                   << setup.schedule.epochs << " L_c=" << rec.l_c << " L_l=" << rec.l_l
                   << " L_i=" << rec.l_i << " lr=" << lr;
      if (rec.map) *options.log << " mAP=" << *rec.map;
      *options.log << " (" << secs << "s)\n";
    }
  }

  if (setup.teacher) {
    report.teacher_hash_after = hex64(setup.teacher->parameter_hash());
    if (report.teacher_hash_after != report.teacher_hash_before) {
      throw InvariantError("teacher parameters changed during distillation (" +
                           report.teacher_hash_before + " -> " +
                           report.teacher_hash_after + ")");
    }
  }
  report.parameter_hash = hex64(model.parameter_hash());

  if (!options.out_dir.empty()) {
    const fs::path ckpt = options.out_dir / "checkpoint.hgd";
    save_checkpoint(ckpt, model);
    report.checkpoint = ckpt.string();
    write_file_atomic(options.out_dir / "steps.jsonl", steps_log);
    if (!setup.stages.empty()) {
      write_file_atomic(options.out_dir / "match_plan.txt", plan.report());
    }
    if (config.export_weights && !last_weights.v.empty()) {
      for (std::size_t k = 0; k < last_weights.v.size(); ++k) {
        for (std::size_t i = 0; i < last_batch.size(); ++i) {
          std::ostringstream os;
          write_grid_csv(os, last_weights.v[k], i);
          write_file_atomic(options.out_dir / "weights" /
                                ("v_stage" + std::to_string(setup.stages[k]) + "_scene" +
                                 std::to_string(last_batch[i]) + ".csv"),
                            os.str());
        }
      }
      std::ostringstream u;
      u << "stage,scene,u\n";
      for (std::size_t k = 0; k < last_weights.u.size(); ++k) {
        for (std::size_t i = 0; i < last_weights.u[k].size(); ++i) {
          u << setup.stages[k] << ',' << last_batch[i] << ','
            << format_double(last_weights.u[k][i]) << '\n';
        }
      }
      write_file_atomic(options.out_dir / "weights" / "u.csv", u.str());
    }
    write_file_atomic(options.out_dir / "report.json", report.to_json());
  }
  return {std::move(report), std::move(model)};
}

}  // namespace

Dataset load_dataset(const ExperimentConfig& config) {
  if (!config.data.dir.empty()) return read_dataset(config.data.dir);
  SceneSpec spec;
  spec.size = config.teacher.input_size;
  spec.num_classes = config.teacher.num_classes;
  return generate_dataset(config.data.seed, config.data.train, config.data.test, spec);
}

std::vector<Shape> feature_shapes(const DetectorSpec& spec) {
  std::vector<Shape> shapes;
  for (std::size_t s = 0; s < spec.stage_count(); ++s) {
    for (std::size_t b = 0; b < spec.blocks_per_stage; ++b) {
      shapes.push_back({1, spec.widths[s], spec.stage_size(s), spec.stage_size(s)});
    }
  }
  return shapes;
}

MatchPlan plan_for(const DetectorSpec& student, const DetectorSpec& teacher) {
  auto representatives = [](const DetectorSpec& spec) {
    const auto shapes = feature_shapes(spec);
    const auto ids = assign_stage_ids(shapes);
    std::vector<Shape> out;
    for (auto i : last_of_each_stage(ids)) out.push_back(shapes[i]);
    return out;
  };
  return build_match_plan(representatives(student), representatives(teacher));
}

EvalResult evaluate(const Detector& model, std::span<const LabeledScene> scenes,
                    const EvalConfig& config) {
  const auto anchors = make_anchors(model.spec());
  std::vector<std::vector<ScoredBox>> dets;
  std::vector<std::vector<BoundingBox>> gts;
  const auto all = iota_indices(scenes.size());
  for (std::size_t b = 0; b < scenes.size(); b += kEvalBatch) {
    const std::size_t e = std::min(scenes.size(), b + kEvalBatch);
    const auto out = model.infer(stack_images(scenes, {all.data() + b, e - b}));
    for (std::size_t i = 0; i < e - b; ++i) {
      dets.push_back(infer_decode(out, i, anchors, config.score_thresh, config.nms_iou));
      gts.push_back(scenes[b + i].boxes);
    }
  }
  return mean_ap(dets, gts, model.spec().num_classes, 0.5, config.iou_sweep);
}

TrainingForward training_forward(const Detector& student, const AdapterBank& adapters,
                                 const MatchPlan& plan,
                                 std::span<const std::size_t> stages,
                                 std::span<const Tensor> teacher_features,
                                 const Tensor& images) {
  TrainingForward tf;
  tf.pass = student.forward(images);
  for (std::size_t k = 0; k < stages.size(); ++k) {
    const StagePair* pair = plan.find(stages[k]);
    if (!pair) {
      throw ConfigError("stage " + std::to_string(stages[k]) + " is not in the match plan");
    }
    tf.pairs.push_back(adapt(*pair, tf.pass.features[student.stage_output(stages[k])],
                             teacher_features[k], adapters));
  }
  return tf;
}

RunResult train_teacher(const ExperimentConfig& config, const Dataset& data,
                        const RunOptions& options) {
  LoopSetup setup;
  setup.kind = "teacher";
  setup.schedule = config.schedule(false);
  return run_loop(config, data,
                  Detector::create(config.teacher, mix_seed(config.train.seed, kInitStream)),
                  setup, options);
}

RunResult train_student(const ExperimentConfig& config, const Dataset& data,
                        const Detector* teacher, const RunOptions& options) {
  const DetectorSpec spec = config.student();
  LoopSetup setup;
  if (teacher) {
    if (teacher->spec() != config.teacher) {
      throw ConfigError("teacher checkpoint spec does not match model.* config");
    }
    const MatchPlan plan = plan_for(spec, teacher->spec());
    std::vector<std::size_t> matched;
    for (const auto& p : plan.pairs) matched.push_back(p.stage);
    setup.stages = select_stages(config.stages, matched, spec.head_stages);
  }
  setup.teacher = setup.stages.empty() ? nullptr : teacher;
  setup.imitation_active =
      !setup.stages.empty() && !(config.imitation.lambda2 && *config.imitation.lambda2 == 0);
  setup.kind = setup.stages.empty() ? "student" : "distill";
  setup.schedule = config.schedule(setup.imitation_active);

  const Detector student = Detector::create(spec, mix_seed(config.train.seed, kInitStream));
  if (teacher) {
    const double ratio = static_cast<double>(student.parameter_count()) /
                         static_cast<double>(teacher->parameter_count());
    if (!(ratio < 0.3)) {
      throw InvariantError("student has " + std::to_string(ratio * 100) +
                           "% of the teacher's parameters (must be < 30%)");
    }
  }
  return run_loop(config, data, student, setup, options);
}

}  // namespace hgd::harness
