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
#ifndef HGD_HARNESS_CONFIG_HPP_
#define HGD_HARNESS_CONFIG_HPP_

// Experiment configuration: flat "key = value" text, '#' comments.
//
//   data.seed, data.train, data.test, data.dir
//   model.widths (teacher; the student is halved), model.blocks,
//   model.head_stages, model.anchor_scales, model.num_classes,
//   model.input_size
//   imitation.stages   all | none | heads | early | late | "0-1,3"
//   imitation.metric   l2 | cosine
//   imitation.macro    none | focal | stage_mean | stage_variance
//   imitation.micro    none | spatial_mean | spatial_variance | gt_mask
//   imitation.gamma, imitation.lambda1, imitation.epsilon
//   imitation.lambda2  auto | number;  imitation.lambda2_scale
//   imitation.export_weights  true | false (CSV grids of the last step)
//   train.optimizer (sgd | adam), train.epochs, train.warmup_epochs (auto = 10%), train.lr,
//   train.momentum, train.weight_decay, train.lr_decay,
//   train.milestones (auto = 60%,80%), train.batch_size, train.seed,
//   train.distill_epoch_factor, train.eval_every
//   eval.score_thresh, eval.nms_iou, eval.iou_sweep
//   output.dir, output.run

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hgd/detector.hpp"
#include "hgd/imitation.hpp"

namespace hgd::harness {

struct DataConfig {
  std::uint64_t seed = 1;
  std::size_t train = 400;
  std::size_t test = 100;
  std::string dir;  // empty: generate in memory
};

struct TrainConfig {
  std::size_t epochs = 60;
  std::optional<std::size_t> warmup_epochs;
  std::string optimizer = "adam";  // sgd | adam (momentum is beta1)
  double lr = 0.001;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double lr_decay = 0.1;
  std::optional<std::vector<std::size_t>> milestones;
  std::size_t batch_size = 16;
  std::uint64_t seed = 1;
  double distill_epoch_factor = 1.25;
  std::size_t eval_every = 1;
};

struct EvalConfig {
  double score_thresh = 0.05;
  double nms_iou = 0.45;
  std::vector<double> iou_sweep;
};

struct Schedule {
  std::size_t epochs = 0;
  std::size_t warmup = 0;
  std::vector<std::size_t> milestones;
  double lr_at(std::size_t epoch, double base, double decay) const;
};

struct ExperimentConfig {
  DataConfig data;
  DetectorSpec teacher;
  ImitationConfig imitation;
  std::string stages = "all";
  bool export_weights = false;
  TrainConfig train;
  EvalConfig eval;
  std::string output_dir = "runs";
  std::string run;

  // Normalised "key=value" lines of every key that was set, sorted.
  std::string canonical;
  std::uint64_t hash = 0;

  DetectorSpec student() const { return teacher.halved(); }
  // Epoch count, warmup and milestones for a run. `distill` stretches the
  // epoch count by distill_epoch_factor; explicit values are kept as given.
  Schedule schedule(bool distill) const;
  void validate() const;
};

// Applies `overrides` ("key=value") on top of `text`. Throws ConfigError on
// unknown keys or bad values.
ExperimentConfig parse_config(std::string_view text,
                              std::span<const std::string> overrides = {},
                              const std::string& origin = "config");
// An empty path means defaults plus overrides.
ExperimentConfig load_config(const std::filesystem::path& path,
                             std::span<const std::string> overrides = {});

// Resolves a stage selector against the matched stages (sorted ascending).
// "early"/"late" split the list in halves; "heads" keeps detector head
// stages.
std::vector<std::size_t> select_stages(std::string_view selector,
                                       std::span<const std::size_t> matched,
                                       std::span<const std::size_t> head_stages);

}  // namespace hgd::harness

#endif  // HGD_HARNESS_CONFIG_HPP_
