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
#include "harness/config.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include "hgd/hash.hpp"
#include "hgd/io.hpp"
#include "hgd/strings.hpp"

namespace hgd::harness {

namespace {

bool parse_bool(std::string_view s) {
  const std::string t = trim(s);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError("not a boolean: '" + t + "'");
}

std::optional<std::size_t> parse_auto_size(std::string_view s) {
  if (trim(s) == "auto") return std::nullopt;
  return parse_size(s);
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"data.seed", [](auto& c, const auto& v) { c.data.seed = parse_size(v); }},
      {"data.train", [](auto& c, const auto& v) { c.data.train = parse_size(v); }},
      {"data.test", [](auto& c, const auto& v) { c.data.test = parse_size(v); }},
      {"data.dir", [](auto& c, const auto& v) { c.data.dir = v; }},
      {"model.widths", [](auto& c, const auto& v) { c.teacher.widths = parse_size_list(v); }},
      {"model.blocks", [](auto& c, const auto& v) { c.teacher.blocks_per_stage = parse_size(v); }},
      {"model.head_stages",
       [](auto& c, const auto& v) { c.teacher.head_stages = parse_size_list(v); }},
      {"model.anchor_scales",
       [](auto& c, const auto& v) { c.teacher.anchor_scales = parse_double_list(v); }},
      {"model.num_classes", [](auto& c, const auto& v) { c.teacher.num_classes = parse_size(v); }},
      {"model.input_size", [](auto& c, const auto& v) { c.teacher.input_size = parse_size(v); }},
      {"imitation.stages", [](auto& c, const auto& v) { c.stages = v; }},
      {"imitation.metric", [](auto& c, const auto& v) { c.imitation.metric = parse_metric(v); }},
      {"imitation.macro", [](auto& c, const auto& v) { c.imitation.macro = parse_macro(v); }},
      {"imitation.micro", [](auto& c, const auto& v) { c.imitation.micro = parse_micro(v); }},
      {"imitation.gamma", [](auto& c, const auto& v) { c.imitation.gamma = parse_double(v); }},
      {"imitation.lambda1", [](auto& c, const auto& v) { c.imitation.lambda1 = parse_double(v); }},
      {"imitation.lambda2",
       [](auto& c, const auto& v) {
         if (v == "auto") {
           c.imitation.lambda2.reset();
         } else {
           c.imitation.lambda2 = parse_double(v);
         }
       }},
      {"imitation.lambda2_scale",
       [](auto& c, const auto& v) { c.imitation.lambda2_scale = parse_double(v); }},
      {"imitation.epsilon", [](auto& c, const auto& v) { c.imitation.epsilon = parse_double(v); }},
      {"imitation.export_weights", [](auto& c, const auto& v) { c.export_weights = parse_bool(v); }},
      {"train.epochs", [](auto& c, const auto& v) { c.train.epochs = parse_size(v); }},
      {"train.warmup_epochs",
       [](auto& c, const auto& v) { c.train.warmup_epochs = parse_auto_size(v); }},
      {"train.optimizer",
       [](auto& c, const auto& v) {
         if (v != "sgd" && v != "adam") throw ConfigError("unknown optimizer '" + v + "'");
         c.train.optimizer = v;
       }},
      {"train.lr", [](auto& c, const auto& v) { c.train.lr = parse_double(v); }},
      {"train.momentum", [](auto& c, const auto& v) { c.train.momentum = parse_double(v); }},
      {"train.weight_decay", [](auto& c, const auto& v) { c.train.weight_decay = parse_double(v); }},
      {"train.lr_decay", [](auto& c, const auto& v) { c.train.lr_decay = parse_double(v); }},
      {"train.milestones",
       [](auto& c, const auto& v) {
         if (v == "auto") {
           c.train.milestones.reset();
         } else {
           c.train.milestones = parse_size_list(v);
         }
       }},
      {"train.batch_size", [](auto& c, const auto& v) { c.train.batch_size = parse_size(v); }},
      {"train.seed", [](auto& c, const auto& v) { c.train.seed = parse_size(v); }},
      {"train.distill_epoch_factor",
       [](auto& c, const auto& v) { c.train.distill_epoch_factor = parse_double(v); }},
      {"train.eval_every", [](auto& c, const auto& v) { c.train.eval_every = parse_size(v); }},
      {"eval.score_thresh", [](auto& c, const auto& v) { c.eval.score_thresh = parse_double(v); }},
      {"eval.nms_iou", [](auto& c, const auto& v) { c.eval.nms_iou = parse_double(v); }},
      {"eval.iou_sweep", [](auto& c, const auto& v) { c.eval.iou_sweep = parse_double_list(v); }},
      {"output.dir", [](auto& c, const auto& v) { c.output_dir = v; }},
      {"output.run", [](auto& c, const auto& v) { c.run = v; }},
  };
  return table;
}

void apply_line(std::map<std::string, std::string>& kv, std::string_view raw,
                const std::string& where) {
  std::string line(raw);
  if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
  line = trim(line);
  if (line.empty()) return;
  const auto eq = line.find('=');
  if (eq == std::string::npos) {
    throw ConfigError(where + ": expected 'key = value', got '" + line + "'");
  }
  const std::string key = trim(line.substr(0, eq));
  if (!setters().count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  kv[key] = trim(line.substr(eq + 1));
}

}  // namespace

double Schedule::lr_at(std::size_t epoch, double base, double decay) const {
  double lr = base;
  for (auto m : milestones) {
    if (epoch >= m) lr *= decay;
  }
  return lr;
}

Schedule ExperimentConfig::schedule(bool distill) const {
  Schedule s;
  s.epochs = train.epochs;
  if (distill) {
    s.epochs = static_cast<std::size_t>(
        std::llround(static_cast<double>(train.epochs) * train.distill_epoch_factor));
  }
  s.warmup = train.warmup_epochs.value_or(s.epochs / 10);
  s.milestones = train.milestones.value_or(
      std::vector<std::size_t>{s.epochs * 6 / 10, s.epochs * 8 / 10});
  return s;
}

void ExperimentConfig::validate() const {
  teacher.validate();
  imitation.validate();
  if (train.epochs == 0) throw ConfigError("train.epochs must be >= 1");
  if (train.batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
  if (!(train.lr > 0)) throw ConfigError("train.lr must be > 0");
  if (train.momentum < 0 || train.momentum >= 1) {
    throw ConfigError("train.momentum must be in [0, 1)");
  }
  if (train.weight_decay < 0) throw ConfigError("train.weight_decay must be >= 0");
  if (!(train.distill_epoch_factor > 0)) {
    throw ConfigError("train.distill_epoch_factor must be > 0");
  }
  if (data.train == 0 && data.dir.empty()) throw ConfigError("data.train must be >= 1");
  for (bool distill : {false, true}) {
    const Schedule s = schedule(distill);
    if (s.epochs == 0) throw ConfigError("schedule has zero epochs");
    if (s.warmup >= s.epochs) {
      throw ConfigError("train.warmup_epochs (" + std::to_string(s.warmup) +
                        ") must be < epochs (" + std::to_string(s.epochs) + ")");
    }
    for (std::size_t i = 0; i < s.milestones.size(); ++i) {
      if (s.milestones[i] >= s.epochs || (i && s.milestones[i] <= s.milestones[i - 1])) {
        throw ConfigError("train.milestones must be strictly increasing and < epochs (" +
                          std::to_string(s.epochs) + ")");
      }
    }
  }
  if (!(eval.nms_iou > 0 && eval.nms_iou <= 1)) throw ConfigError("eval.nms_iou must be in (0, 1]");
  for (double t : eval.iou_sweep) {
    if (!(t > 0 && t <= 1)) throw ConfigError("eval.iou_sweep entries must be in (0, 1]");
  }
  // Selector syntax is checked against a nominal stage list here.
  std::vector<std::size_t> all(teacher.stage_count());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  select_stages(stages, all, teacher.head_stages);
}

ExperimentConfig parse_config(std::string_view text, std::span<const std::string> overrides,
                              const std::string& origin) {
  std::map<std::string, std::string> kv;
  std::size_t line_no = 0;
  for (const auto& line : split(text, '\n')) {
    apply_line(kv, line, origin + ":" + std::to_string(++line_no));
  }
  for (const auto& o : overrides) apply_line(kv, o, "--set " + o);

  ExperimentConfig c;
  for (const auto& [key, value] : kv) {
    try {
      setters().at(key)(c, value);
    } catch (const ConfigError& e) {
      throw ConfigError(key + ": " + e.what());
    }
  }
  c.teacher.anchor_scales.resize(c.teacher.head_stages.size(),
                                 c.teacher.anchor_scales.empty()
                                     ? 2.0
                                     : c.teacher.anchor_scales.back());
  for (const auto& [key, value] : kv) c.canonical += key + "=" + value + "\n";
  c.hash = fnv1a64(c.canonical);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path,
                             std::span<const std::string> overrides) {
  if (path.empty()) return parse_config("", overrides);
  std::string text;
  try {
    text = read_file(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, overrides, path.string());
}

std::vector<std::size_t> select_stages(std::string_view selector,
                                       std::span<const std::size_t> matched,
                                       std::span<const std::size_t> head_stages) {
  const std::string s = trim(selector);
  std::vector<std::size_t> out;
  const std::size_t half = matched.size() / 2;
  if (s == "none") return out;
  if (s == "all") return {matched.begin(), matched.end()};
  if (s == "early") return {matched.begin(), matched.begin() + static_cast<std::ptrdiff_t>(half)};
  if (s == "late") return {matched.begin() + static_cast<std::ptrdiff_t>(half), matched.end()};
  if (s == "heads") {
    for (auto m : matched) {
      if (std::find(head_stages.begin(), head_stages.end(), m) != head_stages.end()) {
        out.push_back(m);
      }
    }
    return out;
  }
  std::set<std::size_t> picked;
  for (const auto& part : split(s, ',')) {
    const std::string p = trim(part);
    const auto dash = p.find('-');
    std::size_t lo = 0, hi = 0;
    if (dash == std::string::npos) {
      lo = hi = parse_size(p);
    } else {
      lo = parse_size(p.substr(0, dash));
      hi = parse_size(p.substr(dash + 1));
    }
    if (lo > hi) throw ConfigError("stage range '" + p + "' is reversed");
    for (std::size_t k = lo; k <= hi; ++k) {
      if (std::find(matched.begin(), matched.end(), k) == matched.end()) {
        throw ConfigError("stage " + std::to_string(k) + " in selector '" + s +
                          "' is not a matched stage (valid: " + join_numbers(matched) + ")");
      }
      picked.insert(k);
    }
  }
  return {picked.begin(), picked.end()};
}

}  // namespace hgd::harness
