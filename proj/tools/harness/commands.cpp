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
#include "harness/commands.hpp"

#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "harness/report.hpp"
#include "harness/trainer.hpp"
#include "hgd/checkpoint.hpp"
#include "hgd/io.hpp"
#include "hgd/ops.hpp"
#include "hgd/reweighting.hpp"
#include "hgd/strings.hpp"

namespace fs = std::filesystem;

namespace hgd::harness {

namespace {

RunOptions options_for(const CommonArgs& args, const fs::path& dir) {
  RunOptions o;
  o.out_dir = dir;
  o.log = args.quiet ? nullptr : &std::cerr;
  return o;
}

fs::path run_dir(const ExperimentConfig& c, const std::string& fallback) {
  return fs::path(c.output_dir) / (c.run.empty() ? fallback : c.run);
}

void print_summary(const TrainReport& r) {
  std::cout << r.kind << " run '" << r.run << "': final mAP " << format_double(r.final_map())
            << ", checkpoint " << r.checkpoint << "\n";
}

void emit(const fs::path& out, const std::string& text) {
  if (out.empty()) {
    std::cout << text;
  } else {
    write_file_atomic(out, text);
  }
}

}  // namespace

int cmd_generate_data(const CommonArgs& args, const fs::path& out) {
  const auto c = load_config(args.config, args.overrides);
  fs::path dir = out.empty() ? fs::path(c.data.dir) : out;
  if (dir.empty()) throw ConfigError("generate-data needs --out or data.dir");
  ExperimentConfig gen = c;
  gen.data.dir.clear();
  write_dataset(dir, load_dataset(gen));
  std::cout << "wrote " << c.data.train << " train / " << c.data.test << " test scenes to "
            << dir.string() << "\n";
  return kExitOk;
}

int cmd_train_teacher(const CommonArgs& args) {
  const auto c = load_config(args.config, args.overrides);
  const auto data = load_dataset(c);
  const auto r = train_teacher(c, data, options_for(args, run_dir(c, "teacher")));
  print_summary(r.report);
  return kExitOk;
}

int cmd_train_student(const CommonArgs& args) {
  const auto c = load_config(args.config, args.overrides);
  const auto data = load_dataset(c);
  const auto r = train_student(c, data, nullptr, options_for(args, run_dir(c, "student")));
  print_summary(r.report);
  return kExitOk;
}

int cmd_distill(const CommonArgs& args, const fs::path& teacher_path) {
  const auto c = load_config(args.config, args.overrides);
  const Detector teacher = load_checkpoint(teacher_path, c.teacher);
  const auto data = load_dataset(c);
  const auto dir = run_dir(c, "distill");
  const auto plan = plan_for(c.student(), teacher.spec());
  if (!args.quiet) std::cerr << plan.report();
  const auto r = train_student(c, data, &teacher, options_for(args, dir));
  print_summary(r.report);
  return kExitOk;
}

std::string ablation_long_csv(const std::vector<std::string>& subsets,
                              const std::vector<std::uint64_t>& seeds,
                              const std::vector<std::vector<double>>& map) {
  std::string out = "subset,seed,mAP\n";
  for (std::size_t s = 0; s < subsets.size(); ++s) {
    for (std::size_t k = 0; k < seeds.size(); ++k) {
      out += subsets[s] + "," + std::to_string(seeds[k]) + "," + format_double(map[s][k]) + "\n";
    }
  }
  return out;
}

std::string ablation_wide_csv(const std::vector<std::string>& subsets,
                              const std::vector<std::uint64_t>& seeds,
                              const std::vector<std::vector<double>>& map) {
  std::string out = "seed";
  for (const auto& s : subsets) out += "," + s;
  out += "\n";
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    out += std::to_string(seeds[k]);
    for (std::size_t s = 0; s < subsets.size(); ++s) out += "," + format_double(map[s][k]);
    out += "\n";
  }
  return out;
}

int cmd_ablate_stages(const CommonArgs& args, const fs::path& teacher_path,
                      const std::vector<std::string>& subsets,
                      const std::vector<std::uint64_t>& seeds) {
  if (subsets.empty() || seeds.empty()) throw ConfigError("ablate-stages needs subsets and seeds");
  const auto base = load_config(args.config, args.overrides);
  const fs::path root = fs::path(base.output_dir) / (base.run.empty() ? "ablate" : base.run);

  // Every run gets its own directory; refuse before training anything.
  std::set<fs::path> dirs;
  auto dir_of = [&](const std::string& subset, std::uint64_t seed) {
    return root / (subset + "_seed" + std::to_string(seed));
  };
  for (const auto& s : subsets) {
    for (auto seed : seeds) {
      const fs::path d = dir_of(s, seed);
      if (!dirs.insert(d).second) {
        throw ConfigError("ablate-stages: two runs would share " + d.string());
      }
      if (fs::exists(d)) {
        throw ConfigError("ablate-stages: output directory " + d.string() +
                          " already exists; refusing to overwrite");
      }
    }
  }

  const Detector teacher = load_checkpoint(teacher_path, base.teacher);
  const auto data = load_dataset(base);
  std::vector<std::vector<double>> map(subsets.size());
  for (std::size_t s = 0; s < subsets.size(); ++s) {
    for (auto seed : seeds) {
      auto overrides = args.overrides;
      overrides.push_back("imitation.stages=" + subsets[s]);
      overrides.push_back("train.seed=" + std::to_string(seed));
      overrides.push_back("output.run=" + subsets[s] + "_seed" + std::to_string(seed));
      const auto c = load_config(args.config, overrides);
      const auto r = train_student(c, data, &teacher, options_for(args, dir_of(subsets[s], seed)));
      map[s].push_back(r.report.final_map());
    }
  }
  write_file_atomic(root / "ablation.csv", ablation_long_csv(subsets, seeds, map));
  write_file_atomic(root / "ablation_table.csv", ablation_wide_csv(subsets, seeds, map));
  std::cout << ablation_wide_csv(subsets, seeds, map);
  return kExitOk;
}

int cmd_eval(const CommonArgs& args, const fs::path& checkpoint, const std::string& split,
             const fs::path& out) {
  const auto c = load_config(args.config, args.overrides);
  const Detector model = load_checkpoint(checkpoint);
  const auto data = load_dataset(c);
  const auto result = evaluate(model, data.split(split), c.eval);
  emit(out, result.to_json());
  return kExitOk;
}

std::vector<std::pair<std::size_t, std::string>> stage_heatmaps(const Detector& model,
                                                                const Tensor& image,
                                                                std::size_t stage) {
  const auto& spec = model.spec();
  if (stage >= spec.stage_count()) {
    std::string valid;
    for (std::size_t s = 0; s < spec.stage_count(); ++s) {
      valid += (s ? ", " : "") + std::to_string(s) + " (" + std::to_string(spec.stage_size(s)) +
               "x" + std::to_string(spec.stage_size(s)) + ")";
    }
    throw ConfigError("stage " + std::to_string(stage) + " does not exist; valid stages: " + valid);
  }
  const Tensor batch = image.rank() == 4 ? image : image.reshaped(
      {1, image.dim(0), image.dim(1), image.dim(2)});
  const auto pass = model.forward(batch);
  std::vector<std::pair<std::size_t, std::string>> out;
  for (std::size_t b = 0; b < spec.blocks_per_stage; ++b) {
    const std::size_t idx = model.backbone_layer(stage, b);
    const Tensor mean = channel_stats(pass.features[idx], ChannelStat::kMean);
    std::ostringstream os;
    write_grid_csv(os, mean.cast<double>(), 0);
    out.emplace_back(idx, os.str());
  }
  return out;
}

int cmd_export_heatmaps(const CommonArgs& args, const fs::path& checkpoint,
                        const std::string& split, std::size_t image, const fs::path& ppm,
                        std::size_t stage, const fs::path& out) {
  const Detector model = load_checkpoint(checkpoint);
  Tensor img;
  if (!ppm.empty()) {
    img = decode_ppm(read_file(ppm), ppm.string());
  } else {
    const auto c = load_config(args.config, args.overrides);
    const auto data = load_dataset(c);
    const auto& scenes = data.split(split);
    if (image >= scenes.size()) {
      throw ConfigError("image " + std::to_string(image) + " out of range; split '" + split +
                        "' has " + std::to_string(scenes.size()) + " scenes");
    }
    img = scenes[image].image;
  }
  for (const auto& [idx, csv] : stage_heatmaps(model, img, stage)) {
    const fs::path file = out / ("stage" + std::to_string(stage) + "_feature" +
                                 std::to_string(idx) + ".csv");
    write_file_atomic(file, csv);
    std::cout << file.string() << "\n";
  }
  return kExitOk;
}

int cmd_export_curves(const std::vector<fs::path>& reports, const fs::path& out) {
  if (reports.empty()) throw ConfigError("export-curves needs at least one report");
  std::vector<TrainReport> parsed;
  for (const auto& p : reports) parsed.push_back(TrainReport::from_json(read_file(p), p.string()));
  std::ostringstream os;
  write_curves_csv(os, parsed);
  emit(out, os.str());
  return kExitOk;
}

}  // namespace hgd::harness
