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
// hgd: train, distill, ablate and evaluate toy detectors.
//
//   hgd train-teacher   --config exp.cfg
//   hgd distill         --config exp.cfg --teacher runs/teacher/checkpoint.hgd
//   hgd ablate-stages   --config exp.cfg --teacher ... --subsets none,early,late,all
//   hgd eval            --checkpoint ckpt.hgd --split test
//   hgd export-heatmaps --checkpoint ckpt.hgd --stage 2 --image 0 --out heat/
//   hgd export-curves   runs/*/report.json --out curves.csv
//
// Exit codes: 0 ok, 2 configuration error, 3 data error, 4 invariant failure.

#include <iostream>

#include "CLI11.hpp"
#include "harness/commands.hpp"
#include "hgd/errors.hpp"

namespace fs = std::filesystem;
using namespace hgd::harness;

namespace {

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config,-c", args.config, "Experiment config (key = value)");
  cmd->add_option("--set,-s", args.overrides, "Override: key=value (repeatable)");
  cmd->add_flag("--quiet,-q", args.quiet, "No per-epoch progress on stderr");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hands-on guidance distillation kit"};
  app.require_subcommand(1);
  CommonArgs args;
  fs::path teacher, checkpoint, out, ppm;
  std::string split = "test";
  std::size_t image = 0, stage = 0;
  std::vector<std::string> subsets{"none", "early", "late", "all"};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<fs::path> reports;

  auto* gen = app.add_subcommand("generate-data", "Write the synthetic dataset to disk");
  add_common(gen, args);
  gen->add_option("--out,-o", out, "Dataset directory (default: data.dir)");

  auto* tt = app.add_subcommand("train-teacher", "Train the full-width teacher");
  add_common(tt, args);

  auto* ts = app.add_subcommand("train-student", "Train the baseline half-width student");
  add_common(ts, args);

  auto* di = app.add_subcommand("distill", "Distill a student from a frozen teacher");
  add_common(di, args);
  di->add_option("--teacher,-t", teacher, "Teacher checkpoint")->required();

  auto* ab = app.add_subcommand("ablate-stages", "Distill per stage subset and seed");
  add_common(ab, args);
  ab->add_option("--teacher,-t", teacher, "Teacher checkpoint")->required();
  ab->add_option("--subsets", subsets, "Stage selectors")->delimiter(',');
  ab->add_option("--seeds", seeds, "Run seeds")->delimiter(',');

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint (JSON)");
  add_common(ev, args);
  ev->add_option("--checkpoint,-k", checkpoint, "Checkpoint")->required();
  ev->add_option("--split", split, "Dataset split");
  ev->add_option("--out,-o", out, "Output file (default: stdout)");

  auto* hm = app.add_subcommand("export-heatmaps", "Channel-mean activation grids (CSV)");
  add_common(hm, args);
  hm->add_option("--checkpoint,-k", checkpoint, "Checkpoint")->required();
  hm->add_option("--stage", stage, "Backbone stage")->required();
  hm->add_option("--split", split, "Dataset split");
  hm->add_option("--image", image, "Scene index within the split");
  hm->add_option("--ppm", ppm, "Use this P6 image instead of a dataset scene");
  hm->add_option("--out,-o", out, "Output directory")->required();

  auto* cu = app.add_subcommand("export-curves", "Merge reports into a long CSV");
  cu->add_option("reports", reports, "report.json files")->required();
  cu->add_option("--out,-o", out, "Output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? hgd::kExitOk : hgd::kExitConfig;
  }

  try {
    if (*gen) return cmd_generate_data(args, out);
    if (*tt) return cmd_train_teacher(args);
    if (*ts) return cmd_train_student(args);
    if (*di) return cmd_distill(args, teacher);
    if (*ab) return cmd_ablate_stages(args, teacher, subsets, seeds);
    if (*ev) return cmd_eval(args, checkpoint, split, out);
    if (*hm) return cmd_export_heatmaps(args, checkpoint, split, image, ppm, stage, out);
    if (*cu) return cmd_export_curves(reports, out);
  } catch (const hgd::ConfigError& e) {
    std::cerr << "hgd: configuration error: " << e.what() << "\n";
    return hgd::kExitConfig;
  } catch (const hgd::OrderingError& e) {
    std::cerr << "hgd: configuration error: " << e.what() << "\n";
    return hgd::kExitConfig;
  } catch (const hgd::DataError& e) {
    std::cerr << "hgd: data error: " << e.what() << "\n";
    return hgd::kExitData;
  } catch (const hgd::Error& e) {
    std::cerr << "hgd: invariant failure: " << e.what() << "\n";
    return hgd::kExitInvariant;
  }
  return hgd::kExitOk;
}
