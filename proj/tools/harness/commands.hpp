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
#ifndef HGD_HARNESS_COMMANDS_HPP_
#define HGD_HARNESS_COMMANDS_HPP_

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "harness/config.hpp"
#include "hgd/detector.hpp"

namespace hgd::harness {

struct CommonArgs {
  std::filesystem::path config;
  std::vector<std::string> overrides;
  bool quiet = false;
};

int cmd_generate_data(const CommonArgs& args, const std::filesystem::path& out);
int cmd_train_teacher(const CommonArgs& args);
int cmd_train_student(const CommonArgs& args);
int cmd_distill(const CommonArgs& args, const std::filesystem::path& teacher);
int cmd_ablate_stages(const CommonArgs& args, const std::filesystem::path& teacher,
                      const std::vector<std::string>& subsets,
                      const std::vector<std::uint64_t>& seeds);
int cmd_eval(const CommonArgs& args, const std::filesystem::path& checkpoint,
             const std::string& split, const std::filesystem::path& out);
int cmd_export_heatmaps(const CommonArgs& args, const std::filesystem::path& checkpoint,
                        const std::string& split, std::size_t image,
                        const std::filesystem::path& ppm, std::size_t stage,
                        const std::filesystem::path& out);
int cmd_export_curves(const std::vector<std::filesystem::path>& reports,
                      const std::filesystem::path& out);

// Ablation CSVs: long "subset,seed,mAP" and wide "seed,<subset>...".
std::string ablation_long_csv(const std::vector<std::string>& subsets,
                              const std::vector<std::uint64_t>& seeds,
                              const std::vector<std::vector<double>>& map);
std::string ablation_wide_csv(const std::vector<std::string>& subsets,
                              const std::vector<std::uint64_t>& seeds,
                              const std::vector<std::vector<double>>& map);

// Channel-mean activation of every feature of `stage` for one image, as
// H x W CSV grids keyed by feature index.
std::vector<std::pair<std::size_t, std::string>> stage_heatmaps(
    const Detector& model, const Tensor& image, std::size_t stage);

}  // namespace hgd::harness

#endif  // HGD_HARNESS_COMMANDS_HPP_
