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
#ifndef HGD_HARNESS_REPORT_HPP_
#define HGD_HARNESS_REPORT_HPP_

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hgd::harness {

struct EpochRecord {
  std::size_t epoch = 0;
  double l_c = 0, l_l = 0, l_i = 0, total = 0;
  double lr = 0;
  double lambda2 = 0;  // effective weight this epoch
  std::optional<double> map;
};

struct TrainReport {
  std::string kind;  // teacher | student | distill
  std::string run;
  std::string config_hash;
  std::string spec_hash;
  std::string parameter_hash;
  std::string checkpoint;
  std::vector<std::size_t> stages;
  std::optional<double> lambda2;  // frozen imitation weight, distill only
  std::string teacher_hash_before, teacher_hash_after;
  std::vector<EpochRecord> epochs;

  double final_map() const;
  std::string to_json() const;
  // Throws DataError naming `origin` on malformed input.
  static TrainReport from_json(std::string_view text, const std::string& origin);
};

inline constexpr const char* kCurveMetrics[] = {"L_c", "L_l", "L_i", "lr", "mAP"};

// Long-format "run,epoch,metric,value" rows. Repeated run names get a
// "#k" suffix. Epochs without an evaluation omit the mAP row.
void write_curves_csv(std::ostream& os, std::span<const TrainReport> reports);

}  // namespace hgd::harness

#endif  // HGD_HARNESS_REPORT_HPP_
