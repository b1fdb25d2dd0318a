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
#include "harness/report.hpp"

#include <map>
#include <ostream>

#include "hgd/errors.hpp"
#include "hgd/strings.hpp"
#include "json.hpp"

namespace hgd::harness {

using nlohmann::ordered_json;

double TrainReport::final_map() const {
  for (auto it = epochs.rbegin(); it != epochs.rend(); ++it) {
    if (it->map) return *it->map;
  }
  return 0.0;
}

std::string TrainReport::to_json() const {
  ordered_json j;
  j["kind"] = kind;
  j["run"] = run;
  j["config_hash"] = config_hash;
  j["spec_hash"] = spec_hash;
  j["parameter_hash"] = parameter_hash;
  j["checkpoint"] = checkpoint;
  j["stages"] = stages;
  j["lambda2"] = lambda2 ? ordered_json(*lambda2) : ordered_json(nullptr);
  if (!teacher_hash_before.empty()) {
    j["teacher_hash_before"] = teacher_hash_before;
    j["teacher_hash_after"] = teacher_hash_after;
  }
  j["final_mAP"] = final_map();
  auto& arr = j["epochs"] = ordered_json::array();
  for (const auto& e : epochs) {
    arr.push_back({{"epoch", e.epoch},
                   {"L_c", e.l_c},
                   {"L_l", e.l_l},
                   {"L_i", e.l_i},
                   {"total", e.total},
                   {"lr", e.lr},
                   {"lambda2", e.lambda2},
                   {"mAP", e.map ? ordered_json(*e.map) : ordered_json(nullptr)}});
  }
  return j.dump(2) + "\n";
}

TrainReport TrainReport::from_json(std::string_view text, const std::string& origin) {
  TrainReport r;
  try {
    const auto j = ordered_json::parse(text);
    r.kind = j.at("kind").get<std::string>();
    r.run = j.at("run").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.spec_hash = j.value("spec_hash", "");
    r.parameter_hash = j.value("parameter_hash", "");
    r.checkpoint = j.value("checkpoint", "");
    r.stages = j.value("stages", std::vector<std::size_t>{});
    if (j.contains("lambda2") && !j["lambda2"].is_null()) r.lambda2 = j["lambda2"].get<double>();
    r.teacher_hash_before = j.value("teacher_hash_before", "");
    r.teacher_hash_after = j.value("teacher_hash_after", "");
    for (const auto& e : j.at("epochs")) {
      EpochRecord rec;
      rec.epoch = e.at("epoch").get<std::size_t>();
      rec.l_c = e.at("L_c").get<double>();
      rec.l_l = e.at("L_l").get<double>();
      rec.l_i = e.at("L_i").get<double>();
      rec.total = e.at("total").get<double>();
      rec.lr = e.at("lr").get<double>();
      rec.lambda2 = e.value("lambda2", 0.0);
      if (!e.at("mAP").is_null()) rec.map = e["mAP"].get<double>();
      r.epochs.push_back(rec);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(origin + ": malformed report: " + e.what());
  }
  return r;
}

void write_curves_csv(std::ostream& os, std::span<const TrainReport> reports) {
  std::map<std::string, std::size_t> seen;
  os << "run,epoch,metric,value\n";
  for (const auto& r : reports) {
    std::string name = r.run.empty() ? r.kind : r.run;
    const std::size_t k = ++seen[name];
    if (k > 1) name += "#" + std::to_string(k);
    for (const auto& e : r.epochs) {
      const double values[] = {e.l_c, e.l_l, e.l_i, e.lr};
      for (std::size_t m = 0; m < 4; ++m) {
        os << name << ',' << e.epoch << ',' << kCurveMetrics[m] << ','
           << format_double(values[m]) << '\n';
      }
      if (e.map) os << name << ',' << e.epoch << ",mAP," << format_double(*e.map) << '\n';
    }
  }
}

}  // namespace hgd::harness
