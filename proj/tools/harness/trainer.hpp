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
#ifndef HGD_HARNESS_TRAINER_HPP_
#define HGD_HARNESS_TRAINER_HPP_

// Training loops for the teacher, the baseline student and HGD distillation.
// All three share one SGD loop; a run without selected stages is a plain
// ground-truth run.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "harness/config.hpp"
#include "harness/report.hpp"
#include "hgd/detector.hpp"
#include "hgd/evaluation.hpp"
#include "hgd/matching.hpp"
#include "hgd/synth_data.hpp"

namespace hgd::harness {

Dataset load_dataset(const ExperimentConfig& config);

// Backbone feature shapes (batch 1) in forward order.
std::vector<Shape> feature_shapes(const DetectorSpec& spec);
// Stage plan between a student and a teacher spec.
MatchPlan plan_for(const DetectorSpec& student, const DetectorSpec& teacher);

EvalResult evaluate(const Detector& model, std::span<const LabeledScene> scenes,
                    const EvalConfig& config);

// Forward pass as run during distillation: the deployed student graph plus
// the adapter side branch for every selected stage.
struct TrainingForward {
  Detector::Pass pass;
  std::vector<MatchedPair> pairs;
};
TrainingForward training_forward(const Detector& student, const AdapterBank& adapters,
                                 const MatchPlan& plan,
                                 std::span<const std::size_t> stages,
                                 std::span<const Tensor> teacher_features,
                                 const Tensor& images);

struct RunOptions {
  std::filesystem::path out_dir;  // empty: nothing written
  std::ostream* log = nullptr;    // progress lines, never part of a report
};

struct RunResult {
  TrainReport report;
  Detector model;
};

// Ground-truth training of the full-width teacher.
RunResult train_teacher(const ExperimentConfig& config, const Dataset& data,
                        const RunOptions& options);

// Student training. Without a teacher, or with an empty stage selection, this
// is the baseline student. The teacher is never modified.
RunResult train_student(const ExperimentConfig& config, const Dataset& data,
                        const Detector* teacher, const RunOptions& options);

}  // namespace hgd::harness

#endif  // HGD_HARNESS_TRAINER_HPP_
