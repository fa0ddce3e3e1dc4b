// Copyright 2026 The TOWER Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tower/config.hpp"
#include "tower/data.hpp"
#include "tower/model.hpp"

namespace tower::eval {

enum class Task { kClassify, kSegment };
std::string to_string(Task t);
Task parse_task(const std::string& s);

struct TrialOutcome {
  double metric = 0.0;
  int epochs_run = 0;
  int best_epoch = -1;
  // Mean training loss per epoch.
  std::vector<double> train_loss;
  // Validation metric per epoch.
  std::vector<double> val_metric;

  // Number of epochs until the training loss first reached `target`.
  std::optional<int> epochs_to_target(double target) const;
};

struct EvalResult {
  Task task = Task::kClassify;
  std::string metric;
  double mean = 0.0;
  // Sample standard deviation; 0 for a single trial.
  double stddev = 0.0;
  std::vector<double> values;
  double label_fraction = 1.0;
  std::vector<TrialOutcome> trials;
};

// Seed of trial `t`, shared by every arm and fraction of a sweep.
std::uint64_t trial_seed(const FinetuneConfig& cfg, int trial);

// Fresh linear head on the checkpoint's encoder, trained with cross-entropy
// on a stratified label_fraction subsample of the train split. Early stops
// on validation AUC and reports test AUC. With cfg.linear_probe the encoder
// stays frozen. The checkpoint itself is never modified.
TrialOutcome finetune_classify_trial(const nn::ModelState& ckpt, const data::Dataset& ds,
                                     double label_fraction, const FinetuneConfig& cfg,
                                     std::uint64_t seed);
EvalResult finetune_classify(const nn::ModelState& ckpt, const data::Dataset& ds,
                             double label_fraction, const FinetuneConfig& cfg);

// Encoder and decoder fine-tuned with pixel-wise binary cross-entropy.
// Early stops on validation Dice and reports mean test Dice at threshold
// 0.5. Throws DataError when the dataset has no masks.
TrialOutcome finetune_segment_trial(const nn::ModelState& ckpt, const data::Dataset& ds,
                                    const FinetuneConfig& cfg, std::uint64_t seed);
EvalResult finetune_segment(const nn::ModelState& ckpt, const data::Dataset& ds,
                            const FinetuneConfig& cfg);

struct SweepArm {
  std::string name;
  nn::ModelState ckpt;
};

struct SweepRow {
  std::string arm;
  double fraction = 0.0;
  int trial = 0;
  std::string metric;
  double value = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  // One entry per (arm, fraction), in input order.
  std::vector<std::pair<std::string, EvalResult>> cells;

  // `arm,fraction,trial,metric,value`.
  std::string to_csv() const;
  const EvalResult& cell(const std::string& arm, double fraction) const;
  // Smallest fraction at which `arm` reaches the mean of `baseline` at
  // fraction 1.0.
  std::optional<double> matching_fraction(const std::string& arm,
                                          const std::string& baseline) const;
};

// Full factorial arms x fractions x cfg.trials classification runs.
SweepResult label_fraction_sweep(std::span<const SweepArm> arms, std::span<const double> fractions,
                                 const data::Dataset& ds, const FinetuneConfig& cfg);

// Encoder representations, N x D row-major.
std::vector<float> encode(const nn::ModelState& ckpt, std::span<const Image> images,
                          int batch_size = 64);

// CSV `id,label,r0..r{D-1}`, one row per sample; label is empty when the
// dataset has none.
std::string embeddings_csv(const nn::ModelState& ckpt, const data::Dataset& ds);
void export_embeddings(const nn::ModelState& ckpt, const data::Dataset& ds,
                       const std::filesystem::path& path);

}  // namespace tower::eval
