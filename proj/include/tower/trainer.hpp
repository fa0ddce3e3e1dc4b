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
#include "tower/image.hpp"
#include "tower/model.hpp"

namespace tower::train {

// lr_min + (lr_init - lr_min) * (1 + cos(pi * epoch / total)) / 2.
double cosine_lr(int epoch, int total_epochs, double lr_init, double lr_min);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update of every parameter outside `frozen`.
// Throws UsageError if a participating parameter has no gradient.
void adam_step(nn::ModelState& state, double lr, const AdamConfig& cfg = {},
               std::span<const nn::Part> frozen = {});

// Global L2 norm over all populated gradients.
double grad_norm(const nn::ModelState& state);
// Rescales gradients so their global norm is at most `max_norm`; returns
// the norm before clipping. max_norm <= 0 disables clipping.
double clip_grad_norm(nn::ModelState& state, double max_norm);

// N x C x H x W tensor of the selected images.
nn::Tensor stack_images(std::span<const Image> images, std::span<const std::size_t> idx);
nn::Tensor stack_images(std::span<const Image> images);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double loss_con = 0.0;
  double loss_gen = 0.0;
  double loss_total = 0.0;
  double val_con = 0.0;
  double val_gen = 0.0;
  double val_total = 0.0;
  double wall_seconds = 0.0;

  // Wall time is excluded so that replays compare equal.
  bool same_values(const EpochRecord& o) const;
};

struct RunMetrics {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_val = 0.0;
  bool early_stopped = false;

  // `epoch,lr,loss_con,loss_gen,loss_total,val_total`, one line per epoch.
  std::string to_csv() const;
  bool same_values(const RunMetrics& o) const;
};

struct PretrainOptions {
  // When set, writes best.ckpt, final.ckpt and metrics.csv here.
  std::optional<std::filesystem::path> output_dir;
  // Appends every sampled TransformPlan to plans.log in output_dir.
  bool log_plans = false;
  // Stops after this many optimizer steps when set.
  std::optional<int> max_steps;
  // Logs one line per epoch to stderr.
  bool verbose = false;
};

struct PretrainResult {
  nn::ModelState best;
  nn::ModelState last;
  RunMetrics metrics;
  // Total training loss of every optimizer step, in order.
  std::vector<double> step_losses;
};

// Model before any training step for this config and seed; also the
// random-init baseline.
nn::ModelState initial_state(const TrainConfig& cfg, int channels);

// Correlated pre-training of encoder, head and decoder on the train split.
// Validation uses the val split, or a seeded val_fraction carve-out of the
// training images when the dataset has none. A non-finite loss aborts with
// NumericError after writing the batch's plans to nan_dump.log.
PretrainResult pretrain(const TrainConfig& cfg, const data::Dataset& ds,
                        const PretrainOptions& options = {});

}  // namespace tower::train
