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
#include <string>
#include <utility>
#include <vector>

#include "tower/augment.hpp"
#include "tower/data.hpp"
#include "tower/mask.hpp"
#include "tower/model.hpp"

namespace tower {

// Pre-training arm: which proxy transforms produce the views and which
// objectives are optimized. kRandom means "no pre-training".
enum class Arm { kRandom, kGenNl, kGenM, kGenNlM, kConNlM, kTower, kConClassic };

std::string to_string(Arm arm);
// Accepts canonical names plus the proxy-mode aliases tower_nl (generative,
// translation only), tower_m (generative, masks only) and tower_nl+m (full).
Arm parse_arm(const std::string& s);
augment::ProxyMode proxy_mode(Arm arm);
bool uses_contrastive(Arm arm);
bool uses_generative(Arm arm);

struct TrainConfig {
  std::string mode = "tower";
  int batch_size = 32;
  double lr_init = 1e-3;
  double lr_min = 0.0;
  int epochs = 100;
  int patience = 30;
  double lambda = 1.0;
  double tau = 0.1;
  std::uint64_t seed = 0;
  double val_fraction = 0.1;
  double clip_norm = 5.0;
  bool symmetric_nce = false;

  std::string direction = "random";
  int translation_resolution = 1000;
  bool per_channel_translation = false;

  // "auto" picks by modality: rays for fundoscopic/synthetic, stripe for
  // xray, block otherwise. Negative ray/disc sizes mean "derive from image".
  std::string mask_kind = "auto";
  int num_rays = -1;
  int ray_thickness = -1;
  int disc_radius = -1;
  std::string stripe_orientation = "horizontal";
  int stripe_width = 2;
  int block_size = 4;
  double mask_ratio = 0.5;

  int base_channels = 16;
  int depth = 2;
  int embed_dim = 32;

  Arm arm() const { return parse_arm(mode); }
  // Throws ConfigError naming the offending key.
  void validate() const;
  nn::ModelConfig model_config(int channels) const;
  augment::AugmentConfig augment_config(int height, int width, data::Modality modality) const;
};

struct FinetuneConfig {
  std::string task = "classify";
  int ft_epochs = 100;
  double ft_lr = 2e-4;
  double ft_lr_min = 0.0;
  int ft_patience = 30;
  int ft_batch_size = 32;
  double label_fraction = 1.0;
  bool linear_probe = false;
  int trials = 10;
  std::uint64_t ft_seed = 0;

  void validate() const;
};

struct DataConfig {
  std::string data_kind = "synthetic";
  std::string data_path;
  std::string manifest;
  std::string idx_images;
  std::string idx_labels;
  int num_classes = 0;
  std::string modality = "synthetic";
  int synth_n = 400;
  int synth_size = 32;
  std::uint64_t synth_seed = 0;
  double split_val = 0.1;
  double split_test = 0.2;

  void validate() const;
  data::Dataset load() const;
};

// Flat `key = value` configuration. Keys equal the field names above, plus
// `preset`, which is applied before every other key wherever it appears.
struct RunConfig {
  std::string preset = "desk";
  TrainConfig train;
  FinetuneConfig finetune;
  DataConfig data;

  // Field defaults with the desk preset applied.
  RunConfig();

  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  void validate() const;
  // One `key = value` line per key, in registry order.
  std::string to_text() const;

  using Pairs = std::vector<std::pair<std::string, std::string>>;
  static const std::vector<std::string>& keys();
  // Splits `key = value` lines; `#` starts a comment.
  static Pairs parse_pairs(const std::string& text);
  // Applies the last `preset` first, then every other pair in order.
  static RunConfig from_pairs(const Pairs& pairs);
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::string& path);
};

// Preset protocols. "classification" uses batch 128, lr 1e-3 -> 2e-4,
// 100 fine-tuning epochs; "segmentation" uses batch 32, lr 1e-2 -> 1e-3,
// 200 fine-tuning epochs; "desk" is the CPU-sized default.
void apply_preset(RunConfig& cfg, const std::string& name);

}  // namespace tower
