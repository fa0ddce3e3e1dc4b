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
#include <optional>
#include <string>
#include <vector>

#include "tower/bezier.hpp"
#include "tower/image.hpp"
#include "tower/mask.hpp"
#include "tower/rng.hpp"

namespace tower::augment {

// Which view-generating transforms are active. The first three are the
// knowledge-embedded proxy arms; kClassic is the conventional baseline.
enum class ProxyMode { kTowerNl, kTowerM, kTowerNlM, kClassic };

std::string to_string(ProxyMode mode);
ProxyMode parse_proxy_mode(const std::string& s);

struct ClassicOps {
  double rotation_deg = 0.0;
  bool flip_horizontal = false;
  bool flip_vertical = false;
  bool flip_diagonal = false;
  double noise_sigma = 0.0;
  double brightness = 1.0;
  double contrast = 1.0;

  bool is_identity() const {
    return rotation_deg == 0.0 && !flip_horizontal && !flip_vertical && !flip_diagonal &&
           noise_sigma == 0.0 && brightness == 1.0 && contrast == 1.0;
  }
  friend bool operator==(const ClassicOps&, const ClassicOps&) = default;
};

struct AugmentConfig {
  transform::Direction direction = transform::Direction::kRandom;
  int translation_resolution = transform::TranslationTable::kDefaultResolution;
  // One curve per channel instead of one shared curve.
  bool per_channel_translation = false;
  transform::MaskSpec mask{};
  double op_probability = 0.5;
  double max_rotation_deg = 15.0;
  double max_noise_sigma = 0.05;
  double jitter = 0.10;
};

// Replayable record of every random choice made for one image.
struct TransformPlan {
  std::string image_id;
  // Empty: no translation. One entry: shared across channels. Otherwise one
  // per channel.
  std::vector<transform::ControlPoints> control_points;
  std::optional<transform::MaskSpec> mask_spec;
  std::optional<ClassicOps> classic_ops;
  // Seeds the mask geometry and the noise field.
  std::uint64_t seed = 0;

  friend bool operator==(const TransformPlan&, const TransformPlan&) = default;
};

TransformPlan sample_plan(Rng& rng, ProxyMode mode, const AugmentConfig& cfg,
                          std::string image_id = "", int channels = 1);

struct PlanStages {
  Image translated;
  transform::Mask mask;
  Image masked;
  Image output;
};

// Translation, then mask, then classic ops. Bit-exact for a given plan.
Image apply_plan(const Image& img, const TransformPlan& plan,
                 int translation_resolution = transform::TranslationTable::kDefaultResolution);
PlanStages apply_plan_stages(const Image& img, const TransformPlan& plan,
                             int translation_resolution =
                                 transform::TranslationTable::kDefaultResolution);

// Classic ops in isolation (rotation, flips, noise, jitter), clamped to [0,1].
Image apply_classic(const Image& img, const ClassicOps& ops, std::uint64_t seed);

// Single-line text form using hex floats so replay is bit-exact.
std::string serialize(const TransformPlan& plan);
TransformPlan parse_plan(const std::string& line);

}  // namespace tower::augment
