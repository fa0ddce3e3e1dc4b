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

#include "tower/image.hpp"
#include "tower/mask.hpp"

namespace tower::data {

enum class Modality { kFundoscopic, kXray, kCt, kUltrasound, kSynthetic };
enum class Split : std::uint8_t { kTrain, kVal, kTest };

std::string to_string(Modality m);
Modality parse_modality(const std::string& s);
std::string to_string(Split s);
Split parse_split(const std::string& s);

struct Dataset {
  std::vector<std::string> ids;
  std::vector<Image> images;
  // Class index per sample; empty when the dataset has no class labels.
  std::vector<int> labels;
  // Binary per-pixel ground truth (one channel); empty when absent.
  std::vector<Image> masks;
  std::vector<Split> splits;
  Modality modality = Modality::kSynthetic;
  int num_classes = 0;
  // Generator ground truth; empty for loaded data.
  std::vector<transform::PixelPos> disc_centers;

  std::size_t size() const { return images.size(); }
  bool has_labels() const { return !labels.empty(); }
  bool has_masks() const { return !masks.empty(); }
  std::vector<std::size_t> indices(Split split) const;
  Dataset subset(std::span<const std::size_t> idx) const;
  // Throws DataError on inconsistent arity, shapes or split vectors.
  void validate() const;
};

// Manifest rows: `filename, label_or_maskpath, split`, paths relative to
// `dir`. A leading header row is skipped. Integer labels become classes,
// anything else is read as a mask PNG (binarized at 0.5).
Dataset load_png_dir(const std::filesystem::path& dir, const std::filesystem::path& manifest);

// Big-endian IDX: images are ubyte with 3 dims (N,H,W) or 4 dims
// (N,H,W,C); labels are ubyte with 1 dim. Labels >= num_classes are rejected.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::optional<int> num_classes = std::nullopt);
void write_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
               const Dataset& ds);

struct RetinaConfig {
  int n = 200;
  int height = 32;
  int width = 32;
  std::uint64_t seed = 0;
  double val_fraction = 0.1;
  double test_fraction = 0.2;
};

// Bright optic disc, 6-12 dark vessels radiating from it, textured
// background. Ground truth: disc centers, vessel masks, and a two-class
// label (vessel density above the dataset median).
Dataset gen_synthetic_retina(const RetinaConfig& cfg);
Dataset gen_synthetic_retina(int n, int height, int width, std::uint64_t seed);

// Deterministic shuffled split assignment, per class when labels exist.
void assign_splits(Dataset& ds, double val_fraction, double test_fraction, std::uint64_t seed);

// Per-class seeded subsample of `pool` keeping ceil(fraction * count) of
// every class. Throws StratificationError if a class ends up empty.
std::vector<std::size_t> stratified_subsample(const Dataset& ds,
                                              std::span<const std::size_t> pool,
                                              double fraction, std::uint64_t seed);

// FNV-1a over shapes, pixels and labels.
std::uint64_t dataset_hash(const Dataset& ds);

}  // namespace tower::data
