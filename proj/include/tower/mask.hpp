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
#include <vector>

#include "tower/image.hpp"
#include "tower/rng.hpp"

namespace tower::transform {

enum class MaskKind { kRays, kStripe, kBlock };
enum class StripeOrientation { kHorizontal, kVertical };

std::string to_string(MaskKind kind);
MaskKind parse_mask_kind(const std::string& s);
std::string to_string(StripeOrientation o);
StripeOrientation parse_stripe_orientation(const std::string& s);

struct MaskSpec {
  MaskKind kind = MaskKind::kBlock;
  int num_rays = 80;
  int ray_thickness = 1;
  int disc_radius = 0;
  StripeOrientation stripe_orientation = StripeOrientation::kHorizontal;
  int stripe_width = 2;
  int block_size = 4;
  double mask_ratio = 0.5;

  friend bool operator==(const MaskSpec&, const MaskSpec&) = default;
};

// Throws ConfigError on a negative count, ratio outside [0,1], or a zero
// band/cell size for the selected kind.
void validate(const MaskSpec& spec);

// Pixel sizes scaled from the optic-disc anatomy: disc radius 0.04 and
// vessel thickness 0.005 of the short side.
int default_disc_radius(int height, int width);
int default_ray_thickness(int height, int width);

struct PixelPos {
  int row = 0;
  int col = 0;
  friend bool operator==(const PixelPos&, const PixelPos&) = default;
};

// Binary keep-mask: 1 keeps the pixel, 0 marks it for reconstruction.
struct Mask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bits;
  MaskSpec spec{};
  PixelPos center{};

  std::uint8_t at(int r, int c) const { return bits[static_cast<std::size_t>(r) * width + c]; }
  std::size_t masked_count() const;
  double masked_fraction() const;
};

Mask all_ones_mask(int height, int width);

// Argmax of the Gaussian-smoothed (sigma = 2 px) intensity; RGB is reduced
// by channel mean. Ties resolve to the smallest row-major index.
PixelPos find_brightness_center(const Image& img);

// Integer line from `a` to `b` inclusive: for step i of n = max(|dr|,|dc|)
// the point is a + round_half_away(i * (b - a) / n).
std::vector<PixelPos> rasterize_line(PixelPos a, PixelPos b);

// Filled disc at `center` plus `num_rays` rays to the border, evenly spaced
// from a random rotation offset and dilated to `ray_thickness`.
Mask rays_mask(PixelPos center, int num_rays, int ray_thickness, int disc_radius, int height,
               int width, Rng& rng);
// Same, with an explicit rotation offset in radians.
Mask rays_mask_with_offset(PixelPos center, int num_rays, int ray_thickness, int disc_radius,
                           int height, int width, double offset);

Mask stripe_mask(double mask_ratio, StripeOrientation orientation, int stripe_width, int height,
                 int width, Rng& rng);

Mask block_mask(double mask_ratio, int block_size, int height, int width, Rng& rng);

// Dispatches on spec.kind; `reference` supplies the rays center.
Mask make_mask(const MaskSpec& spec, const Image& reference, Rng& rng);

// Pixel-wise product broadcast over channels.
Image apply_mask(const Image& img, const Mask& mask);

}  // namespace tower::transform
