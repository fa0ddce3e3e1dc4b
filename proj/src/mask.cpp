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

#include "tower/mask.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <numeric>

#include "tower/error.hpp"

namespace tower::transform {

std::string to_string(MaskKind kind) {
  switch (kind) {
    case MaskKind::kRays: return "rays";
    case MaskKind::kStripe: return "stripe";
    case MaskKind::kBlock: return "block";
  }
  return "?";
}

MaskKind parse_mask_kind(const std::string& s) {
  if (s == "rays") return MaskKind::kRays;
  if (s == "stripe") return MaskKind::kStripe;
  if (s == "block") return MaskKind::kBlock;
  throw ConfigError("unknown mask kind '" + s + "'");
}

std::string to_string(StripeOrientation o) {
  return o == StripeOrientation::kHorizontal ? "horizontal" : "vertical";
}

StripeOrientation parse_stripe_orientation(const std::string& s) {
  if (s == "horizontal") return StripeOrientation::kHorizontal;
  if (s == "vertical") return StripeOrientation::kVertical;
  throw ConfigError("unknown stripe orientation '" + s + "'");
}

void validate(const MaskSpec& spec) {
  if (!(spec.mask_ratio >= 0.0 && spec.mask_ratio <= 1.0)) {
    throw ConfigError("mask_ratio must lie in [0, 1]");
  }
  if (spec.num_rays < 0 || spec.ray_thickness < 0 || spec.disc_radius < 0 ||
      spec.stripe_width < 0 || spec.block_size < 0) {
    throw ConfigError("mask counts and pixel sizes must be non-negative");
  }
  if (spec.kind == MaskKind::kStripe && spec.stripe_width < 1) {
    throw ConfigError("stripe_width must be at least 1");
  }
  if (spec.kind == MaskKind::kBlock && spec.block_size < 1) {
    throw ConfigError("block_size must be at least 1");
  }
}

int default_disc_radius(int height, int width) {
  return static_cast<int>(std::lround(0.04 * std::min(height, width)));
}

int default_ray_thickness(int height, int width) {
  return std::max(1, static_cast<int>(std::lround(0.005 * std::min(height, width))));
}

std::size_t Mask::masked_count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{0}));
}

double Mask::masked_fraction() const {
  return bits.empty() ? 0.0 : static_cast<double>(masked_count()) / bits.size();
}

Mask all_ones_mask(int height, int width) {
  Mask m;
  m.height = height;
  m.width = width;
  m.bits.assign(static_cast<std::size_t>(height) * width, 1);
  return m;
}

PixelPos find_brightness_center(const Image& img) {
  if (img.empty() || img.height <= 0 || img.width <= 0) {
    throw DataError("cannot locate brightness center of an empty image");
  }
  const Image gray = channel_mean(img);
  constexpr double kSigma = 2.0;
  constexpr int kRadius = 6;
  std::array<double, 2 * kRadius + 1> kernel{};
  double total = 0.0;
  for (int k = -kRadius; k <= kRadius; ++k) {
    kernel[k + kRadius] = std::exp(-(k * k) / (2.0 * kSigma * kSigma));
    total += kernel[k + kRadius];
  }
  for (double& w : kernel) w /= total;

  const int h = gray.height;
  const int w = gray.width;
  // Separable blur with replicated borders: every output of a constant
  // image is the same sum in the same order, so it stays exactly constant.
  std::vector<double> tmp(static_cast<std::size_t>(h) * w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double s = 0.0;
      for (int k = -kRadius; k <= kRadius; ++k) {
        const int cc = std::clamp(c + k, 0, w - 1);
        s += kernel[k + kRadius] * gray.pixels[static_cast<std::size_t>(r) * w + cc];
      }
      tmp[static_cast<std::size_t>(r) * w + c] = s;
    }
  }
  PixelPos best{0, 0};
  double best_v = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double s = 0.0;
      for (int k = -kRadius; k <= kRadius; ++k) {
        const int rr = std::clamp(r + k, 0, h - 1);
        s += kernel[k + kRadius] * tmp[static_cast<std::size_t>(rr) * w + c];
      }
      if (s > best_v) {
        best_v = s;
        best = {r, c};
      }
    }
  }
  return best;
}

std::vector<PixelPos> rasterize_line(PixelPos a, PixelPos b) {
  const int dr = b.row - a.row;
  const int dc = b.col - a.col;
  const int n = std::max(std::abs(dr), std::abs(dc));
  std::vector<PixelPos> pts;
  pts.reserve(n + 1);
  if (n == 0) {
    pts.push_back(a);
    return pts;
  }
  const bool row_major = std::abs(dr) >= std::abs(dc);
  const int major_step = row_major ? (dr > 0 ? 1 : -1) : (dc > 0 ? 1 : -1);
  const int minor_delta = row_major ? dc : dr;
  const int minor_step = minor_delta >= 0 ? 1 : -1;
  const long long minor_abs = std::abs(minor_delta);
  // Minor offset at step i is round_half_away(i * minor_abs / n); `err`
  // tracks 2*i*minor_abs + n - 2*n*offset.
  long long err = n;
  int offset = 0;
  for (int i = 0; i <= n; ++i) {
    if (i > 0) err += 2 * minor_abs;
    while (err >= 2LL * n) {
      err -= 2LL * n;
      ++offset;
    }
    const int major = i * major_step;
    const int minor = offset * minor_step;
    pts.push_back(row_major ? PixelPos{a.row + major, a.col + minor}
                            : PixelPos{a.row + minor, a.col + major});
  }
  return pts;
}

namespace {

void zero_pixel(Mask& m, int r, int c) {
  if (r < 0 || c < 0 || r >= m.height || c >= m.width) return;
  m.bits[static_cast<std::size_t>(r) * m.width + c] = 0;
}

PixelPos ray_endpoint(PixelPos center, double angle, int height, int width) {
  const double dr = std::sin(angle);
  const double dc = std::cos(angle);
  constexpr double kTiny = 1e-12;
  double t = std::numeric_limits<double>::infinity();
  if (dr > kTiny) t = std::min(t, (height - 1 - center.row) / dr);
  if (dr < -kTiny) t = std::min(t, -center.row / dr);
  if (dc > kTiny) t = std::min(t, (width - 1 - center.col) / dc);
  if (dc < -kTiny) t = std::min(t, -center.col / dc);
  const int r = static_cast<int>(std::lround(center.row + t * dr));
  const int c = static_cast<int>(std::lround(center.col + t * dc));
  return {std::clamp(r, 0, height - 1), std::clamp(c, 0, width - 1)};
}

// Picks a uniformly random order of units (bands or cells) and zeros the
// prefix whose pixel total is closest to the target.
Mask zero_random_units(int height, int width, double ratio,
                       const std::vector<std::vector<std::size_t>>& units, Rng& rng) {
  Mask m = all_ones_mask(height, width);
  std::vector<std::size_t> order(units.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(order));

  const double target = ratio * static_cast<double>(height) * width;
  std::size_t best_k = 0;
  double best_err = target;
  double acc = 0.0;
  for (std::size_t k = 1; k <= order.size(); ++k) {
    acc += static_cast<double>(units[order[k - 1]].size());
    const double err = std::abs(acc - target);
    if (err < best_err) {
      best_err = err;
      best_k = k;
    }
  }
  for (std::size_t k = 0; k < best_k; ++k) {
    for (std::size_t idx : units[order[k]]) m.bits[idx] = 0;
  }
  return m;
}

}  // namespace

Mask rays_mask_with_offset(PixelPos center, int num_rays, int ray_thickness, int disc_radius,
                           int height, int width, double offset) {
  if (center.row < 0 || center.col < 0 || center.row >= height || center.col >= width) {
    throw DomainError("rays center (" + std::to_string(center.row) + ", " +
                      std::to_string(center.col) + ") lies outside the image");
  }
  if (num_rays < 0 || ray_thickness < 0 || disc_radius < 0) {
    throw ConfigError("rays mask counts must be non-negative");
  }
  Mask m = all_ones_mask(height, width);
  m.center = center;
  m.spec.kind = MaskKind::kRays;
  m.spec.num_rays = num_rays;
  m.spec.ray_thickness = ray_thickness;
  m.spec.disc_radius = disc_radius;

  if (disc_radius > 0) {
    const int r2 = disc_radius * disc_radius;
    for (int r = center.row - disc_radius; r <= center.row + disc_radius; ++r) {
      for (int c = center.col - disc_radius; c <= center.col + disc_radius; ++c) {
        const int dr = r - center.row;
        const int dc = c - center.col;
        if (dr * dr + dc * dc <= r2) zero_pixel(m, r, c);
      }
    }
  }
  if (ray_thickness == 0) return m;
  // Square brush of side `ray_thickness`, anchored so thickness 1 is the
  // line itself.
  const int lo = -(ray_thickness - 1) / 2;
  const int hi = ray_thickness / 2;
  for (int k = 0; k < num_rays; ++k) {
    const double angle = offset + 2.0 * std::numbers::pi * k / num_rays;
    const PixelPos end = ray_endpoint(center, angle, height, width);
    for (const PixelPos& p : rasterize_line(center, end)) {
      for (int br = lo; br <= hi; ++br) {
        for (int bc = lo; bc <= hi; ++bc) zero_pixel(m, p.row + br, p.col + bc);
      }
    }
  }
  return m;
}

Mask rays_mask(PixelPos center, int num_rays, int ray_thickness, int disc_radius, int height,
               int width, Rng& rng) {
  const double offset =
      num_rays > 0 ? rng.uniform() * 2.0 * std::numbers::pi / num_rays : 0.0;
  return rays_mask_with_offset(center, num_rays, ray_thickness, disc_radius, height, width,
                               offset);
}

Mask stripe_mask(double mask_ratio, StripeOrientation orientation, int stripe_width, int height,
                 int width, Rng& rng) {
  if (!(mask_ratio >= 0.0 && mask_ratio <= 1.0)) {
    throw ConfigError("mask_ratio must lie in [0, 1]");
  }
  const bool horizontal = orientation == StripeOrientation::kHorizontal;
  const int extent = horizontal ? height : width;
  if (stripe_width < 1 || stripe_width > extent) {
    throw ConfigError("stripe_width " + std::to_string(stripe_width) +
                      " must be in [1, " + std::to_string(extent) + "]");
  }
  std::vector<std::vector<std::size_t>> bands;
  for (int start = 0; start < extent; start += stripe_width) {
    std::vector<std::size_t> band;
    for (int k = start; k < std::min(extent, start + stripe_width); ++k) {
      if (horizontal) {
        for (int c = 0; c < width; ++c) band.push_back(static_cast<std::size_t>(k) * width + c);
      } else {
        for (int r = 0; r < height; ++r) band.push_back(static_cast<std::size_t>(r) * width + k);
      }
    }
    bands.push_back(std::move(band));
  }
  Mask m = zero_random_units(height, width, mask_ratio, bands, rng);
  m.spec.kind = MaskKind::kStripe;
  m.spec.stripe_orientation = orientation;
  m.spec.stripe_width = stripe_width;
  m.spec.mask_ratio = mask_ratio;
  return m;
}

Mask block_mask(double mask_ratio, int block_size, int height, int width, Rng& rng) {
  if (!(mask_ratio >= 0.0 && mask_ratio <= 1.0)) {
    throw ConfigError("mask_ratio must lie in [0, 1]");
  }
  if (block_size < 1) throw ConfigError("block_size must be at least 1");
  std::vector<std::vector<std::size_t>> cells;
  for (int r0 = 0; r0 < height; r0 += block_size) {
    for (int c0 = 0; c0 < width; c0 += block_size) {
      std::vector<std::size_t> cell;
      for (int r = r0; r < std::min(height, r0 + block_size); ++r) {
        for (int c = c0; c < std::min(width, c0 + block_size); ++c) {
          cell.push_back(static_cast<std::size_t>(r) * width + c);
        }
      }
      cells.push_back(std::move(cell));
    }
  }
  Mask m = zero_random_units(height, width, mask_ratio, cells, rng);
  m.spec.kind = MaskKind::kBlock;
  m.spec.block_size = block_size;
  m.spec.mask_ratio = mask_ratio;
  return m;
}

Mask make_mask(const MaskSpec& spec, const Image& reference, Rng& rng) {
  validate(spec);
  Mask m;
  switch (spec.kind) {
    case MaskKind::kRays:
      m = rays_mask(find_brightness_center(reference), spec.num_rays, spec.ray_thickness,
                    spec.disc_radius, reference.height, reference.width, rng);
      break;
    case MaskKind::kStripe:
      m = stripe_mask(spec.mask_ratio, spec.stripe_orientation, spec.stripe_width,
                      reference.height, reference.width, rng);
      break;
    case MaskKind::kBlock:
      m = block_mask(spec.mask_ratio, spec.block_size, reference.height, reference.width, rng);
      break;
  }
  const PixelPos center = m.center;
  m.spec = spec;
  m.center = center;
  return m;
}

Image apply_mask(const Image& img, const Mask& mask) {
  if (img.height != mask.height || img.width != mask.width ||
      mask.bits.size() != img.plane_size()) {
    throw DataError("mask shape " + std::to_string(mask.height) + "x" +
                    std::to_string(mask.width) + " does not match image " +
                    std::to_string(img.height) + "x" + std::to_string(img.width));
  }
  Image out = img;
  const std::size_t plane = img.plane_size();
  for (int c = 0; c < img.channels; ++c) {
    for (std::size_t i = 0; i < plane; ++i) {
      out.pixels[c * plane + i] *= static_cast<float>(mask.bits[i]);
    }
  }
  return out;
}

}  // namespace tower::transform
