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

#include "tower/bezier.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "tower/error.hpp"

namespace tower::transform {
namespace {

bool in_unit(const Point2& p) { return p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0; }

}  // namespace

void validate(const ControlPoints& cp) {
  if (!in_unit(cp.p0) || !in_unit(cp.p1) || !in_unit(cp.p2) || !in_unit(cp.p3)) {
    throw DomainError("control point coordinates must lie in [0, 1]");
  }
  const bool inc = cp.p0 == Point2{0, 0} && cp.p3 == Point2{1, 1};
  const bool dec = cp.p0 == Point2{0, 1} && cp.p3 == Point2{1, 0};
  if (!inc && !dec) {
    throw DomainError("end points must be (0,0)->(1,1) or (0,1)->(1,0)");
  }
}

Point2 bezier_point(const ControlPoints& cp, double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw DomainError("bezier parameter t=" + std::to_string(t) + " outside [0, 1]");
  }
  const double s = 1.0 - t;
  const double b0 = s * s * s;
  const double b1 = 3.0 * s * s * t;
  const double b2 = 3.0 * s * t * t;
  const double b3 = t * t * t;
  return {b0 * cp.p0.x + b1 * cp.p1.x + b2 * cp.p2.x + b3 * cp.p3.x,
          b0 * cp.p0.y + b1 * cp.p1.y + b2 * cp.p2.y + b3 * cp.p3.y};
}

TranslationTable TranslationTable::build(const ControlPoints& cp, int resolution) {
  if (resolution < 2) {
    throw ConfigError("translation resolution must be at least 2, got " +
                      std::to_string(resolution));
  }
  validate(cp);

  std::vector<Point2> samples(resolution);
  for (int k = 0; k < resolution; ++k) {
    samples[k] = bezier_point(cp, static_cast<double>(k) / (resolution - 1));
  }
  std::stable_sort(samples.begin(), samples.end(),
                   [](const Point2& a, const Point2& b) { return a.x < b.x; });

  TranslationTable table;
  table.source_ = cp;
  table.resolution_ = resolution;
  table.xs_.reserve(resolution);
  table.ys_.reserve(resolution);
  for (const Point2& p : samples) {
    if (!table.xs_.empty() && p.x == table.xs_.back()) continue;
    table.xs_.push_back(p.x);
    table.ys_.push_back(p.y);
  }
  table.xs_.front() = 0.0;
  if (table.xs_.size() == 1) {
    // Degenerate curve with a single abscissa: extend to a flat segment.
    table.xs_.push_back(1.0);
    table.ys_.push_back(table.ys_.front());
  }
  table.xs_.back() = 1.0;
  return table;
}

double TranslationTable::lookup(double p) const {
  if (p <= xs_.front()) return ys_.front();
  if (p >= xs_.back()) return ys_.back();
  const auto it = std::upper_bound(xs_.begin(), xs_.end(), p);
  const std::size_t hi = static_cast<std::size_t>(it - xs_.begin());
  const std::size_t lo = hi - 1;
  const double span = xs_[hi] - xs_[lo];
  const double w = (p - xs_[lo]) / span;
  return ys_[lo] + w * (ys_[hi] - ys_[lo]);
}

TranslationTable TranslationTable::inverted() const {
  std::vector<std::size_t> order(xs_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [this](std::size_t a, std::size_t b) { return ys_[a] < ys_[b]; });
  TranslationTable inv;
  inv.source_ = source_;
  inv.resolution_ = resolution_;
  for (std::size_t i : order) {
    if (!inv.xs_.empty() && ys_[i] == inv.xs_.back()) continue;
    inv.xs_.push_back(ys_[i]);
    inv.ys_.push_back(xs_[i]);
  }
  inv.xs_.front() = 0.0;
  if (inv.xs_.size() == 1) {
    inv.xs_.push_back(1.0);
    inv.ys_.push_back(inv.ys_.front());
  }
  inv.xs_.back() = 1.0;
  return inv;
}

Image apply_translation(const Image& img, const TranslationTable& table) {
  check_normalized(img);
  Image out = img;
  for (float& p : out.pixels) {
    const double v = table.lookup(p);
    p = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return out;
}

Image apply_translation(const Image& img, const std::vector<TranslationTable>& tables) {
  if (tables.size() == 1) return apply_translation(img, tables.front());
  if (static_cast<int>(tables.size()) != img.channels) {
    throw DataError("expected " + std::to_string(img.channels) + " translation tables, got " +
                    std::to_string(tables.size()));
  }
  check_normalized(img);
  Image out = img;
  const std::size_t plane = img.plane_size();
  for (int c = 0; c < img.channels; ++c) {
    for (std::size_t i = 0; i < plane; ++i) {
      float& p = out.pixels[c * plane + i];
      p = static_cast<float>(std::clamp(tables[c].lookup(p), 0.0, 1.0));
    }
  }
  return out;
}

ControlPoints sample_control_points(Rng& rng, Direction dir) {
  bool increasing = dir == Direction::kIncreasing;
  if (dir == Direction::kRandom) increasing = rng.bernoulli(0.5);
  ControlPoints cp;
  cp.p0 = increasing ? Point2{0, 0} : Point2{0, 1};
  cp.p3 = increasing ? Point2{1, 1} : Point2{1, 0};
  cp.p1.x = rng.uniform();
  cp.p1.y = rng.uniform();
  cp.p2.x = rng.uniform();
  cp.p2.y = rng.uniform();
  return cp;
}

ControlPoints identity_control_points() { return {{0, 0}, {0, 0}, {1, 1}, {1, 1}}; }

ControlPoints reversed_control_points() { return {{0, 1}, {0, 1}, {1, 0}, {1, 0}}; }

}  // namespace tower::transform
