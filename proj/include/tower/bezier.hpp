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

#include <vector>

#include "tower/image.hpp"
#include "tower/rng.hpp"

namespace tower::transform {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

enum class Direction { kIncreasing, kDecreasing, kRandom };

// Cubic Bezier control polygon for an intensity curve. The end points fix
// the direction: (0,0)->(1,1) is increasing, (0,1)->(1,0) is decreasing.
struct ControlPoints {
  Point2 p0, p1, p2, p3;

  bool increasing() const { return p3.y >= p0.y; }
  friend bool operator==(const ControlPoints&, const ControlPoints&) = default;
};

// Throws DomainError unless every coordinate is in [0,1] and the end points
// match one of the two directions.
void validate(const ControlPoints& cp);

// Bernstein evaluation of the cubic at t in [0, 1]. No clamping.
Point2 bezier_point(const ControlPoints& cp, double t);

// Sampled intensity mapping p -> p'. Immutable after construction.
class TranslationTable {
 public:
  static constexpr int kDefaultResolution = 1000;

  // Samples the curve at `resolution` uniformly spaced parameters, sorts the
  // samples by abscissa (ties keep the first occurrence) and clamps the end
  // abscissae to 0 and 1.
  static TranslationTable build(const ControlPoints& cp, int resolution = kDefaultResolution);

  // Piecewise-linear lookup; inputs outside [0,1] are clamped.
  double lookup(double p) const;

  // Table obtained by exchanging abscissa and ordinate and re-sorting.
  TranslationTable inverted() const;

  const std::vector<double>& abscissa() const { return xs_; }
  const std::vector<double>& ordinate() const { return ys_; }
  const ControlPoints& source() const { return source_; }
  int resolution() const { return resolution_; }

 private:
  TranslationTable() = default;

  std::vector<double> xs_;
  std::vector<double> ys_;
  ControlPoints source_{};
  int resolution_ = 0;
};

// Maps every pixel through the table. Input must be normalized to [0,1]
// (1e-6 slack); output stays in [0,1] and keeps the shape.
Image apply_translation(const Image& img, const TranslationTable& table);

// Per-channel variant: one table per channel.
Image apply_translation(const Image& img, const std::vector<TranslationTable>& tables);

// End points from `dir` (a fair coin for kRandom); p1 and p2 uniform on the
// unit square.
ControlPoints sample_control_points(Rng& rng, Direction dir);

// The linear identity and its mirror image.
ControlPoints identity_control_points();
ControlPoints reversed_control_points();

}  // namespace tower::transform
