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

#include <doctest.h>

#include <cmath>

#include "tower/bezier.hpp"
#include "tower/error.hpp"

using namespace tower;
using namespace tower::transform;

namespace {

// Independent Bernstein evaluation by expanded powers.
Point2 cubic(const ControlPoints& cp, double t) {
  const double s = 1.0 - t;
  const double b0 = s * s * s, b1 = 3 * s * s * t, b2 = 3 * s * t * t, b3 = t * t * t;
  return {b0 * cp.p0.x + b1 * cp.p1.x + b2 * cp.p2.x + b3 * cp.p3.x,
          b0 * cp.p0.y + b1 * cp.p1.y + b2 * cp.p2.y + b3 * cp.p3.y};
}

Image ramp(int h, int w) {
  Image img(1, h, w);
  for (std::size_t i = 0; i < img.size(); ++i) {
    img.pixels[i] = static_cast<float>(i) / static_cast<float>(img.size() - 1);
  }
  return img;
}

}  // namespace

TEST_CASE("bezier_point on hand-evaluated curves") {
  const ControlPoints lin = identity_control_points();
  const Point2 mid = bezier_point(lin, 0.5);
  CHECK(mid.x == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(mid.y == doctest::Approx(0.5).epsilon(1e-15));

  const ControlPoints s{{0, 0}, {0.25, 0.75}, {0.75, 0.25}, {1, 1}};
  const Point2 p = bezier_point(s, 0.5);
  CHECK(p.x == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(p.y == doctest::Approx(0.5).epsilon(1e-15));

  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const ControlPoints cp = sample_control_points(rng, Direction::kRandom);
    CHECK(bezier_point(cp, 0.0) == cp.p0);
    CHECK(bezier_point(cp, 1.0) == cp.p3);
    const double t = rng.uniform();
    const Point2 a = bezier_point(cp, t);
    const Point2 b = cubic(cp, t);
    CHECK(a.x == doctest::Approx(b.x).epsilon(1e-12));
    CHECK(a.y == doctest::Approx(b.y).epsilon(1e-12));
  }
}

TEST_CASE("bezier_point rejects parameters outside the unit interval") {
  CHECK_THROWS_AS(bezier_point(identity_control_points(), -0.01), DomainError);
  CHECK_THROWS_AS(bezier_point(identity_control_points(), 1.01), DomainError);
}

TEST_CASE("control point validation") {
  CHECK_NOTHROW(validate(identity_control_points()));
  CHECK_NOTHROW(validate(reversed_control_points()));
  ControlPoints bad = identity_control_points();
  bad.p1.x = 1.5;
  CHECK_THROWS_AS(validate(bad), DomainError);
  ControlPoints mixed{{0, 0}, {0.2, 0.2}, {0.8, 0.8}, {1, 0}};
  CHECK_THROWS_AS(validate(mixed), DomainError);
}

TEST_CASE("linear special cases") {
  const auto id = TranslationTable::build(identity_control_points(), 1000);
  const auto rev = TranslationTable::build(reversed_control_points(), 1000);
  CHECK(std::abs(id.lookup(0.25) - 0.25) <= 1e-3);
  CHECK(std::abs(rev.lookup(0.3) - 0.7) <= 1e-3);
  for (int i = 0; i <= 100; ++i) {
    const double p = i / 100.0;
    CHECK(std::abs(id.lookup(p) - p) <= 1e-3);
    CHECK(std::abs(rev.lookup(p) - (1.0 - p)) <= 1e-3);
  }
}

TEST_CASE("table structure") {
  Rng rng(8);
  for (int i = 0; i < 20; ++i) {
    const auto t = TranslationTable::build(sample_control_points(rng, Direction::kRandom), 1000);
    const auto& xs = t.abscissa();
    REQUIRE(xs.size() == t.ordinate().size());
    CHECK(xs.front() == 0.0);
    CHECK(xs.back() == 1.0);
    for (std::size_t k = 1; k < xs.size(); ++k) CHECK(xs[k] > xs[k - 1]);
    CHECK(t.resolution() == 1000);
  }
  CHECK_THROWS_AS(TranslationTable::build(identity_control_points(), 1), ConfigError);
}

TEST_CASE("tables are monotone in the direction of their end points") {
  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    const auto cp = sample_control_points(rng, Direction::kRandom);
    const auto t = TranslationTable::build(cp, 1000);
    const double sign = cp.increasing() ? 1.0 : -1.0;
    double prev = t.lookup(0.0);
    for (int k = 1; k <= 10000; ++k) {
      const double v = t.lookup(k / 10000.0);
      CHECK(sign * (v - prev) >= 0.0);
      prev = v;
    }
  }
}

TEST_CASE("apply_translation") {
  const Image img = ramp(8, 8);
  const auto id = TranslationTable::build(identity_control_points(), 1000);
  CHECK(apply_translation(img, id) == img);

  const auto inc = TranslationTable::build({{0, 0}, {0.9, 0.1}, {0.3, 0.6}, {1, 1}}, 1000);
  const Image zero(1, 4, 4, 0.0f);
  for (float v : apply_translation(zero, inc).pixels) CHECK(v == 0.0f);

  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    const auto t = TranslationTable::build(sample_control_points(rng, Direction::kRandom), 1000);
    const Image out = apply_translation(img, t);
    CHECK(out.same_shape(img));
    for (float v : out.pixels) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }

  Image bad = img;
  bad.pixels[3] = 1.01f;
  CHECK_THROWS_AS(apply_translation(bad, id), DataError);
}

TEST_CASE("translation round trip through the inverted table") {
  const Image img = ramp(16, 16);
  Rng rng(21);
  for (int i = 0; i < 50; ++i) {
    const auto t = TranslationTable::build(sample_control_points(rng, Direction::kRandom), 1000);
    const Image back = apply_translation(apply_translation(img, t), t.inverted());
    double worst = 0.0;
    for (std::size_t k = 0; k < img.size(); ++k) {
      worst = std::max(worst, static_cast<double>(std::abs(back.pixels[k] - img.pixels[k])));
    }
    CHECK(worst <= 2e-3);
  }
}

TEST_CASE("per-channel tables") {
  Image rgb(3, 2, 2, 0.5f);
  const std::vector<TranslationTable> ts = {TranslationTable::build(identity_control_points()),
                                            TranslationTable::build(reversed_control_points()),
                                            TranslationTable::build(identity_control_points())};
  const Image out = apply_translation(rgb, ts);
  CHECK(out.at(0, 0, 0) == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(out.at(1, 1, 1) == doctest::Approx(0.5).epsilon(1e-3));
  CHECK_THROWS(apply_translation(rgb, std::vector<TranslationTable>(2, ts[0])));
}

TEST_CASE("control point sampling") {
  Rng a(42), b(42);
  CHECK(sample_control_points(a, Direction::kRandom) == sample_control_points(b, Direction::kRandom));

  Rng rng(1);
  const auto inc = sample_control_points(rng, Direction::kIncreasing);
  CHECK(inc.p0 == Point2{0, 0});
  CHECK(inc.p3 == Point2{1, 1});
  const auto dec = sample_control_points(rng, Direction::kDecreasing);
  CHECK(dec.p0 == Point2{0, 1});
  CHECK(dec.p3 == Point2{1, 0});

  double sum = 0.0;
  int increasing = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto cp = sample_control_points(rng, Direction::kRandom);
    sum += cp.p1.x;
    increasing += cp.increasing();
  }
  CHECK(std::abs(sum / 10000 - 0.5) <= 0.02);
  CHECK(std::abs(increasing / 10000.0 - 0.5) <= 0.02);
}
