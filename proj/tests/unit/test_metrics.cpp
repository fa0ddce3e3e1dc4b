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

#include "support.hpp"
#include "tower/error.hpp"
#include "tower/metrics.hpp"

using namespace tower;

namespace {

// Fraction of (positive, negative) pairs ranked correctly, ties count half.
double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0;
  long pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      ++pairs;
      if (s[i] > s[j]) wins += 1.0;
      if (s[i] == s[j]) wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

double loop_dice(const std::vector<std::uint8_t>& p, const std::vector<std::uint8_t>& g) {
  long inter = 0, np = 0, ng = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    inter += (p[i] != 0 && g[i] != 0) ? 1 : 0;
    np += p[i] != 0 ? 1 : 0;
    ng += g[i] != 0 ? 1 : 0;
  }
  if (np + ng == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(np + ng);
}

}  // namespace

TEST_CASE("auc hand examples") {
  const std::vector<double> s{0.9, 0.8, 0.3, 0.2};
  const std::vector<int> y{1, 0, 1, 0};
  CHECK(metrics::auc(s, y) == 0.75);
  CHECK(metrics::auc(std::vector<double>{0.5, 0.5, 0.5}, std::vector<int>{1, 0, 1}) == 0.5);
  CHECK(metrics::auc(std::vector<double>{0.1, 0.9}, std::vector<int>{0, 1}) == 1.0);
  CHECK(metrics::auc(std::vector<double>{0.9, 0.1}, std::vector<int>{0, 1}) == 0.0);
}

TEST_CASE("auc matches the exhaustive pairwise oracle") {
  tower::Rng rng(42);
  for (int batch = 0; batch < 100; ++batch) {
    const std::size_t n = 2 + rng.below(60);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse scores force ties.
      s[i] = batch % 2 == 0 ? rng.uniform() : static_cast<double>(rng.below(5));
      y[i] = static_cast<int>(rng.below(2));
    }
    y[0] = 0;
    y[1] = 1;
    CHECK(metrics::auc(s, y) == pairwise_auc(s, y));
  }
}

TEST_CASE("auc is undefined for one class") {
  CHECK_THROWS_AS(metrics::auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), MetricError);
  CHECK_THROWS_AS(metrics::auc(std::vector<double>{}, std::vector<int>{}), MetricError);
  CHECK_THROWS_AS(metrics::auc(std::vector<double>{0.1}, std::vector<int>{0, 1}), DataError);
}

TEST_CASE("multi-class auc") {
  // Two classes use the class-1 column.
  const std::vector<double> two{0.8, 0.2, 0.3, 0.7, 0.6, 0.4};
  CHECK(metrics::auc(two, std::vector<int>{0, 1, 0}, 2) == 1.0);
  // Three perfectly separated classes.
  const std::vector<double> three{0.9, 0.05, 0.05, 0.1, 0.8, 0.1, 0.1, 0.1, 0.8};
  CHECK(metrics::auc(three, std::vector<int>{0, 1, 2}, 3) == 1.0);
  // Macro average of one-vs-rest.
  tower::Rng rng(3);
  std::vector<double> s(30 * 3);
  std::vector<int> y(30);
  for (double& v : s) v = rng.uniform();
  for (int i = 0; i < 30; ++i) y[i] = i % 3;
  double expected = 0.0;
  for (int k = 0; k < 3; ++k) {
    std::vector<double> col;
    std::vector<int> bin;
    for (int i = 0; i < 30; ++i) {
      col.push_back(s[i * 3 + k]);
      bin.push_back(y[i] == k ? 1 : 0);
    }
    expected += pairwise_auc(col, bin) / 3.0;
  }
  CHECK(metrics::auc(s, y, 3) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("dice matches its loop oracle") {
  tower::Rng rng(5);
  for (int batch = 0; batch < 100; ++batch) {
    const std::size_t n = 1 + rng.below(200);
    const double p1 = rng.uniform(), p2 = rng.uniform();
    std::vector<std::uint8_t> p(n), g(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng.bernoulli(p1) ? static_cast<std::uint8_t>(1 + rng.below(255)) : 0;
      g[i] = rng.bernoulli(p2) ? 1 : 0;
    }
    CHECK(metrics::dice(p, g) == loop_dice(p, g));
  }
}

TEST_CASE("dice examples") {
  using V = std::vector<std::uint8_t>;
  CHECK(metrics::dice(V{1, 1, 0, 0}, V{1, 0, 1, 0}) == 0.5);
  CHECK(metrics::dice(V{0, 0}, V{0, 0}) == 1.0);
  CHECK(metrics::dice(V{1, 0}, V{0, 0}) == 0.0);
  CHECK(metrics::dice(V{1, 1}, V{1, 1}) == 1.0);
  CHECK_THROWS_AS(metrics::dice(V{1}, V{1, 0}), DataError);

  Image a(1, 2, 2), b(1, 2, 2);
  a.pixels = {0.9f, 0.6f, 0.4f, 0.0f};
  b.pixels = {1.0f, 0.0f, 0.0f, 0.0f};
  CHECK(metrics::dice(a, b) == doctest::Approx(2.0 / 3.0));
  CHECK_THROWS_AS(metrics::dice(a, Image(1, 2, 3)), DataError);
}
