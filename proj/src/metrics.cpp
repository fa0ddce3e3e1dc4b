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

#include "tower/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "tower/error.hpp"

namespace tower::metrics {

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DataError("auc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  double pos = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // Tied block occupies ranks i+1..j.
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      const int y = labels[order[k]];
      if (y != 0 && y != 1) throw DataError("auc: labels must be 0 or 1");
      if (y == 1) {
        rank_sum += avg_rank;
        pos += 1.0;
      }
    }
    i = j;
  }
  const double neg = static_cast<double>(n) - pos;
  if (pos == 0.0 || neg == 0.0) throw MetricError("auc: needs at least one positive and one negative");
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

double auc(std::span<const double> scores, std::span<const int> labels, int num_classes) {
  if (num_classes < 2) throw MetricError("auc: needs at least two classes");
  const std::size_t n = labels.size();
  if (scores.size() != n * num_classes) throw DataError("auc: score matrix is not N x K");
  std::vector<double> column(n);
  std::vector<int> onehot(n);
  auto one_vs_rest = [&](int k) {
    for (std::size_t i = 0; i < n; ++i) {
      column[i] = scores[i * num_classes + k];
      onehot[i] = labels[i] == k ? 1 : 0;
    }
    return auc(column, onehot);
  };
  if (num_classes == 2) return one_vs_rest(1);
  double total = 0.0;
  for (int k = 0; k < num_classes; ++k) total += one_vs_rest(k);
  return total / num_classes;
}

double dice(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth) {
  if (pred.size() != truth.size()) throw DataError("dice: masks differ in size");
  std::size_t p = 0, g = 0, both = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool a = pred[i] != 0;
    const bool b = truth[i] != 0;
    p += a;
    g += b;
    both += a && b;
  }
  if (p + g == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(p + g);
}

double dice(const Image& pred, const Image& truth) {
  if (!pred.same_shape(truth)) throw DataError("dice: masks differ in shape");
  std::vector<std::uint8_t> a(pred.size()), b(truth.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = pred.pixels[i] > 0.5f;
    b[i] = truth.pixels[i] > 0.5f;
  }
  return dice(a, b);
}

}  // namespace tower::metrics
