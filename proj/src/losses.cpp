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

#include "tower/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tower/error.hpp"

namespace tower::loss {

double cosine_sim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("cosine_sim: vector lengths differ");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw NumericError("cosine_sim: zero-norm vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double info_nce(const PairBatch& b) {
  if (b.n < 2) throw UsageError("info_nce needs at least 2 samples to form negatives");
  if (!(b.temperature > 0.0)) throw ConfigError("temperature must be positive");
  const std::size_t e = static_cast<std::size_t>(b.dim);
  if (b.z.size() != b.n * e || b.z_t.size() != b.n * e) {
    throw DataError("info_nce: embedding arrays do not match n x dim");
  }
  auto row = [e](const std::vector<double>& m, int i) {
    return std::span<const double>(m.data() + i * e, e);
  };
  double total = 0.0;
  std::vector<double> logits;
  for (int n = 0; n < b.n; ++n) {
    logits.clear();
    const double pos = cosine_sim(row(b.z, n), row(b.z_t, n)) / b.temperature;
    logits.push_back(pos);
    for (int m = 0; m < b.n; ++m) {
      if (m == n) continue;
      logits.push_back(cosine_sim(row(b.z, n), row(b.z, m)) / b.temperature);
      logits.push_back(cosine_sim(row(b.z, n), row(b.z_t, m)) / b.temperature);
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double s = 0.0;
    for (double l : logits) s += std::exp(l - mx);
    total += mx + std::log(s) - pos;
  }
  return total / b.n;
}

double mse_restoration(std::span<const Image> originals, std::span<const Image> restored) {
  if (originals.size() != restored.size()) throw DataError("mse_restoration: batch sizes differ");
  double total = 0.0;
  for (std::size_t n = 0; n < originals.size(); ++n) {
    if (!originals[n].same_shape(restored[n])) {
      throw DataError("mse_restoration: image " + std::to_string(n) + " shapes differ");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < originals[n].size(); ++i) {
      const double d = static_cast<double>(restored[n].pixels[i]) - originals[n].pixels[i];
      acc += d * d;
    }
    total += acc / static_cast<double>(originals[n].size());
  }
  return total;
}

double tower_loss(double contrastive, double generative, double lambda) {
  return contrastive + lambda * generative;
}

template <typename T>
nn::BasicVar<T> info_nce(nn::BasicVar<T> z, nn::BasicVar<T> z_t, T temperature, bool symmetric) {
  const int n = z.shape().n;
  if (n < 2) throw UsageError("info_nce needs at least 2 samples to form negatives");
  if (!(temperature > T(0))) throw ConfigError("temperature must be positive");
  if (z.shape() != z_t.shape()) throw DataError("info_nce: embedding shapes differ");
  auto zn = nn::ops::l2_normalize_rows(z);
  auto ztn = nn::ops::l2_normalize_rows(z_t);
  auto all = nn::ops::concat_batch(zn, ztn);
  auto anchors = symmetric ? all : zn;
  const int rows = symmetric ? 2 * n : n;
  auto logits = nn::ops::scale(nn::ops::matmul_nt(anchors, all), T(1) / temperature);
  std::vector<int> targets(rows), excluded(rows);
  for (int i = 0; i < rows; ++i) {
    targets[i] = i < n ? i + n : i - n;
    excluded[i] = i;
  }
  return nn::ops::softmax_cross_entropy(logits, targets, excluded);
}

template nn::BasicVar<float> info_nce(nn::BasicVar<float>, nn::BasicVar<float>, float, bool);
template nn::BasicVar<double> info_nce(nn::BasicVar<double>, nn::BasicVar<double>, double, bool);

}  // namespace tower::loss
