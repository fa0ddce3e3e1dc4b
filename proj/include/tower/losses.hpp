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

#include <span>
#include <vector>

#include "tower/graph.hpp"
#include "tower/image.hpp"

namespace tower::loss {

// Embeddings of N originals and their N transformed views, row-major N x E.
struct PairBatch {
  int n = 0;
  int dim = 0;
  std::vector<double> z;
  std::vector<double> z_t;
  double temperature = 0.1;
};

// a.b / (|a| |b|). Zero-norm input raises NumericError.
double cosine_sim(std::span<const double> a, std::span<const double> b);

// Single-direction InfoNCE: anchor z_n, positive z_t[n], negatives the other
// N-1 originals and N-1 views. Log-sum-exp stabilized.
// N < 2 raises UsageError, temperature <= 0 raises ConfigError.
double info_nce(const PairBatch& batch);

// Sum over images of per-image mean squared error between originals and
// restorations.
double mse_restoration(std::span<const Image> originals, std::span<const Image> restored);

// L_con + lambda * L_gen.
double tower_loss(double contrastive, double generative, double lambda = 1.0);

// Differentiable counterparts used by training. `symmetric` also anchors
// every transformed view (2N anchors).
template <typename T>
nn::BasicVar<T> info_nce(nn::BasicVar<T> z, nn::BasicVar<T> z_t, T temperature,
                         bool symmetric = false);

template <typename T>
nn::BasicVar<T> mse_restoration(nn::BasicVar<T> restored, nn::BasicVar<T> originals) {
  return nn::ops::mse_image_sum(restored, originals);
}

template <typename T>
nn::BasicVar<T> tower_loss(nn::BasicVar<T> contrastive, nn::BasicVar<T> generative, T lambda) {
  return nn::ops::add(contrastive, nn::ops::scale(generative, lambda));
}

}  // namespace tower::loss
