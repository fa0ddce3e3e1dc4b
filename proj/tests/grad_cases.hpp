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

#include <functional>
#include <string>
#include <vector>

#include "support.hpp"
#include "tower/losses.hpp"

namespace tower::testing {

struct GradCase {
  std::string op;
  std::vector<DParam> params;
  std::function<DVar(DGraph&, std::vector<DVar>&)> build;
};

// Values at least `gap` away from zero so that no step crosses a kink.
inline DTensor away_from_zero(nn::Shape s, Rng& rng, double gap = 0.05) {
  DTensor t(s);
  for (double& v : t.data) {
    const double m = rng.uniform(gap, 1.0);
    v = rng.bernoulli(0.5) ? m : -m;
  }
  return t;
}

// Distinct values spaced well beyond the step so max pooling has no ties.
inline DTensor distinct_values(nn::Shape s, Rng& rng) {
  std::vector<std::size_t> order(s.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(std::span<std::size_t>(order));
  DTensor t(s);
  for (std::size_t i = 0; i < order.size(); ++i) t[i] = 0.05 * static_cast<double>(order[i]);
  return t;
}

inline int draw(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

inline nn::Shape random_shape(Rng& rng, bool even = false) {
  nn::Shape s{draw(rng, 1, 2), draw(rng, 1, 3), draw(rng, 1, 5), draw(rng, 1, 5)};
  if (even) {
    s.h = 2 * draw(rng, 1, 3);
    s.w = 2 * draw(rng, 1, 3);
  }
  return s;
}

inline DParam param(const char* name, DTensor t) { return DParam(name, std::move(t)); }

// One randomly shaped instance of every differentiable primitive plus the
// composed contrastive and restoration loss. Each output is reduced to a
// scalar with random weights so every output element is exercised.
inline std::vector<GradCase> gradient_cases(Rng& rng) {
  std::vector<GradCase> cases;
  using V = std::vector<DVar>;

  for (const int k : {3, 1}) {
    const nn::Shape xs = random_shape(rng);
    const int cout = draw(rng, 1, 3);
    const DTensor w = random_tensor({xs.n, cout, xs.h, xs.w}, rng);
    cases.push_back({k == 3 ? "conv2d_k3" : "conv2d_k1",
                     {param("x", random_tensor(xs, rng)), param("k", random_tensor({cout, xs.c, k, k}, rng)),
                      param("b", random_tensor({1, cout, 1, 1}, rng))},
                     [w, k](DGraph&, V& v) { return weighted_sum(nn::ops::conv2d(v[0], v[1], v[2], k / 2), w); }});
  }
  {
    const int n = draw(rng, 1, 4), din = draw(rng, 1, 5), dout = draw(rng, 1, 5);
    const DTensor w = random_tensor({n, dout, 1, 1}, rng);
    cases.push_back({"dense",
                     {param("x", random_tensor({n, din, 1, 1}, rng)),
                      param("w", random_tensor({dout, din, 1, 1}, rng)),
                      param("b", random_tensor({1, dout, 1, 1}, rng))},
                     [w](DGraph&, V& v) { return weighted_sum(nn::ops::dense(v[0], v[1], v[2]), w); }});
    const int m = draw(rng, 1, 4);
    const DTensor w2 = random_tensor({n, m, 1, 1}, rng);
    cases.push_back({"matmul_nt",
                     {param("a", random_tensor({n, din, 1, 1}, rng)),
                      param("b", random_tensor({m, din, 1, 1}, rng))},
                     [w2](DGraph&, V& v) { return weighted_sum(nn::ops::matmul_nt(v[0], v[1]), w2); }});
  }
  {
    const nn::Shape xs = random_shape(rng, true);
    const DTensor wp = random_tensor({xs.n, xs.c, xs.h / 2, xs.w / 2}, rng);
    cases.push_back({"max_pool2", {param("x", distinct_values(xs, rng))},
                     [wp](DGraph&, V& v) { return weighted_sum(nn::ops::max_pool2(v[0]), wp); }});
    const DTensor wu = random_tensor({xs.n, xs.c, xs.h * 2, xs.w * 2}, rng);
    cases.push_back({"upsample2", {param("x", random_tensor(xs, rng))},
                     [wu](DGraph&, V& v) { return weighted_sum(nn::ops::upsample2(v[0]), wu); }});
    const int c2 = draw(rng, 1, 3);
    const DTensor wc = random_tensor({xs.n, xs.c + c2, xs.h, xs.w}, rng);
    cases.push_back({"concat_channels",
                     {param("a", random_tensor(xs, rng)), param("b", random_tensor({xs.n, c2, xs.h, xs.w}, rng))},
                     [wc](DGraph&, V& v) { return weighted_sum(nn::ops::concat_channels(v[0], v[1]), wc); }});
    const int n2 = draw(rng, 1, 3);
    const DTensor wb = random_tensor({xs.n + n2, xs.c, xs.h, xs.w}, rng);
    cases.push_back({"concat_batch",
                     {param("a", random_tensor(xs, rng)), param("b", random_tensor({n2, xs.c, xs.h, xs.w}, rng))},
                     [wb](DGraph&, V& v) { return weighted_sum(nn::ops::concat_batch(v[0], v[1]), wb); }});
  }
  {
    const nn::Shape xs = random_shape(rng);
    const DTensor w = random_tensor(xs, rng);
    cases.push_back({"relu", {param("x", away_from_zero(xs, rng))},
                     [w](DGraph&, V& v) { return weighted_sum(nn::ops::relu(v[0]), w); }});
    cases.push_back({"sigmoid", {param("x", random_tensor(xs, rng, -3, 3))},
                     [w](DGraph&, V& v) { return weighted_sum(nn::ops::sigmoid(v[0]), w); }});
    const double s = rng.uniform(-2, 2);
    cases.push_back({"scale", {param("x", random_tensor(xs, rng))},
                     [w, s](DGraph&, V& v) { return weighted_sum(nn::ops::scale(v[0], s), w); }});
    cases.push_back({"add", {param("a", random_tensor(xs, rng)), param("b", random_tensor(xs, rng))},
                     [w](DGraph&, V& v) { return weighted_sum(nn::ops::add(v[0], v[1]), w); }});
    cases.push_back({"sum", {param("x", random_tensor(xs, rng))},
                     [](DGraph&, V& v) { return nn::ops::sum(v[0]); }});
    const DTensor wg = random_tensor({xs.n, xs.c, 1, 1}, rng);
    cases.push_back({"global_avg_pool", {param("x", random_tensor(xs, rng))},
                     [wg](DGraph&, V& v) { return weighted_sum(nn::ops::global_avg_pool(v[0]), wg); }});
  }
  {
    const int n = draw(rng, 2, 4), e = draw(rng, 2, 5);
    const DTensor w = random_tensor({n, e, 1, 1}, rng);
    cases.push_back({"l2_normalize_rows", {param("x", away_from_zero({n, e, 1, 1}, rng, 0.2))},
                     [w](DGraph&, V& v) { return weighted_sum(nn::ops::l2_normalize_rows(v[0]), w); }});
    const int k = draw(rng, 3, 6);
    const bool exclude = rng.bernoulli(0.5);
    std::vector<int> targets, excluded;
    for (int i = 0; i < n; ++i) {
      targets.push_back(static_cast<int>(rng.below(k)));
      excluded.push_back(exclude ? (targets.back() + 1) % k : -1);
    }
    cases.push_back({"softmax_cross_entropy", {param("logits", random_tensor({n, k, 1, 1}, rng, -3, 3))},
                     [targets, excluded](DGraph&, V& v) {
                       return nn::ops::softmax_cross_entropy(v[0], targets, excluded);
                     }});
  }
  {
    const nn::Shape is = random_shape(rng);
    cases.push_back({"mse_image_sum",
                     {param("pred", random_tensor(is, rng, 0, 1)), param("target", random_tensor(is, rng, 0, 1))},
                     [](DGraph&, V& v) { return nn::ops::mse_image_sum(v[0], v[1]); }});
    DTensor labels(is);
    for (double& y : labels.data) y = rng.bernoulli(0.5) ? 1.0 : 0.0;
    cases.push_back({"bce_with_logits", {param("logits", random_tensor(is, rng, -4, 4))},
                     [labels](DGraph& g, V& v) { return nn::ops::bce_with_logits(v[0], g.input(labels)); }});
  }
  {
    const int n = draw(rng, 2, 4), e = draw(rng, 3, 6);
    const nn::Shape img{n, 1, 4, 4};
    const DTensor target = random_tensor(img, rng, 0, 1);
    const bool symmetric = rng.bernoulli(0.5);
    cases.push_back({"info_nce+mse",
                     {param("z", random_tensor({n, e, 1, 1}, rng)), param("z_t", random_tensor({n, e, 1, 1}, rng)),
                      param("restored", random_tensor(img, rng, 0, 1))},
                     [target, symmetric](DGraph& g, V& v) {
                       const DVar con = loss::info_nce(v[0], v[1], 0.1, symmetric);
                       const DVar gen = loss::mse_restoration(v[2], g.input(target));
                       return loss::tower_loss(con, gen, 1.0);
                     }});
  }
  return cases;
}

}  // namespace tower::testing
