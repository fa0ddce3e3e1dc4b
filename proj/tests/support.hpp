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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <unistd.h>
#include <string>
#include <vector>

#include "tower/graph.hpp"
#include "tower/rng.hpp"

namespace tower::testing {

using DGraph = nn::BasicGraph<double>;
using DVar = nn::BasicVar<double>;
using DTensor = nn::BasicTensor<double>;
using DParam = nn::BasicParameter<double>;

inline DTensor random_tensor(nn::Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  DTensor t(s);
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

// sum_i x_i * w_i, so every output element gets a distinct upstream weight.
inline DVar weighted_sum(DVar x, const DTensor& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += x.value()[i] * w[i];
  auto backward = [w](DGraph& g, int self) {
    const int xi = g.parent(self, 0);
    if (!g.requires_grad(xi)) return;
    const double gs = g.grad_of(self)[0];
    auto& gx = g.grad_of(xi);
    for (std::size_t i = 0; i < w.size(); ++i) gx[i] += gs * w[i];
  };
  return x.graph->record("weighted_sum", DTensor({1, 1, 1, 1}, s), {x}, backward);
}

struct FdReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

// Relative error |a - n| / max(|a|, |n|, kFloor).
constexpr double kFdFloor = 1e-6;

// Compares reverse-mode gradients of a scalar builder against central
// differences with step h for every element of every parameter.
inline FdReport fd_check(std::vector<DParam>& params,
                         const std::function<DVar(DGraph&, std::vector<DVar>&)>& build,
                         double h = 1e-3) {
  auto evaluate = [&]() {
    DGraph g;
    std::vector<DVar> vars;
    for (auto& p : params) vars.push_back(g.input(p.value));
    return build(g, vars).value()[0];
  };
  for (auto& p : params) p.zero_grad();
  {
    DGraph g;
    std::vector<DVar> vars;
    for (auto& p : params) vars.push_back(g.param(p));
    g.backward(build(g, vars));
  }
  FdReport r;
  for (auto& p : params) {
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double orig = p.value[i];
      p.value[i] = orig + h;
      const double fp = evaluate();
      p.value[i] = orig - h;
      const double fm = evaluate();
      p.value[i] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double analytic = p.grad[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), kFdFloor});
      r.max_rel_error = std::max(r.max_rel_error, std::abs(analytic - numeric) / denom);
      ++r.checked;
    }
  }
  return r;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("tower_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace tower::testing
