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

#include "tower/model.hpp"

#include <algorithm>
#include <cmath>

#include "tower/error.hpp"
#include "tower/rng.hpp"

namespace tower::nn {
namespace {

std::string level(const char* prefix, int l, const char* suffix) {
  return std::string(prefix) + std::to_string(l) + suffix;
}

template <typename T>
void he_uniform(BasicParameter<T>& p, std::uint64_t seed) {
  const Shape s = p.value.shape;
  const bool is_bias = p.name.size() >= 2 && p.name.compare(p.name.size() - 2, 2, ".b") == 0;
  p.adam_m = BasicTensor<T>(s);
  p.adam_v = BasicTensor<T>(s);
  p.grad = BasicTensor<T>();
  p.has_grad = false;
  if (is_bias) {
    p.value.fill(T(0));
    return;
  }
  const double fan_in = static_cast<double>(s.c) * s.h * s.w;
  const double bound = std::sqrt(6.0 / fan_in);
  Rng rng(seed);
  for (T& v : p.value.data) v = static_cast<T>(rng.uniform(-bound, bound));
}

template <typename T>
std::vector<BasicParameter<T>> make_parameters(const ModelConfig& cfg) {
  std::vector<BasicParameter<T>> ps;
  auto add = [&ps](std::string name, Shape s) { ps.emplace_back(std::move(name), BasicTensor<T>(s)); };
  const int d = cfg.representation_dim();
  auto ch = [&cfg](int l) { return cfg.base_channels << l; };
  for (int l = 0; l < cfg.depth; ++l) {
    const int cin = l == 0 ? cfg.in_channels : ch(l - 1);
    add(level("enc.l", l, ".w"), {ch(l), cin, 3, 3});
    add(level("enc.l", l, ".b"), {1, ch(l), 1, 1});
  }
  const int last = cfg.depth == 0 ? cfg.in_channels : ch(cfg.depth - 1);
  add("enc.mid0.w", {d, last, 3, 3});
  add("enc.mid0.b", {1, d, 1, 1});
  add("enc.mid1.w", {d, d, 3, 3});
  add("enc.mid1.b", {1, d, 1, 1});
  add("head.fc0.w", {d, d, 1, 1});
  add("head.fc0.b", {1, d, 1, 1});
  add("head.fc1.w", {cfg.embed_dim, d, 1, 1});
  add("head.fc1.b", {1, cfg.embed_dim, 1, 1});
  for (int l = cfg.depth - 1; l >= 0; --l) {
    add(level("dec.l", l, ".w"), {ch(l), ch(l + 1) + ch(l), 3, 3});
    add(level("dec.l", l, ".b"), {1, ch(l), 1, 1});
  }
  const int top = cfg.depth == 0 ? d : ch(0);
  add("dec.out.w", {cfg.out_channels, top, 1, 1});
  add("dec.out.b", {1, cfg.out_channels, 1, 1});
  return ps;
}

}  // namespace

Part owner_of(const std::string& name) {
  if (name.rfind("enc.", 0) == 0) return Part::kEncoder;
  if (name.rfind("head.", 0) == 0) return Part::kHead;
  if (name.rfind("dec.", 0) == 0) return Part::kDecoder;
  if (name.rfind("task.", 0) == 0) return Part::kTask;
  throw UsageError("parameter '" + name + "' has no owning module");
}

template <typename T>
BasicModelState<T> BasicModelState<T>::init(const ModelConfig& config, std::uint64_t seed) {
  if (config.in_channels < 1 || config.out_channels < 1 || config.base_channels < 1 ||
      config.depth < 0 || config.embed_dim < 1) {
    throw ConfigError("model dimensions must be positive");
  }
  BasicModelState s;
  s.config = config;
  s.params = make_parameters<T>(config);
  for (std::size_t i = 0; i < s.params.size(); ++i) he_uniform(s.params[i], derive_seed(seed, i));
  return s;
}

template <typename T>
int BasicModelState<T>::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name == name) return static_cast<int>(i);
  }
  throw UsageError("no parameter named '" + name + "'");
}

template <typename T>
void BasicModelState<T>::zero_grad() {
  for (auto& p : params) p.zero_grad();
}

template <typename T>
std::size_t BasicModelState<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.value.size();
  return n;
}

template <typename T>
void BasicModelState<T>::reinitialize(Part part, std::uint64_t seed) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (owner_of(params[i].name) == part) he_uniform(params[i], derive_seed(seed, i));
  }
}

template <typename T>
BoundModel<T>::BoundModel(BasicGraph<T>& graph, BasicModelState<T>& state, std::vector<Part> frozen)
    : graph_(&graph), state_(&state), frozen_(std::move(frozen)), vars_(state.params.size()) {}

template <typename T>
BasicVar<T> BoundModel<T>::operator()(const std::string& name) {
  const int i = state_->index_of(name);
  if (!vars_[i].valid()) {
    auto& p = state_->params[i];
    const bool frozen = std::find(frozen_.begin(), frozen_.end(), owner_of(name)) != frozen_.end();
    vars_[i] = frozen ? graph_->input(p.value) : graph_->param(p);
  }
  return vars_[i];
}

template <typename T>
EncoderOutput<T> forward_encoder(BoundModel<T>& m, BasicVar<T> x) {
  const ModelConfig& cfg = m.config();
  const Shape xs = x.shape();
  const int factor = 1 << cfg.depth;
  if (xs.h % factor != 0 || xs.w % factor != 0) {
    throw ConfigError("input " + std::to_string(xs.h) + "x" + std::to_string(xs.w) +
                      " is not divisible by 2^depth = " + std::to_string(factor));
  }
  if (xs.c != cfg.in_channels) {
    throw DataError("encoder expects " + std::to_string(cfg.in_channels) + " channels, got " +
                    std::to_string(xs.c));
  }
  EncoderOutput<T> out;
  out.input_shape = xs;
  BasicVar<T> h = x;
  for (int l = 0; l < cfg.depth; ++l) {
    h = ops::relu(ops::conv2d(h, m(level("enc.l", l, ".w")), m(level("enc.l", l, ".b")), 1));
    out.skips.push_back(h);
    h = ops::max_pool2(h);
  }
  h = ops::relu(ops::conv2d(h, m("enc.mid0.w"), m("enc.mid0.b"), 1));
  h = ops::relu(ops::conv2d(h, m("enc.mid1.w"), m("enc.mid1.b"), 1));
  out.bottleneck = h;
  out.representation = ops::global_avg_pool(h);
  return out;
}

template <typename T>
BasicVar<T> forward_head(BoundModel<T>& m, BasicVar<T> r) {
  BasicVar<T> h = ops::relu(ops::dense(r, m("head.fc0.w"), m("head.fc0.b")));
  return ops::dense(h, m("head.fc1.w"), m("head.fc1.b"));
}

template <typename T>
BasicVar<T> forward_decoder_logits(BoundModel<T>& m, const EncoderOutput<T>& enc) {
  const ModelConfig& cfg = m.config();
  if (!enc.bottleneck.valid() || static_cast<int>(enc.skips.size()) != cfg.depth) {
    throw UsageError("decoder needs the skip activations of a matching encoder call");
  }
  BasicVar<T> h = enc.bottleneck;
  for (int l = cfg.depth - 1; l >= 0; --l) {
    h = ops::upsample2(h);
    h = ops::concat_channels(h, enc.skips[l]);
    h = ops::relu(ops::conv2d(h, m(level("dec.l", l, ".w")), m(level("dec.l", l, ".b")), 1));
  }
  return ops::conv2d(h, m("dec.out.w"), m("dec.out.b"), 0);
}

template <typename T>
BasicVar<T> forward_decoder(BoundModel<T>& m, const EncoderOutput<T>& enc) {
  return ops::sigmoid(forward_decoder_logits(m, enc));
}

#define TOWER_INSTANTIATE_MODEL(T)                                                        \
  template struct BasicModelState<T>;                                                     \
  template class BoundModel<T>;                                                           \
  template EncoderOutput<T> forward_encoder(BoundModel<T>&, BasicVar<T>);                 \
  template BasicVar<T> forward_head(BoundModel<T>&, BasicVar<T>);                         \
  template BasicVar<T> forward_decoder_logits(BoundModel<T>&, const EncoderOutput<T>&);   \
  template BasicVar<T> forward_decoder(BoundModel<T>&, const EncoderOutput<T>&);

TOWER_INSTANTIATE_MODEL(float)
TOWER_INSTANTIATE_MODEL(double)
#undef TOWER_INSTANTIATE_MODEL

}  // namespace tower::nn
