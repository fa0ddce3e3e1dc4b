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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tower/graph.hpp"

namespace tower::nn {

// Miniature U-Net. Level l of the encoder has base_channels << l channels;
// the bottleneck has base_channels << depth, which is also the width D of
// the pooled representation.
struct ModelConfig {
  int in_channels = 1;
  int out_channels = 1;
  int base_channels = 16;
  int depth = 2;
  int embed_dim = 32;

  int representation_dim() const { return base_channels << depth; }
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Parameter names start with the owning module: "enc.", "head." or "dec.".
// Downstream task layers added during fine-tuning use "task.".
enum class Part { kEncoder, kHead, kDecoder, kTask };
Part owner_of(const std::string& param_name);

template <typename T>
struct BasicModelState {
  ModelConfig config;
  std::vector<BasicParameter<T>> params;
  std::int64_t step = 0;

  // He-uniform weights, zero biases.
  static BasicModelState init(const ModelConfig& config, std::uint64_t seed);

  int index_of(const std::string& name) const;
  BasicParameter<T>& get(const std::string& name) { return params[index_of(name)]; }
  const BasicParameter<T>& get(const std::string& name) const { return params[index_of(name)]; }
  void zero_grad();
  std::size_t parameter_count() const;
  // Re-draws every parameter of `part` and clears its optimizer moments.
  void reinitialize(Part part, std::uint64_t seed);
};

using ModelState = BasicModelState<float>;

// Parameters of a model bound into one graph on first use. Parts listed
// as frozen enter the graph as constants and receive no gradient.
template <typename T>
class BoundModel {
 public:
  BoundModel(BasicGraph<T>& graph, BasicModelState<T>& state, std::vector<Part> frozen = {});

  BasicVar<T> operator()(const std::string& name);
  BasicGraph<T>& graph() { return *graph_; }
  const ModelConfig& config() const { return state_->config; }

 private:
  BasicGraph<T>* graph_;
  BasicModelState<T>* state_;
  std::vector<Part> frozen_;
  std::vector<BasicVar<T>> vars_;
};

template <typename T>
struct EncoderOutput {
  BasicVar<T> representation;  // N x D
  BasicVar<T> bottleneck;      // N x D x H/2^depth x W/2^depth
  std::vector<BasicVar<T>> skips;
  Shape input_shape;
};

// Throws ConfigError when H or W is not divisible by 2^depth.
template <typename T>
EncoderOutput<T> forward_encoder(BoundModel<T>& model, BasicVar<T> x);

// Two-layer MLP, D -> D -> E, unnormalized.
template <typename T>
BasicVar<T> forward_head(BoundModel<T>& model, BasicVar<T> representation);

// Pre-activation output, N x out_channels x H x W. Throws UsageError when
// the skip cache does not match the configured depth.
template <typename T>
BasicVar<T> forward_decoder_logits(BoundModel<T>& model, const EncoderOutput<T>& enc);

// Sigmoid of the logits; lands in [0, 1].
template <typename T>
BasicVar<T> forward_decoder(BoundModel<T>& model, const EncoderOutput<T>& enc);

// Checkpoint file (all integers and floats little-endian):
//   "TOWERCKP"                       8 bytes
//   u32 version (=1)
//   i32 in_channels, out_channels, base_channels, depth, embed_dim
//   i64 optimizer step
//   u32 parameter count P
//   P x { u32 name length, name bytes, i32 n, c, h, w }
//   P x { f32 value[size], f32 adam_m[size], f32 adam_v[size] }
void save_checkpoint(const ModelState& state, const std::filesystem::path& path);
ModelState load_checkpoint(const std::filesystem::path& path);
std::string serialize_checkpoint(const ModelState& state);
ModelState parse_checkpoint(const std::string& bytes);

}  // namespace tower::nn
