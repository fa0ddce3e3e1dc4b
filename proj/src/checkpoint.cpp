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

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "tower/error.hpp"
#include "tower/model.hpp"

namespace tower::nn {
namespace {

constexpr char kMagic[8] = {'T', 'O', 'W', 'E', 'R', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void u32(std::uint32_t v) { le(v); }
  void i32(std::int32_t v) { le(static_cast<std::uint32_t>(v)); }
  void i64(std::int64_t v) { le(static_cast<std::uint64_t>(v)); }
  void f32(float v) { le(std::bit_cast<std::uint32_t>(v)); }
  void bytes(const char* p, std::size_t n) { out_.append(p, n); }
  std::string take() { return std::move(out_); }

 private:
  template <typename U>
  void le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}
  std::uint32_t u32() { return le<std::uint32_t>(); }
  std::int32_t i32() { return static_cast<std::int32_t>(le<std::uint32_t>()); }
  std::int64_t i64() { return static_cast<std::int64_t>(le<std::uint64_t>()); }
  float f32() { return std::bit_cast<float>(le<std::uint32_t>()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw FormatError("checkpoint is truncated");
  }
  template <typename U>
  U le() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return v;
  }
  const std::string& in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const ModelState& state) {
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.u32(kVersion);
  const ModelConfig& c = state.config;
  w.i32(c.in_channels);
  w.i32(c.out_channels);
  w.i32(c.base_channels);
  w.i32(c.depth);
  w.i32(c.embed_dim);
  w.i64(state.step);
  w.u32(static_cast<std::uint32_t>(state.params.size()));
  for (const Parameter& p : state.params) {
    w.u32(static_cast<std::uint32_t>(p.name.size()));
    w.bytes(p.name.data(), p.name.size());
    w.i32(p.value.shape.n);
    w.i32(p.value.shape.c);
    w.i32(p.value.shape.h);
    w.i32(p.value.shape.w);
  }
  for (const Parameter& p : state.params) {
    const std::size_t n = p.value.size();
    for (float v : p.value.data) w.f32(v);
    for (std::size_t i = 0; i < n; ++i) w.f32(p.adam_m.size() == n ? p.adam_m[i] : 0.0f);
    for (std::size_t i = 0; i < n; ++i) w.f32(p.adam_v.size() == n ? p.adam_v[i] : 0.0f);
  }
  return w.take();
}

ModelState parse_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.bytes(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw FormatError("not a checkpoint file (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  ModelState s;
  s.config.in_channels = r.i32();
  s.config.out_channels = r.i32();
  s.config.base_channels = r.i32();
  s.config.depth = r.i32();
  s.config.embed_dim = r.i32();
  s.step = r.i64();
  const std::uint32_t count = r.u32();
  // The manifest must agree with what the stored config would build.
  ModelState expected = ModelState::init(s.config, 0);
  if (count != expected.params.size()) throw FormatError("checkpoint parameter count mismatch");
  s.params.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Parameter& p = s.params[i];
    p.name = r.bytes(r.u32());
    Shape shape;
    shape.n = r.i32();
    shape.c = r.i32();
    shape.h = r.i32();
    shape.w = r.i32();
    if (p.name != expected.params[i].name || shape != expected.params[i].value.shape) {
      throw FormatError("checkpoint manifest entry '" + p.name + "' does not match the model");
    }
    p.value = Tensor(shape);
  }
  for (Parameter& p : s.params) {
    for (float& v : p.value.data) v = r.f32();
    p.adam_m = Tensor(p.value.shape);
    p.adam_v = Tensor(p.value.shape);
    for (float& v : p.adam_m.data) v = r.f32();
    for (float& v : p.adam_v.data) v = r.f32();
  }
  if (!r.at_end()) throw FormatError("trailing bytes after checkpoint data");
  return s;
}

void save_checkpoint(const ModelState& state, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open checkpoint for writing: " + path.string());
  const std::string bytes = serialize_checkpoint(state);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing checkpoint: " + path.string());
}

ModelState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace tower::nn
