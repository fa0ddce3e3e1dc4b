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

#include <fstream>

#include "support.hpp"
#include "tower/error.hpp"
#include "tower/model.hpp"

using namespace tower;
using namespace tower::nn;
using namespace tower::testing;

namespace {

Tensor random_batch(Shape s, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(s);
  for (float& v : t.data) v = static_cast<float>(rng.uniform());
  return t;
}

struct Outputs {
  Tensor representation, embedding, restored;
};

Outputs run(ModelState& state, const Tensor& x) {
  Graph g;
  BoundModel<float> model(g, state);
  auto enc = forward_encoder(model, g.input(x));
  const Var z = forward_head(model, enc.representation);
  const Var y = forward_decoder(model, enc);
  return {enc.representation.value(), z.value(), y.value()};
}

}  // namespace

TEST_CASE("output shapes") {
  ModelState s = ModelState::init(ModelConfig{}, 1);
  const Outputs o = run(s, random_batch({8, 1, 32, 32}, 2));
  CHECK(o.representation.shape == Shape{8, 64, 1, 1});
  CHECK(o.embedding.shape == Shape{8, 32, 1, 1});
  CHECK(o.restored.shape == Shape{8, 1, 32, 32});
  for (float v : o.restored.data) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }

  ModelConfig rgb;
  rgb.in_channels = 3;
  rgb.out_channels = 3;
  ModelState s3 = ModelState::init(rgb, 1);
  const Outputs o3 = run(s3, random_batch({2, 3, 16, 24}, 3));
  CHECK(o3.restored.shape == Shape{2, 3, 16, 24});
}

TEST_CASE("parameter count of the default model") {
  // Encoder 1-16, 16-32, 32-64, 64-64 (3x3); head 64-64-32; decoder
  // 96-32, 48-16 (3x3) and a 1x1 16-1 output.
  const std::size_t enc = (16 * 1 * 9 + 16) + (32 * 16 * 9 + 32) + (64 * 32 * 9 + 64) +
                          (64 * 64 * 9 + 64);
  const std::size_t head = (64 * 64 + 64) + (32 * 64 + 32);
  const std::size_t dec = (32 * 96 * 9 + 32) + (16 * 48 * 9 + 16) + (1 * 16 + 1);
  CHECK(enc + head + dec == 101089);
  ModelState s = ModelState::init(ModelConfig{}, 0);
  CHECK(s.parameter_count() == enc + head + dec);
  std::size_t by_part[3] = {0, 0, 0};
  for (const auto& p : s.params) by_part[static_cast<int>(owner_of(p.name))] += p.value.size();
  CHECK(by_part[0] == enc);
  CHECK(by_part[1] == head);
  CHECK(by_part[2] == dec);
}

TEST_CASE("zero input yields a zero representation") {
  ModelState s = ModelState::init(ModelConfig{}, 5);
  const Outputs o = run(s, Tensor({3, 1, 16, 16}));
  for (float v : o.representation.data) CHECK(v == 0.0f);
}

TEST_CASE("zero decoder weights give 0.5 everywhere") {
  ModelState s = ModelState::init(ModelConfig{}, 6);
  for (auto& p : s.params) {
    if (owner_of(p.name) == Part::kDecoder) p.value.fill(0.0f);
  }
  const Outputs o = run(s, random_batch({2, 1, 16, 16}, 7));
  for (float v : o.restored.data) CHECK(v == 0.5f);
}

TEST_CASE("init and forward are deterministic") {
  ModelState a = ModelState::init(ModelConfig{}, 9);
  ModelState b = ModelState::init(ModelConfig{}, 9);
  ModelState c = ModelState::init(ModelConfig{}, 10);
  CHECK(serialize_checkpoint(a) == serialize_checkpoint(b));
  CHECK(serialize_checkpoint(a) != serialize_checkpoint(c));
  const Tensor x = random_batch({4, 1, 16, 16}, 11);
  const Outputs oa = run(a, x), ob = run(b, x);
  CHECK(oa.embedding.data == ob.embedding.data);
  CHECK(oa.restored.data == ob.restored.data);
}

TEST_CASE("input size must be divisible by 2^depth") {
  ModelState s = ModelState::init(ModelConfig{}, 1);
  CHECK_THROWS_AS(run(s, random_batch({1, 1, 18, 16}, 1)), ConfigError);
}

TEST_CASE("unknown parameter names are reported") {
  ModelState s = ModelState::init(ModelConfig{}, 1);
  CHECK_THROWS(s.get("enc.nope"));
  CHECK(owner_of("task.w") == Part::kTask);
  CHECK(owner_of("head.fc1.w") == Part::kHead);
}

TEST_CASE("frozen parts receive no gradient") {
  ModelState s = ModelState::init(ModelConfig{}, 3);
  s.zero_grad();
  for (auto& p : s.params) p.has_grad = false;
  Graph g;
  BoundModel<float> model(g, s, {Part::kEncoder});
  auto enc = forward_encoder(model, g.input(random_batch({2, 1, 16, 16}, 4)));
  g.backward(ops::sum(forward_decoder(model, enc)));
  for (const auto& p : s.params) {
    if (owner_of(p.name) == Part::kEncoder) CHECK_FALSE(p.has_grad);
    if (owner_of(p.name) == Part::kDecoder) CHECK(p.has_grad);
  }
}

TEST_CASE("checkpoint round trip is bit-identical") {
  TempDir dir("model");
  ModelState s = ModelState::init(ModelConfig{}, 21);
  s.step = 17;
  Rng rng(3);
  for (auto& p : s.params) {
    p.adam_m = Tensor(p.value.shape);
    p.adam_v = Tensor(p.value.shape);
    for (float& v : p.adam_m.data) v = static_cast<float>(rng.uniform(-1, 1));
    for (float& v : p.adam_v.data) v = static_cast<float>(rng.uniform());
  }
  save_checkpoint(s, dir / "a.ckpt");
  const ModelState r = load_checkpoint(dir / "a.ckpt");
  CHECK(r.config == s.config);
  CHECK(r.step == 17);
  REQUIRE(r.params.size() == s.params.size());
  for (std::size_t i = 0; i < s.params.size(); ++i) {
    CHECK(r.params[i].name == s.params[i].name);
    CHECK(r.params[i].value.data == s.params[i].value.data);
    CHECK(r.params[i].adam_m.data == s.params[i].adam_m.data);
    CHECK(r.params[i].adam_v.data == s.params[i].adam_v.data);
  }
  save_checkpoint(r, dir / "b.ckpt");
  std::ifstream fa(dir / "a.ckpt", std::ios::binary), fb(dir / "b.ckpt", std::ios::binary);
  const std::string ba((std::istreambuf_iterator<char>(fa)), {});
  const std::string bb((std::istreambuf_iterator<char>(fb)), {});
  CHECK(ba == bb);
  CHECK(ba.substr(0, 8) == "TOWERCKP");
}

TEST_CASE("malformed checkpoints raise FormatError") {
  const std::string good = serialize_checkpoint(ModelState::init(ModelConfig{}, 1));
  CHECK_THROWS_AS(parse_checkpoint(""), FormatError);
  std::string bad_magic = good;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(parse_checkpoint(bad_magic), FormatError);
  std::string bad_version = good;
  bad_version[8] = 9;
  CHECK_THROWS_AS(parse_checkpoint(bad_version), FormatError);
  CHECK_THROWS_AS(parse_checkpoint(good.substr(0, good.size() - 1)), FormatError);
  CHECK_THROWS_AS(parse_checkpoint(good.substr(0, 40)), FormatError);
  CHECK_THROWS_AS(parse_checkpoint(good + "x"), FormatError);
  CHECK_THROWS(load_checkpoint("/nonexistent/dir/x.ckpt"));
}
