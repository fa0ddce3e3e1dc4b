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

#include <cmath>
#include <fstream>
#include <sstream>

#include "support.hpp"
#include "tower/data.hpp"
#include "tower/error.hpp"
#include "tower/eval.hpp"
#include "tower/trainer.hpp"

using namespace tower;
using namespace tower::testing;

namespace {

nn::ModelState small_model(std::uint64_t seed) {
  nn::ModelConfig mc;
  mc.base_channels = 4;
  mc.embed_dim = 8;
  return nn::ModelState::init(mc, seed);
}

FinetuneConfig small_ft() {
  FinetuneConfig cfg;
  cfg.ft_epochs = 15;
  cfg.ft_lr = 3e-3;
  cfg.ft_patience = 15;
  cfg.ft_batch_size = 8;
  cfg.trials = 2;
  return cfg;
}

// Class 1 images are bright, class 0 images are dark; both textured.
data::Dataset separable(int n, std::uint64_t seed) {
  Rng rng(seed);
  data::Dataset ds;
  for (int i = 0; i < n; ++i) {
    const int y = i % 2;
    Image img(1, 16, 16);
    for (float& v : img.pixels) v = static_cast<float>((y ? 0.6 : 0.0) + 0.4 * rng.uniform());
    ds.ids.push_back("s" + std::to_string(i));
    ds.images.push_back(img);
    ds.labels.push_back(y);
    ds.splits.push_back(i % 5 == 3 ? data::Split::kVal : i % 5 == 4 ? data::Split::kTest
                                                                    : data::Split::kTrain);
  }
  ds.num_classes = 2;
  return ds;
}

}  // namespace

TEST_CASE("fine-tuning separates a separable dataset") {
  const data::Dataset ds = separable(80, 1);
  const auto r = eval::finetune_classify(small_model(1), ds, 1.0, small_ft());
  CHECK(r.metric == "auc");
  REQUIRE(r.values.size() == 2);
  for (double v : r.values) CHECK(v > 0.99);
  CHECK(r.mean > 0.99);
}

TEST_CASE("fine-tuning is deterministic and leaves the checkpoint alone") {
  const data::Dataset ds = data::gen_synthetic_retina(60, 16, 16, 3);
  const nn::ModelState ckpt = small_model(2);
  const std::string before = nn::serialize_checkpoint(ckpt);
  const auto a = eval::finetune_classify(ckpt, ds, 0.5, small_ft());
  const auto b = eval::finetune_classify(ckpt, ds, 0.5, small_ft());
  CHECK(a.values == b.values);
  CHECK(a.trials[0].train_loss == b.trials[0].train_loss);
  CHECK(nn::serialize_checkpoint(ckpt) == before);

  FinetuneConfig probe = small_ft();
  probe.linear_probe = true;
  const auto p = eval::finetune_classify(ckpt, ds, 1.0, probe);
  CHECK(p.values.size() == 2);
  CHECK(nn::serialize_checkpoint(ckpt) == before);
  for (double v : p.values) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("segmentation fine-tuning") {
  const data::Dataset ds = data::gen_synthetic_retina(40, 16, 16, 4);
  FinetuneConfig cfg = small_ft();
  cfg.task = "segment";
  cfg.ft_epochs = 3;
  const auto r = eval::finetune_segment(small_model(3), ds, cfg);
  CHECK(r.metric == "dice");
  REQUIRE(r.trials.size() == 2);
  for (const auto& t : r.trials) {
    CHECK(t.train_loss.size() == static_cast<std::size_t>(t.epochs_run));
    CHECK(t.metric >= 0.0);
    CHECK(t.metric <= 1.0);
  }

  data::Dataset no_masks = ds;
  no_masks.masks.clear();
  CHECK_THROWS_AS(eval::finetune_segment(small_model(3), no_masks, cfg), DataError);
}

TEST_CASE("epochs_to_target") {
  eval::TrialOutcome t;
  t.train_loss = {1.0, 0.8, 0.5, 0.6, 0.4};
  CHECK(t.epochs_to_target(0.9) == 2);
  CHECK(t.epochs_to_target(0.5) == 3);
  CHECK(t.epochs_to_target(1.0) == 1);
  CHECK_FALSE(t.epochs_to_target(0.1).has_value());
}

TEST_CASE("label-fraction sweep covers the full factorial") {
  const data::Dataset ds = data::gen_synthetic_retina(60, 16, 16, 5);
  FinetuneConfig cfg = small_ft();
  cfg.ft_epochs = 2;
  cfg.trials = 3;
  const std::vector<eval::SweepArm> arms{{"a", small_model(1)}, {"b", small_model(2)}};
  const std::vector<double> fractions{0.25, 0.5, 1.0};
  const auto s = eval::label_fraction_sweep(arms, fractions, ds, cfg);
  CHECK(s.rows.size() == 2 * 3 * 3);
  CHECK(s.cells.size() == 6);
  CHECK(s.cell("b", 0.5).values.size() == 3);
  CHECK(s.cell("a", 1.0).label_fraction == 1.0);
  CHECK_THROWS(s.cell("c", 0.5));

  std::istringstream csv(s.to_csv());
  std::string line;
  std::getline(csv, line);
  CHECK(line == "arm,fraction,trial,metric,value");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 18);

  // A baseline always matches itself at the full fraction at the latest.
  const auto m = s.matching_fraction("a", "a");
  REQUIRE(m.has_value());
  CHECK(*m <= 1.0);

  const std::vector<double> bad{0.0};
  CHECK_THROWS_AS(eval::label_fraction_sweep(arms, bad, ds, cfg), ConfigError);
}

TEST_CASE("empty classes after subsampling are reported") {
  data::Dataset ds = separable(40, 2);
  // Only one class-1 training image.
  int ones = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.splits[i] == data::Split::kTrain && ds.labels[i] == 1 && ones++ > 0) ds.labels[i] = 0;
  }
  const auto train = ds.indices(data::Split::kTrain);
  CHECK_NOTHROW(data::stratified_subsample(ds, train, 0.01, 1));
  ds.labels[train[1]] = 0;
  for (std::size_t i : train) ds.labels[i] = 0;
  CHECK_THROWS_AS(eval::finetune_classify(small_model(1), ds, 0.5, small_ft()), DataError);
}

TEST_CASE("classification requires val and test splits") {
  data::Dataset ds = separable(20, 3);
  for (auto& s : ds.splits) s = data::Split::kTrain;
  CHECK_THROWS_AS(eval::finetune_classify(small_model(1), ds, 1.0, small_ft()), DataError);
}

TEST_CASE("embedding export") {
  const data::Dataset ds = data::gen_synthetic_retina(12, 16, 16, 6);
  const nn::ModelState ckpt = small_model(4);
  const auto reps = eval::encode(ckpt, ds.images, 5);
  CHECK(reps.size() == 12u * 16u);
  const auto again = eval::encode(ckpt, ds.images, 64);
  for (std::size_t i = 0; i < reps.size(); ++i) CHECK(std::abs(reps[i] - again[i]) < 1e-6f);

  TempDir dir("emb");
  eval::export_embeddings(ckpt, ds, dir / "e.csv");
  std::ifstream in(dir / "e.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line.rfind("id,label,r0,", 0) == 0);
  CHECK(std::count(line.begin(), line.end(), ',') == 1 + 16);
  int rows = 0;
  while (std::getline(in, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') == 1 + 16);
    CHECK(line.rfind(ds.ids[rows] + ",", 0) == 0);
    ++rows;
  }
  CHECK(rows == 12);
}
