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
#include "tower/config.hpp"
#include "tower/error.hpp"

using namespace tower;
using namespace tower::testing;

TEST_CASE("defaults validate") {
  RunConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.train.tau == 0.1);
  CHECK(cfg.train.patience == 30);
  CHECK(cfg.train.batch_size == 32);
  CHECK(cfg.train.lr_init == 1e-3);
  CHECK(cfg.train.arm() == Arm::kTower);
}

TEST_CASE("unknown keys and bad values are rejected") {
  RunConfig cfg;
  CHECK_THROWS_AS(cfg.set("no_such_key", "1"), ConfigError);
  CHECK_THROWS_AS(cfg.set("batch_size", "many"), ConfigError);
  CHECK_THROWS_AS(cfg.set("batch_size", "3.5"), ConfigError);
  CHECK_THROWS_AS(cfg.set("symmetric_nce", "maybe"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("batch_size 4\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("preset = huge\n"), ConfigError);
  try {
    cfg.set("tau", "abc");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("tau") != std::string::npos);
  }
}

TEST_CASE("validation names the offending key") {
  RunConfig cfg;
  cfg.train.mode = "random";
  CHECK_THROWS_AS(cfg.train.validate(), ConfigError);
  cfg.train.mode = "tower";
  cfg.train.batch_size = 1;
  CHECK_THROWS_AS(cfg.train.validate(), ConfigError);
  cfg.train.mode = "gen_nl";
  CHECK_NOTHROW(cfg.train.validate());
  cfg = RunConfig{};
  cfg.train.mask_ratio = 1.5;
  try {
    cfg.train.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("mask_ratio") != std::string::npos);
  }
  cfg = RunConfig{};
  cfg.finetune.label_fraction = 0.0;
  CHECK_THROWS_AS(cfg.finetune.validate(), ConfigError);
  cfg = RunConfig{};
  cfg.data.data_kind = "png";
  CHECK_THROWS_AS(cfg.data.validate(), ConfigError);
}

TEST_CASE("text round trip") {
  RunConfig cfg;
  cfg.set("batch_size", "16");
  cfg.set("mode", "gen_nlm");
  cfg.set("lambda", "0.25");
  cfg.set("symmetric_nce", "yes");
  cfg.set("synth_seed", "18446744073709551615");
  const RunConfig back = RunConfig::parse(cfg.to_text());
  CHECK(back.to_text() == cfg.to_text());
  CHECK(back.train.batch_size == 16);
  CHECK(back.train.lambda == 0.25);
  CHECK(back.train.symmetric_nce);
  CHECK(back.data.synth_seed == 18446744073709551615ull);
  for (const auto& k : RunConfig::keys()) CHECK(back.get(k) == cfg.get(k));
}

TEST_CASE("presets apply before explicit keys") {
  const RunConfig a = RunConfig::parse("batch_size = 8\npreset = classification\n");
  CHECK(a.preset == "classification");
  CHECK(a.train.batch_size == 8);
  CHECK(a.finetune.ft_epochs == 100);
  CHECK(a.finetune.ft_lr == 2e-4);

  const RunConfig s = RunConfig::parse("preset = segmentation  # paper protocol\n");
  CHECK(s.train.lr_init == 1e-2);
  CHECK(s.finetune.ft_epochs == 200);
  CHECK(s.finetune.task == "segment");

  const RunConfig d = RunConfig::parse("# only a comment\n\n");
  CHECK(d.preset == "desk");
  CHECK(d.finetune.ft_epochs == 30);
}

TEST_CASE("config files") {
  TempDir dir("cfg");
  std::ofstream(dir / "a.cfg") << "mode = con_nlm\nepochs = 3\n";
  const RunConfig cfg = RunConfig::load((dir / "a.cfg").string());
  CHECK(cfg.train.arm() == Arm::kConNlM);
  CHECK(cfg.train.epochs == 3);
  CHECK_THROWS_AS(RunConfig::load((dir / "absent.cfg").string()), ConfigError);
}

TEST_CASE("arm names and proxy modes") {
  for (Arm a : {Arm::kRandom, Arm::kGenNl, Arm::kGenM, Arm::kGenNlM, Arm::kConNlM, Arm::kTower,
                Arm::kConClassic}) {
    CHECK(parse_arm(to_string(a)) == a);
  }
  CHECK(parse_arm("tower_nl") == Arm::kGenNl);
  CHECK(parse_arm("tower_m") == Arm::kGenM);
  CHECK(parse_arm("tower_nl+m") == Arm::kTower);
  CHECK_THROWS_AS(parse_arm("simclr"), ConfigError);
  CHECK(uses_contrastive(Arm::kTower));
  CHECK(uses_generative(Arm::kTower));
  CHECK_FALSE(uses_contrastive(Arm::kGenNlM));
  CHECK_FALSE(uses_generative(Arm::kConNlM));
  CHECK(proxy_mode(Arm::kGenNl) == augment::ProxyMode::kTowerNl);
  CHECK(proxy_mode(Arm::kGenM) == augment::ProxyMode::kTowerM);
  CHECK(proxy_mode(Arm::kTower) == augment::ProxyMode::kTowerNlM);
}

TEST_CASE("automatic mask choice follows the modality") {
  TrainConfig cfg;
  CHECK(cfg.augment_config(512, 512, data::Modality::kFundoscopic).mask.kind == transform::MaskKind::kRays);
  CHECK(cfg.augment_config(64, 64, data::Modality::kXray).mask.kind == transform::MaskKind::kStripe);
  CHECK(cfg.augment_config(64, 64, data::Modality::kCt).mask.kind == transform::MaskKind::kBlock);
  CHECK(cfg.augment_config(512, 512, data::Modality::kSynthetic).mask.num_rays == 80);
  cfg.mask_kind = "block";
  CHECK(cfg.augment_config(64, 64, data::Modality::kFundoscopic).mask.kind == transform::MaskKind::kBlock);
}
