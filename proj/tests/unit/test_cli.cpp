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
#include <sstream>

#include "support.hpp"
#include "tower/cli.hpp"

using namespace tower;
using namespace tower::testing;

namespace {

struct Run {
  int code = 0;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "tower");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  Run r;
  r.code = cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::vector<std::string> tiny(const TempDir& dir, std::vector<std::string> extra) {
  std::vector<std::string> a = {"--out", dir.path().string(), "--quiet", "--synth_n", "40",
                                "--synth_size", "16", "--epochs", "1", "--base_channels", "4",
                                "--embed_dim", "8", "--batch_size", "8", "--ft_batch_size", "8",
                                "--ft_epochs", "1"};
  a.insert(a.begin(), extra.begin(), extra.end());
  return a;
}

int count_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) ++n;
  return n;
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  TempDir dir("cli_usage");
  const Run none = run({});
  CHECK(none.code == 1);
  const Run unknown = run({"pretrain", "--no-such-flag", "--out", dir.path().string()});
  CHECK(unknown.code == 1);
  CHECK(unknown.err.find("no-such-flag") != std::string::npos);
  const Run bad_value = run({"pretrain", "--batch_size", "lots", "--out", dir.path().string()});
  CHECK(bad_value.code == 1);
  const Run missing = run({"pretrain", "--config", (dir / "absent.cfg").string(), "--out",
                           dir.path().string()});
  CHECK(missing.code == 1);
  CHECK(missing.err.find("absent.cfg") != std::string::npos);
  CHECK(run({"--help"}).code == 0);
  CHECK(run({"export-embeddings", "--out", dir.path().string()}).code == 1);
}

TEST_CASE("runtime failures exit with 2 and leave diagnostics") {
  TempDir dir("cli_fail");
  const Run r = run(tiny(dir, {"export-embeddings", "--ckpt", (dir / "absent.ckpt").string()}));
  CHECK(r.code == 2);
  CHECK(r.err.find("diagnostics:") != std::string::npos);
  CHECK(std::filesystem::exists(dir / "error.log"));
}

TEST_CASE("transform-preview writes triplets") {
  TempDir dir("cli_preview");
  const Run r = run(tiny(dir, {"transform-preview", "--mode", "tower_nl+m", "--n", "8"}));
  REQUIRE(r.code == 0);
  for (int i = 0; i < 8; ++i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "preview_%03d_", i);
    for (const char* kind : {"original", "translated", "masked"}) {
      CHECK(std::filesystem::exists(dir / (std::string(stem) + kind + ".png")));
    }
  }
  CHECK(count_lines(dir / "plans.log") == 8);
  CHECK(std::filesystem::exists(dir / "manifest.txt"));
  CHECK(run(tiny(dir, {"transform-preview", "--n", "400"})).code == 1);
}

TEST_CASE("pretrain, finetune, export and report") {
  TempDir dir("cli_flow");
  std::ofstream(dir / "run.cfg") << "mode = gen_nlm\nseed = 3\n";
  Run r = run(tiny(dir, {"pretrain", "--config", (dir / "run.cfg").string(), "--seed", "4",
                         "--log-plans"}));
  REQUIRE(r.code == 0);
  for (const char* f : {"best.ckpt", "final.ckpt", "metrics.csv", "config.txt", "plans.log"}) {
    CHECK(std::filesystem::exists(dir / f));
  }
  // Flags override the config file.
  std::ifstream cfg(dir / "config.txt");
  const std::string text((std::istreambuf_iterator<char>(cfg)), {});
  CHECK(text.find("mode = gen_nlm") != std::string::npos);
  CHECK(text.find("seed = 4") != std::string::npos);

  const std::string ckpt = (dir / "best.ckpt").string();
  r = run(tiny(dir, {"finetune", "--ckpt", ckpt, "--trials", "2"}));
  REQUIRE(r.code == 0);
  CHECK(count_lines(dir / "finetune.csv") == 3);

  r = run(tiny(dir, {"export-embeddings", "--ckpt", ckpt}));
  REQUIRE(r.code == 0);
  CHECK(count_lines(dir / "embeddings.csv") == 41);

  r = run(tiny(dir, {"report", "--input", (dir / "metrics.csv").string()}));
  REQUIRE(r.code == 0);
  CHECK(std::filesystem::exists(dir / "metrics.svg"));

  std::ifstream manifest(dir / "manifest.txt");
  const std::string m((std::istreambuf_iterator<char>(manifest)), {});
  CHECK(m.find("command = pretrain") != std::string::npos);
  CHECK(m.find("command = finetune") != std::string::npos);
  CHECK(m.find("dataset_hash") != std::string::npos);
}

TEST_CASE("sweep writes the full factorial") {
  TempDir dir("cli_sweep");
  const Run r = run(tiny(dir, {"sweep", "--fractions", "0.1,0.5,1.0", "--trials", "3", "--arms",
                               "tower,random"}));
  REQUIRE(r.code == 0);
  CHECK(count_lines(dir / "sweep.csv") == 1 + 18);
  CHECK(std::filesystem::exists(dir / "pretrain_tower" / "best.ckpt"));
  CHECK(run(tiny(dir, {"report", "--input", (dir / "sweep.csv").string()})).code == 0);
  CHECK(std::filesystem::exists(dir / "sweep.svg"));
}
