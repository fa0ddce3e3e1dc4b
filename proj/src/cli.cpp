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

#include "tower/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "tower/augment.hpp"
#include "tower/config.hpp"
#include "tower/error.hpp"
#include "tower/eval.hpp"
#include "tower/png_io.hpp"
#include "tower/rng.hpp"
#include "tower/svg.hpp"
#include "tower/trainer.hpp"

#ifndef TOWER_VERSION
#define TOWER_VERSION "unknown"
#endif

namespace tower::cli {
namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kPreviewStream = 0x9e;

struct Options {
  std::string config_path;
  std::string out_dir = "run";
  std::map<std::string, std::string> keys;
  std::vector<std::string> ckpts;
  std::string arms = "tower,random";
  std::string fractions = "0.1,0.25,0.5,1.0";
  int preview_n = 8;
  bool log_plans = false;
  bool quiet = false;
  std::vector<std::string> inputs;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}

std::string read_file(const fs::path& path, bool config) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    const std::string msg =
        std::string(config ? "cannot read config file '" : "cannot read file '") + path.string() + "'";
    if (config) throw ConfigError(msg);
    throw DataError(msg);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
}

// Defaults, then preset, then the config file, then flags.
RunConfig resolve_config(const Options& o) {
  RunConfig::Pairs pairs;
  if (!o.config_path.empty()) pairs = RunConfig::parse_pairs(read_file(o.config_path, true));
  for (const auto& key : RunConfig::keys()) {
    auto it = o.keys.find(key);
    if (it != o.keys.end()) pairs.emplace_back(key, it->second);
  }
  RunConfig cfg = RunConfig::from_pairs(pairs);
  cfg.finetune.validate();
  cfg.data.validate();
  return cfg;
}

struct Context {
  const Options& opts;
  std::ostream& out;
  std::ostream& err;
  fs::path dir;
};

void finish(const Context& ctx, const std::string& command, const RunConfig& cfg,
            std::uint64_t dataset_hash, std::vector<std::string> outputs) {
  RunManifest m;
  m.command = command;
  m.version = TOWER_VERSION;
  m.seed = cfg.train.seed;
  m.dataset_hash = dataset_hash;
  m.config = cfg.to_text();
  m.outputs = std::move(outputs);
  append_manifest(ctx.dir, m);
}

nn::ModelState checkpoint_or_init(const Context& ctx, const RunConfig& cfg, int channels) {
  if (ctx.opts.ckpts.empty()) return train::initial_state(cfg.train, channels);
  return nn::load_checkpoint(ctx.opts.ckpts.front());
}

int cmd_pretrain(const Context& ctx) {
  const RunConfig cfg = resolve_config(ctx.opts);
  cfg.train.validate();
  const data::Dataset ds = cfg.data.load();
  train::PretrainOptions po;
  po.output_dir = ctx.dir;
  po.log_plans = ctx.opts.log_plans;
  po.verbose = !ctx.opts.quiet;
  const auto r = train::pretrain(cfg.train, ds, po);
  write_file(ctx.dir / "config.txt", cfg.to_text());
  std::vector<std::string> outputs = {"config.txt", "best.ckpt", "final.ckpt", "metrics.csv"};
  if (po.log_plans) outputs.push_back("plans.log");
  finish(ctx, "pretrain", cfg, data::dataset_hash(ds), outputs);
  ctx.out << "best epoch " << r.metrics.best_epoch << ", val loss " << r.metrics.best_val
          << ", checkpoint " << (ctx.dir / "best.ckpt").string() << '\n';
  return 0;
}

int cmd_finetune(const Context& ctx) {
  const RunConfig cfg = resolve_config(ctx.opts);
  const data::Dataset ds = cfg.data.load();
  const nn::ModelState ckpt = checkpoint_or_init(ctx, cfg, ds.images.at(0).channels);
  const eval::Task task = eval::parse_task(cfg.finetune.task);
  const eval::EvalResult r =
      task == eval::Task::kClassify
          ? eval::finetune_classify(ckpt, ds, cfg.finetune.label_fraction, cfg.finetune)
          : eval::finetune_segment(ckpt, ds, cfg.finetune);
  std::ostringstream csv;
  csv << "trial,metric,value\n";
  for (std::size_t t = 0; t < r.values.size(); ++t) {
    csv << t << ',' << r.metric << ',' << r.values[t] << '\n';
  }
  write_file(ctx.dir / "finetune.csv", csv.str());
  finish(ctx, "finetune", cfg, data::dataset_hash(ds), {"finetune.csv"});
  ctx.out << r.metric << " " << r.mean << " +- " << r.stddev << " over " << r.values.size()
          << " trials\n";
  return 0;
}

int cmd_sweep(const Context& ctx) {
  const RunConfig cfg = resolve_config(ctx.opts);
  const data::Dataset ds = cfg.data.load();
  const int channels = ds.images.at(0).channels;
  std::vector<double> fractions;
  for (const auto& f : split_list(ctx.opts.fractions)) {
    try {
      fractions.push_back(std::stod(f));
    } catch (const std::exception&) {
      throw ConfigError("--fractions: '" + f + "' is not a number");
    }
  }
  std::map<std::string, std::string> given;
  for (const auto& c : ctx.opts.ckpts) {
    const auto eq = c.find('=');
    if (eq == std::string::npos) throw ConfigError("--ckpt for sweep expects arm=path, got '" + c + "'");
    given[c.substr(0, eq)] = c.substr(eq + 1);
  }
  const auto arm_names = split_list(ctx.opts.arms);
  if (arm_names.empty()) throw ConfigError("--arms: no arms given");
  std::vector<std::string> outputs;
  std::vector<eval::SweepArm> arms;
  for (const auto& name : arm_names) {
    eval::SweepArm arm{name, {}};
    if (auto it = given.find(name); it != given.end()) {
      arm.ckpt = nn::load_checkpoint(it->second);
    } else if (parse_arm(name) == Arm::kRandom) {
      arm.ckpt = train::initial_state(cfg.train, channels);
    } else {
      TrainConfig tc = cfg.train;
      tc.mode = name;
      tc.validate();
      train::PretrainOptions po;
      po.output_dir = ctx.dir / ("pretrain_" + name);
      po.verbose = !ctx.opts.quiet;
      arm.ckpt = train::pretrain(tc, ds, po).best;
      outputs.push_back("pretrain_" + name);
    }
    arms.push_back(std::move(arm));
  }
  const auto result = eval::label_fraction_sweep(arms, fractions, ds, cfg.finetune);
  write_file(ctx.dir / "sweep.csv", result.to_csv());
  outputs.insert(outputs.begin(), "sweep.csv");
  finish(ctx, "sweep", cfg, data::dataset_hash(ds), outputs);
  ctx.out << result.rows.size() << " rows written to " << (ctx.dir / "sweep.csv").string() << '\n';
  const bool has_random = std::count(arm_names.begin(), arm_names.end(), "random") > 0;
  const bool has_full = std::count(fractions.begin(), fractions.end(), 1.0) > 0;
  if (has_random && has_full) {
    for (const auto& name : arm_names) {
      if (name == "random") continue;
      const auto f = result.matching_fraction(name, "random");
      ctx.out << name << " matches random@1.0 at fraction "
              << (f ? std::to_string(*f) : std::string("none")) << '\n';
    }
  }
  return 0;
}

int cmd_preview(const Context& ctx) {
  const RunConfig cfg = resolve_config(ctx.opts);
  if (ctx.opts.preview_n < 1) throw ConfigError("--n must be >= 1");
  const data::Dataset ds = cfg.data.load();
  const Arm arm = cfg.train.arm();
  if (arm == Arm::kRandom) throw ConfigError("key 'mode': 'random' has no transforms to preview");
  const Image& ref = ds.images.at(0);
  const auto aug = cfg.train.augment_config(ref.height, ref.width, ds.modality);
  Rng rng(derive_seed(cfg.train.seed, kPreviewStream));
  std::ostringstream log;
  std::vector<std::string> outputs;
  const int n = std::min<int>(ctx.opts.preview_n, static_cast<int>(ds.size()));
  if (n < ctx.opts.preview_n) {
    throw ConfigError("--n: dataset has only " + std::to_string(ds.size()) + " images");
  }
  for (int i = 0; i < n; ++i) {
    const std::string id = i < static_cast<int>(ds.ids.size()) ? ds.ids[i] : std::to_string(i);
    const auto plan = augment::sample_plan(rng, proxy_mode(arm), aug, id, ref.channels);
    const auto st = augment::apply_plan_stages(ds.images[i], plan, cfg.train.translation_resolution);
    char stem[32];
    std::snprintf(stem, sizeof stem, "preview_%03d", i);
    const std::string s = stem;
    io::write_png(ctx.dir / (s + "_original.png"), ds.images[i]);
    io::write_png(ctx.dir / (s + "_translated.png"), st.translated);
    io::write_png(ctx.dir / (s + "_masked.png"), st.output);
    for (const char* kind : {"_original.png", "_translated.png", "_masked.png"}) {
      outputs.push_back(s + kind);
    }
    log << augment::serialize(plan) << '\n';
  }
  write_file(ctx.dir / "plans.log", log.str());
  outputs.push_back("plans.log");
  finish(ctx, "transform-preview", cfg, data::dataset_hash(ds), outputs);
  ctx.out << n << " triplets written to " << ctx.dir.string() << '\n';
  return 0;
}

int cmd_export(const Context& ctx) {
  const RunConfig cfg = resolve_config(ctx.opts);
  const data::Dataset ds = cfg.data.load();
  const nn::ModelState ckpt = nn::load_checkpoint(ctx.opts.ckpts.front());
  eval::export_embeddings(ckpt, ds, ctx.dir / "embeddings.csv");
  finish(ctx, "export-embeddings", cfg, data::dataset_hash(ds), {"embeddings.csv"});
  ctx.out << ds.size() << " embeddings written to " << (ctx.dir / "embeddings.csv").string()
          << '\n';
  return 0;
}

std::vector<std::vector<std::string>> read_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    rows.push_back(std::move(cells));
  }
  return rows;
}

double number(const std::string& s, const fs::path& file) {
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw FormatError("'" + file.string() + "': '" + s + "' is not a number");
  }
}

std::string render_report(const fs::path& file) {
  const auto rows = read_csv(read_file(file, false));
  if (rows.empty()) throw FormatError("'" + file.string() + "' is empty");
  const auto& header = rows.front();
  std::vector<svg::Series> series;
  svg::Chart chart;
  if (header.size() == 6 && header[0] == "epoch" && header[1] == "lr") {
    chart = {"Pre-training losses", "epoch", "loss"};
    for (int col : {2, 3, 4, 5}) {
      svg::Series s{header[col], {}, {}};
      for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != header.size()) throw FormatError("'" + file.string() + "': ragged row");
        s.x.push_back(number(rows[r][0], file));
        s.y.push_back(number(rows[r][col], file));
      }
      series.push_back(std::move(s));
    }
  } else if (header.size() == 5 && header[0] == "arm" && header[1] == "fraction") {
    chart = {"Label-fraction sweep", "label fraction", "mean metric"};
    // Mean over trials per (arm, fraction), arms in order of appearance.
    std::vector<std::string> arms;
    std::map<std::string, std::map<double, std::pair<double, int>>> acc;
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (rows[r].size() != header.size()) throw FormatError("'" + file.string() + "': ragged row");
      const auto& arm = rows[r][0];
      if (std::find(arms.begin(), arms.end(), arm) == arms.end()) arms.push_back(arm);
      auto& cell = acc[arm][number(rows[r][1], file)];
      cell.first += number(rows[r][4], file);
      ++cell.second;
    }
    for (const auto& arm : arms) {
      svg::Series s{arm, {}, {}};
      for (const auto& [f, cell] : acc[arm]) {
        s.x.push_back(f);
        s.y.push_back(cell.first / cell.second);
      }
      series.push_back(std::move(s));
    }
  } else {
    throw FormatError("'" + file.string() + "' is neither a metrics nor a sweep CSV");
  }
  return svg::line_chart(chart, series);
}

int cmd_report(const Context& ctx) {
  const RunConfig cfg = resolve_config(ctx.opts);
  std::vector<std::string> outputs;
  for (const auto& input : ctx.opts.inputs) {
    const fs::path in(input);
    const std::string name = in.stem().string() + ".svg";
    write_file(ctx.dir / name, render_report(in));
    outputs.push_back(name);
    ctx.out << "wrote " << (ctx.dir / name).string() << '\n';
  }
  finish(ctx, "report", cfg, 0, outputs);
  return 0;
}

void add_config_flags(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config_path, "Config file of `key = value` lines");
  sub->add_option("--out", o.out_dir, "Run directory")->capture_default_str();
  sub->add_flag("--quiet", o.quiet, "Suppress progress output");
  for (const auto& key : RunConfig::keys()) {
    sub->add_option_function<std::string>(
        "--" + key, [&o, key](const std::string& v) { o.keys[key] = v; },
        "Overrides config key " + key);
  }
}

}  // namespace

std::string RunManifest::to_text() const {
  std::ostringstream os;
  os << "[run]\n";
  os << "command = " << command << '\n';
  os << "version = " << version << '\n';
  os << "seed = " << seed << '\n';
  os << "dataset_hash = " << hex(dataset_hash) << '\n';
  os << "outputs = ";
  for (std::size_t i = 0; i < outputs.size(); ++i) os << (i ? "," : "") << outputs[i];
  os << "\n[config]\n" << config << '\n';
  return os.str();
}

void append_manifest(const fs::path& run_dir, const RunManifest& manifest) {
  fs::create_directories(run_dir);
  std::ofstream out(run_dir / "manifest.txt", std::ios::app);
  if (!out) throw DataError("cannot append to '" + (run_dir / "manifest.txt").string() + "'");
  out << manifest.to_text();
}

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Self-supervised pre-training toolkit for medical images", "tower"};
  app.require_subcommand(1);
  Options o;
  auto* pretrain = app.add_subcommand("pretrain", "Pre-train encoder, head and decoder");
  add_config_flags(pretrain, o);
  pretrain->add_flag("--log-plans", o.log_plans, "Record every TransformPlan in plans.log");

  auto* finetune = app.add_subcommand("finetune", "Fine-tune a checkpoint on labelled data");
  add_config_flags(finetune, o);
  finetune->add_option("--ckpt", o.ckpts, "Checkpoint; random init when omitted")->expected(1);

  auto* sweep = app.add_subcommand("sweep", "Label-fraction sweep over several arms");
  add_config_flags(sweep, o);
  sweep->add_option("--arms", o.arms, "Comma-separated arms")->capture_default_str();
  sweep->add_option("--fractions", o.fractions, "Comma-separated label fractions")
      ->capture_default_str();
  sweep->add_option("--ckpt", o.ckpts, "arm=path; arms without one are pre-trained here");

  auto* preview = app.add_subcommand("transform-preview", "Write original/translated/masked PNGs");
  add_config_flags(preview, o);
  preview->add_option("--n", o.preview_n, "Number of triplets")->capture_default_str();

  auto* exporter = app.add_subcommand("export-embeddings", "Write encoder representations as CSV");
  add_config_flags(exporter, o);
  exporter->add_option("--ckpt", o.ckpts, "Checkpoint")->required()->expected(1);

  auto* report = app.add_subcommand("report", "Render metrics or sweep CSVs as SVG charts");
  add_config_flags(report, o);
  report->add_option("--input", o.inputs, "metrics.csv or sweep.csv files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return 0;
    }
    err << "error: " << e.what() << '\n';
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return 1;
  }

  Context ctx{o, out, err, fs::path(o.out_dir)};
  try {
    fs::create_directories(ctx.dir);
    if (pretrain->parsed()) return cmd_pretrain(ctx);
    if (finetune->parsed()) return cmd_finetune(ctx);
    if (sweep->parsed()) return cmd_sweep(ctx);
    if (preview->parsed()) return cmd_preview(ctx);
    if (exporter->parsed()) return cmd_export(ctx);
    if (report->parsed()) return cmd_report(ctx);
    return 1;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    const fs::path log = ctx.dir / "error.log";
    std::ofstream(log, std::ios::app) << e.what() << '\n';
    err << "error: " << e.what() << "\ndiagnostics: " << log.string() << '\n';
    return 2;
  }
}

}  // namespace tower::cli
