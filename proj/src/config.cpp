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

#include "tower/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "tower/error.hpp"

namespace tower {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_value(const std::string& key, const std::string& v);

template <>
int parse_value<int>(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  try {
    const int x = std::stoi(v, &pos);
    if (pos == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
}

template <>
std::uint64_t parse_value<std::uint64_t>(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  try {
    if (!v.empty() && v[0] != '-') {
      const auto x = std::stoull(v, &pos);
      if (pos == v.size()) return x;
    }
  } catch (const std::exception&) {
  }
  throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + v + "'");
}

template <>
double parse_value<double>(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  try {
    const double x = std::stod(v, &pos);
    if (pos == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
}

template <>
bool parse_value<bool>(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("key '" + key + "': expected true/false, got '" + v + "'");
}

template <>
std::string parse_value<std::string>(const std::string&, const std::string& v) {
  return v;
}

std::string show(int v) { return std::to_string(v); }
std::string show(std::uint64_t v) { return std::to_string(v); }
std::string show(bool v) { return v ? "true" : "false"; }
std::string show(const std::string& v) { return v; }
std::string show(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

struct Entry {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename Section, typename T>
Entry entry(std::string key, Section RunConfig::*section, T Section::*field) {
  return Entry{key,
               [key, section, field](RunConfig& c, const std::string& v) {
                 (c.*section).*field = parse_value<T>(key, v);
               },
               [section, field](const RunConfig& c) { return show((c.*section).*field); }};
}

const std::vector<Entry>& registry() {
  using R = RunConfig;
  using T = TrainConfig;
  using F = FinetuneConfig;
  using D = DataConfig;
  static const std::vector<Entry> entries = {
      entry("mode", &R::train, &T::mode),
      entry("batch_size", &R::train, &T::batch_size),
      entry("lr_init", &R::train, &T::lr_init),
      entry("lr_min", &R::train, &T::lr_min),
      entry("epochs", &R::train, &T::epochs),
      entry("patience", &R::train, &T::patience),
      entry("lambda", &R::train, &T::lambda),
      entry("tau", &R::train, &T::tau),
      entry("seed", &R::train, &T::seed),
      entry("val_fraction", &R::train, &T::val_fraction),
      entry("clip_norm", &R::train, &T::clip_norm),
      entry("symmetric_nce", &R::train, &T::symmetric_nce),
      entry("direction", &R::train, &T::direction),
      entry("translation_resolution", &R::train, &T::translation_resolution),
      entry("per_channel_translation", &R::train, &T::per_channel_translation),
      entry("mask_kind", &R::train, &T::mask_kind),
      entry("num_rays", &R::train, &T::num_rays),
      entry("ray_thickness", &R::train, &T::ray_thickness),
      entry("disc_radius", &R::train, &T::disc_radius),
      entry("stripe_orientation", &R::train, &T::stripe_orientation),
      entry("stripe_width", &R::train, &T::stripe_width),
      entry("block_size", &R::train, &T::block_size),
      entry("mask_ratio", &R::train, &T::mask_ratio),
      entry("base_channels", &R::train, &T::base_channels),
      entry("depth", &R::train, &T::depth),
      entry("embed_dim", &R::train, &T::embed_dim),
      entry("task", &R::finetune, &F::task),
      entry("ft_epochs", &R::finetune, &F::ft_epochs),
      entry("ft_lr", &R::finetune, &F::ft_lr),
      entry("ft_lr_min", &R::finetune, &F::ft_lr_min),
      entry("ft_patience", &R::finetune, &F::ft_patience),
      entry("ft_batch_size", &R::finetune, &F::ft_batch_size),
      entry("label_fraction", &R::finetune, &F::label_fraction),
      entry("linear_probe", &R::finetune, &F::linear_probe),
      entry("trials", &R::finetune, &F::trials),
      entry("ft_seed", &R::finetune, &F::ft_seed),
      entry("data_kind", &R::data, &D::data_kind),
      entry("data_path", &R::data, &D::data_path),
      entry("manifest", &R::data, &D::manifest),
      entry("idx_images", &R::data, &D::idx_images),
      entry("idx_labels", &R::data, &D::idx_labels),
      entry("num_classes", &R::data, &D::num_classes),
      entry("modality", &R::data, &D::modality),
      entry("synth_n", &R::data, &D::synth_n),
      entry("synth_size", &R::data, &D::synth_size),
      entry("synth_seed", &R::data, &D::synth_seed),
      entry("split_val", &R::data, &D::split_val),
      entry("split_test", &R::data, &D::split_test),
  };
  return entries;
}

const Entry& find_entry(const std::string& key) {
  for (const Entry& e : registry()) {
    if (e.key == key) return e;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void need(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError("key '" + key + "': " + what);
}

}  // namespace

std::string to_string(Arm arm) {
  switch (arm) {
    case Arm::kRandom: return "random";
    case Arm::kGenNl: return "gen_nl";
    case Arm::kGenM: return "gen_m";
    case Arm::kGenNlM: return "gen_nlm";
    case Arm::kConNlM: return "con_nlm";
    case Arm::kTower: return "tower";
    case Arm::kConClassic: return "con_classic";
  }
  return "?";
}

Arm parse_arm(const std::string& s) {
  if (s == "tower_nl") return Arm::kGenNl;
  if (s == "tower_m") return Arm::kGenM;
  if (s == "tower_nl+m") return Arm::kTower;
  for (Arm a : {Arm::kRandom, Arm::kGenNl, Arm::kGenM, Arm::kGenNlM, Arm::kConNlM, Arm::kTower,
                Arm::kConClassic}) {
    if (to_string(a) == s) return a;
  }
  throw ConfigError("key 'mode': unknown arm '" + s + "'");
}

augment::ProxyMode proxy_mode(Arm arm) {
  switch (arm) {
    case Arm::kGenNl: return augment::ProxyMode::kTowerNl;
    case Arm::kGenM: return augment::ProxyMode::kTowerM;
    case Arm::kConClassic: return augment::ProxyMode::kClassic;
    default: return augment::ProxyMode::kTowerNlM;
  }
}

bool uses_contrastive(Arm arm) {
  return arm == Arm::kConNlM || arm == Arm::kTower || arm == Arm::kConClassic;
}

bool uses_generative(Arm arm) {
  return arm == Arm::kGenNl || arm == Arm::kGenM || arm == Arm::kGenNlM || arm == Arm::kTower;
}

void TrainConfig::validate() const {
  const Arm a = arm();
  need(a != Arm::kRandom, "mode", "'random' is not a pre-training arm");
  need(batch_size >= 1, "batch_size", "must be >= 1");
  need(!uses_contrastive(a) || batch_size >= 2, "batch_size", "must be >= 2 for contrastive arms");
  need(lr_init > 0.0, "lr_init", "must be > 0");
  need(lr_min >= 0.0 && lr_min <= lr_init, "lr_min", "must be in [0, lr_init]");
  need(epochs >= 1, "epochs", "must be >= 1");
  need(patience >= 1, "patience", "must be >= 1");
  need(lambda >= 0.0, "lambda", "must be >= 0");
  need(tau > 0.0, "tau", "must be > 0");
  need(val_fraction >= 0.0 && val_fraction < 1.0, "val_fraction", "must be in [0, 1)");
  need(clip_norm >= 0.0, "clip_norm", "must be >= 0 (0 disables)");
  need(direction == "random" || direction == "increasing" || direction == "decreasing",
       "direction", "must be random, increasing or decreasing");
  need(translation_resolution >= 2, "translation_resolution", "must be >= 2");
  need(mask_kind == "auto" || mask_kind == "rays" || mask_kind == "stripe" || mask_kind == "block",
       "mask_kind", "must be auto, rays, stripe or block");
  need(stripe_orientation == "horizontal" || stripe_orientation == "vertical",
       "stripe_orientation", "must be horizontal or vertical");
  need(stripe_width >= 1, "stripe_width", "must be >= 1");
  need(block_size >= 1, "block_size", "must be >= 1");
  need(mask_ratio >= 0.0 && mask_ratio <= 1.0, "mask_ratio", "must be in [0, 1]");
  need(base_channels >= 1, "base_channels", "must be >= 1");
  need(depth >= 0 && depth <= 5, "depth", "must be in [0, 5]");
  need(embed_dim >= 1, "embed_dim", "must be >= 1");
}

nn::ModelConfig TrainConfig::model_config(int channels) const {
  nn::ModelConfig m;
  m.in_channels = channels;
  m.out_channels = channels;
  m.base_channels = base_channels;
  m.depth = depth;
  m.embed_dim = embed_dim;
  return m;
}

augment::AugmentConfig TrainConfig::augment_config(int height, int width,
                                                   data::Modality modality) const {
  augment::AugmentConfig a;
  a.direction = direction == "increasing"   ? transform::Direction::kIncreasing
                : direction == "decreasing" ? transform::Direction::kDecreasing
                                            : transform::Direction::kRandom;
  a.translation_resolution = translation_resolution;
  a.per_channel_translation = per_channel_translation;
  transform::MaskSpec& m = a.mask;
  if (mask_kind == "auto") {
    m.kind = (modality == data::Modality::kFundoscopic || modality == data::Modality::kSynthetic)
                 ? transform::MaskKind::kRays
             : modality == data::Modality::kXray ? transform::MaskKind::kStripe
                                                 : transform::MaskKind::kBlock;
  } else {
    m.kind = transform::parse_mask_kind(mask_kind);
  }
  const int short_side = std::min(height, width);
  // 80 rays is the best setting at 512 px; scale the count with resolution.
  m.num_rays = num_rays >= 0
                   ? num_rays
                   : std::max(8, static_cast<int>(std::lround(80.0 * short_side / 512.0)));
  m.ray_thickness = ray_thickness >= 0 ? ray_thickness
                                       : transform::default_ray_thickness(height, width);
  m.disc_radius = disc_radius >= 0 ? disc_radius : transform::default_disc_radius(height, width);
  m.stripe_orientation = transform::parse_stripe_orientation(stripe_orientation);
  m.stripe_width = stripe_width;
  m.block_size = block_size;
  m.mask_ratio = mask_ratio;
  return a;
}

void FinetuneConfig::validate() const {
  need(task == "classify" || task == "segment", "task", "must be classify or segment");
  need(ft_epochs >= 1, "ft_epochs", "must be >= 1");
  need(ft_lr > 0.0, "ft_lr", "must be > 0");
  need(ft_lr_min >= 0.0 && ft_lr_min <= ft_lr, "ft_lr_min", "must be in [0, ft_lr]");
  need(ft_patience >= 1, "ft_patience", "must be >= 1");
  need(ft_batch_size >= 1, "ft_batch_size", "must be >= 1");
  need(label_fraction > 0.0 && label_fraction <= 1.0, "label_fraction", "must be in (0, 1]");
  need(trials >= 1, "trials", "must be >= 1");
}

void DataConfig::validate() const {
  need(data_kind == "synthetic" || data_kind == "png" || data_kind == "idx", "data_kind",
       "must be synthetic, png or idx");
  if (data_kind == "png") {
    need(!data_path.empty(), "data_path", "required for png data");
    need(!manifest.empty(), "manifest", "required for png data");
  }
  if (data_kind == "idx") {
    need(!idx_images.empty(), "idx_images", "required for idx data");
    need(!idx_labels.empty(), "idx_labels", "required for idx data");
  }
  need(num_classes >= 0, "num_classes", "must be >= 0");
  need(synth_n >= 1, "synth_n", "must be >= 1");
  need(synth_size >= 8, "synth_size", "must be >= 8");
  need(split_val >= 0.0 && split_test >= 0.0 && split_val + split_test < 1.0, "split_val",
       "split_val + split_test must be below 1");
  data::parse_modality(modality);
}

data::Dataset DataConfig::load() const {
  validate();
  data::Dataset ds;
  if (data_kind == "synthetic") {
    data::RetinaConfig rc;
    rc.n = synth_n;
    rc.height = synth_size;
    rc.width = synth_size;
    rc.seed = synth_seed;
    rc.val_fraction = split_val;
    rc.test_fraction = split_test;
    return data::gen_synthetic_retina(rc);
  }
  if (data_kind == "png") {
    ds = data::load_png_dir(data_path, manifest);
  } else {
    ds = data::load_idx(idx_images, idx_labels,
                        num_classes > 0 ? std::optional<int>(num_classes) : std::nullopt);
    data::assign_splits(ds, split_val, split_test, synth_seed);
  }
  ds.modality = data::parse_modality(modality);
  for (Image& img : ds.images) minmax_normalize(img);
  return ds;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "preset") {
    apply_preset(*this, value);
    return;
  }
  find_entry(key).set(*this, value);
}

std::string RunConfig::get(const std::string& key) const {
  if (key == "preset") return preset;
  return find_entry(key).get(*this);
}

void RunConfig::validate() const {
  train.validate();
  finetune.validate();
  data.validate();
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  os << "preset = " << preset << '\n';
  for (const Entry& e : registry()) os << e.key << " = " << e.get(*this) << '\n';
  return os.str();
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> k{"preset"};
    for (const Entry& e : registry()) k.push_back(e.key);
    return k;
  }();
  return names;
}

RunConfig::Pairs RunConfig::parse_pairs(const std::string& text) {
  Pairs pairs;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    pairs.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return pairs;
}

RunConfig::RunConfig() { apply_preset(*this, preset); }

RunConfig RunConfig::from_pairs(const Pairs& pairs) {
  RunConfig cfg;
  const std::string* preset = nullptr;
  for (const auto& [k, v] : pairs) {
    if (k == "preset") preset = &v;
  }
  if (preset) cfg.set("preset", *preset);
  for (const auto& [k, v] : pairs) {
    if (k != "preset") cfg.set(k, v);
  }
  return cfg;
}

RunConfig RunConfig::parse(const std::string& text) { return from_pairs(parse_pairs(text)); }

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void apply_preset(RunConfig& cfg, const std::string& name) {
  if (name == "desk") {
    cfg.train.batch_size = 32;
    cfg.train.lr_init = 1e-3;
    cfg.finetune.ft_lr = 1e-3;
    cfg.finetune.ft_batch_size = 32;
    cfg.finetune.ft_epochs = 30;
    cfg.finetune.ft_patience = 10;
  } else if (name == "classification") {
    cfg.train.batch_size = 128;
    cfg.train.lr_init = 1e-3;
    cfg.finetune.task = "classify";
    cfg.finetune.ft_lr = 2e-4;
    cfg.finetune.ft_batch_size = 128;
    cfg.finetune.ft_epochs = 100;
    cfg.finetune.ft_patience = 30;
  } else if (name == "segmentation") {
    cfg.train.batch_size = 32;
    cfg.train.lr_init = 1e-2;
    cfg.finetune.task = "segment";
    cfg.finetune.ft_lr = 1e-3;
    cfg.finetune.ft_batch_size = 32;
    cfg.finetune.ft_epochs = 200;
    cfg.finetune.ft_patience = 30;
  } else {
    throw ConfigError("key 'preset': unknown preset '" + name + "'");
  }
  cfg.preset = name;
}

}  // namespace tower
