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

#include "tower/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "tower/error.hpp"
#include "tower/metrics.hpp"
#include "tower/rng.hpp"
#include "tower/trainer.hpp"

namespace tower::eval {
namespace {

constexpr std::uint64_t kTrialStream = 0x7e57;
constexpr std::uint64_t kSubsampleStream = 1;
constexpr std::uint64_t kHeadInitStream = 2;
constexpr std::uint64_t kShuffleStream = 3;

const std::vector<nn::Part> kAllParts = {nn::Part::kEncoder, nn::Part::kHead, nn::Part::kDecoder,
                                         nn::Part::kTask};

// Copy with a fresh optimizer.
nn::ModelState fresh_copy(const nn::ModelState& ckpt) {
  nn::ModelState s = ckpt;
  s.step = 0;
  for (auto& p : s.params) {
    p.adam_m = nn::Tensor(p.value.shape);
    p.adam_v = nn::Tensor(p.value.shape);
    p.grad = nn::Tensor();
    p.has_grad = false;
  }
  return s;
}

void add_param(nn::ModelState& s, const std::string& name, nn::Shape shape, double bound,
               Rng& rng) {
  nn::Parameter p(name, nn::Tensor(shape));
  for (float& v : p.value.data) v = static_cast<float>(rng.uniform(-bound, bound));
  p.adam_m = nn::Tensor(shape);
  p.adam_v = nn::Tensor(shape);
  const int i = [&] {
    for (std::size_t k = 0; k < s.params.size(); ++k) {
      if (s.params[k].name == name) return static_cast<int>(k);
    }
    return -1;
  }();
  if (i >= 0) {
    s.params[i] = std::move(p);
  } else {
    s.params.push_back(std::move(p));
  }
}

std::vector<std::vector<std::size_t>> batches_of(const std::vector<std::size_t>& idx, int size) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < idx.size(); i += size) {
    out.emplace_back(idx.begin() + i, idx.begin() + std::min(idx.size(), i + size));
  }
  return out;
}

std::vector<std::size_t> shuffled(std::vector<std::size_t> idx, std::uint64_t seed) {
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(idx));
  return idx;
}

void summarize(EvalResult& r) {
  for (const auto& t : r.trials) r.values.push_back(t.metric);
  const double n = static_cast<double>(r.values.size());
  r.mean = std::accumulate(r.values.begin(), r.values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : r.values) ss += (v - r.mean) * (v - r.mean);
  r.stddev = r.values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
}

std::vector<std::size_t> require_split(const data::Dataset& ds, data::Split s) {
  auto idx = ds.indices(s);
  if (idx.empty()) throw DataError("dataset has no " + data::to_string(s) + " samples");
  return idx;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

// Row-wise softmax of N x K logits.
std::vector<double> softmax_rows(const nn::Tensor& logits) {
  const int n = logits.shape.n;
  const int k = logits.shape.c;
  std::vector<double> out(logits.size());
  for (int i = 0; i < n; ++i) {
    double mx = logits[i * k];
    for (int j = 1; j < k; ++j) mx = std::max<double>(mx, logits[i * k + j]);
    double z = 0.0;
    for (int j = 0; j < k; ++j) z += out[i * k + j] = std::exp(logits[i * k + j] - mx);
    for (int j = 0; j < k; ++j) out[i * k + j] /= z;
  }
  return out;
}

}  // namespace

std::string to_string(Task t) { return t == Task::kClassify ? "classify" : "segment"; }

Task parse_task(const std::string& s) {
  if (s == "classify") return Task::kClassify;
  if (s == "segment") return Task::kSegment;
  throw ConfigError("key 'task': unknown task '" + s + "'");
}

std::optional<int> TrialOutcome::epochs_to_target(double target) const {
  for (std::size_t i = 0; i < train_loss.size(); ++i) {
    if (train_loss[i] <= target) return static_cast<int>(i) + 1;
  }
  return std::nullopt;
}

std::uint64_t trial_seed(const FinetuneConfig& cfg, int trial) {
  return derive_seed(cfg.ft_seed, kTrialStream, static_cast<std::uint64_t>(trial));
}

std::vector<float> encode(const nn::ModelState& ckpt, std::span<const Image> images,
                          int batch_size) {
  nn::ModelState state = ckpt;
  const int d = state.config.representation_dim();
  std::vector<float> out(images.size() * d);
  std::vector<std::size_t> all(images.size());
  std::iota(all.begin(), all.end(), 0);
  std::size_t row = 0;
  for (const auto& batch : batches_of(all, std::max(1, batch_size))) {
    nn::Graph g;
    nn::BoundModel<float> m(g, state, kAllParts);
    const auto enc = nn::forward_encoder(m, g.input(train::stack_images(images, batch)));
    const auto& rep = enc.representation.value();
    std::copy(rep.data.begin(), rep.data.end(), out.begin() + row * d);
    row += batch.size();
  }
  return out;
}

TrialOutcome finetune_classify_trial(const nn::ModelState& ckpt, const data::Dataset& ds,
                                     double label_fraction, const FinetuneConfig& cfg,
                                     std::uint64_t seed) {
  cfg.validate();
  if (!(label_fraction > 0.0 && label_fraction <= 1.0)) {
    throw ConfigError("key 'label_fraction': must be in (0, 1]");
  }
  if (!ds.has_labels()) throw DataError("classification needs class labels");
  const int k = ds.num_classes;
  if (k < 2) throw DataError("classification needs at least two classes");
  const auto pool = ds.indices(data::Split::kTrain);
  const auto train = data::stratified_subsample(ds, pool, label_fraction,
                                                derive_seed(seed, kSubsampleStream));
  const auto val = require_split(ds, data::Split::kVal);
  const auto test = require_split(ds, data::Split::kTest);

  nn::ModelState state = fresh_copy(ckpt);
  const int d = state.config.representation_dim();
  Rng init(derive_seed(seed, kHeadInitStream));
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  add_param(state, "task.w", {k, d, 1, 1}, bound, init);
  add_param(state, "task.b", {1, k, 1, 1}, 0.0, init);
  std::vector<nn::Part> frozen = {nn::Part::kHead, nn::Part::kDecoder};
  if (cfg.linear_probe) frozen.push_back(nn::Part::kEncoder);

  // A frozen encoder maps every image to a fixed representation.
  std::vector<float> reps;
  if (cfg.linear_probe) reps = encode(state, ds.images);
  auto rep_tensor = [&](const std::vector<std::size_t>& idx) {
    nn::Tensor t({static_cast<int>(idx.size()), d, 1, 1});
    for (std::size_t r = 0; r < idx.size(); ++r) {
      std::copy_n(reps.begin() + idx[r] * d, d, t.data.begin() + r * d);
    }
    return t;
  };
  auto logits_of = [&](nn::Graph& g, nn::BoundModel<float>& m,
                       const std::vector<std::size_t>& idx) {
    const nn::Var rep =
        cfg.linear_probe
            ? g.input(rep_tensor(idx))
            : nn::forward_encoder(m, g.input(train::stack_images(ds.images, idx))).representation;
    return nn::ops::dense(rep, m("task.w"), m("task.b"));
  };
  auto score = [&](const std::vector<std::size_t>& idx) {
    std::vector<double> probs;
    std::vector<int> labels;
    for (const auto& batch : batches_of(idx, 64)) {
      nn::Graph g;
      nn::BoundModel<float> m(g, state, kAllParts);
      const auto p = softmax_rows(logits_of(g, m, batch).value());
      probs.insert(probs.end(), p.begin(), p.end());
      for (std::size_t i : batch) labels.push_back(ds.labels[i]);
    }
    return metrics::auc(probs, labels, k);
  };

  TrialOutcome out;
  nn::ModelState best = state;
  double best_auc = -1.0;
  int stale = 0;
  for (int epoch = 0; epoch < cfg.ft_epochs; ++epoch) {
    const double lr = train::cosine_lr(epoch, cfg.ft_epochs, cfg.ft_lr, cfg.ft_lr_min);
    double loss_sum = 0.0;
    const auto order = shuffled(train, derive_seed(seed, kShuffleStream, epoch));
    for (const auto& batch : batches_of(order, cfg.ft_batch_size)) {
      nn::Graph g;
      nn::BoundModel<float> m(g, state, frozen);
      std::vector<int> targets;
      for (std::size_t i : batch) targets.push_back(ds.labels[i]);
      const nn::Var loss = nn::ops::softmax_cross_entropy(logits_of(g, m, batch), targets);
      state.zero_grad();
      g.backward(loss);
      train::adam_step(state, lr, {}, frozen);
      loss_sum += loss.value()[0] * static_cast<double>(batch.size());
    }
    out.train_loss.push_back(loss_sum / static_cast<double>(train.size()));
    const double v = score(val);
    out.val_metric.push_back(v);
    out.epochs_run = epoch + 1;
    if (v > best_auc) {
      best_auc = v;
      best = state;
      out.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= cfg.ft_patience) {
      break;
    }
  }
  state = std::move(best);
  out.metric = score(test);
  return out;
}

EvalResult finetune_classify(const nn::ModelState& ckpt, const data::Dataset& ds,
                             double label_fraction, const FinetuneConfig& cfg) {
  EvalResult r;
  r.task = Task::kClassify;
  r.metric = "auc";
  r.label_fraction = label_fraction;
  for (int t = 0; t < cfg.trials; ++t) {
    r.trials.push_back(finetune_classify_trial(ckpt, ds, label_fraction, cfg, trial_seed(cfg, t)));
  }
  summarize(r);
  return r;
}

TrialOutcome finetune_segment_trial(const nn::ModelState& ckpt, const data::Dataset& ds,
                                    const FinetuneConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (!ds.has_masks()) throw DataError("segmentation needs ground-truth masks");
  const auto pool = ds.indices(data::Split::kTrain);
  std::vector<std::size_t> train = pool;
  if (cfg.label_fraction < 1.0) {
    train = data::stratified_subsample(ds, pool, cfg.label_fraction,
                                       derive_seed(seed, kSubsampleStream));
  }
  const auto val = require_split(ds, data::Split::kVal);
  const auto test = require_split(ds, data::Split::kTest);

  nn::ModelState state = fresh_copy(ckpt);
  if (state.config.out_channels != 1) {
    // Masks are single-channel; swap in a one-channel output layer.
    const int top = state.get("dec.out.w").value.shape.c;
    Rng init(derive_seed(seed, kHeadInitStream));
    add_param(state, "dec.out.w", {1, top, 1, 1}, std::sqrt(6.0 / top), init);
    add_param(state, "dec.out.b", {1, 1, 1, 1}, 0.0, init);
    state.config.out_channels = 1;
  }
  const std::vector<nn::Part> frozen = {nn::Part::kHead};

  auto mean_dice = [&](const std::vector<std::size_t>& idx) {
    double total = 0.0;
    for (const auto& batch : batches_of(idx, 64)) {
      nn::Graph g;
      nn::BoundModel<float> m(g, state, kAllParts);
      const auto enc = nn::forward_encoder(m, g.input(train::stack_images(ds.images, batch)));
      const auto& logits = nn::forward_decoder_logits(m, enc).value();
      const std::size_t per = logits.shape.plane();
      for (std::size_t b = 0; b < batch.size(); ++b) {
        const Image& truth = ds.masks[batch[b]];
        if (truth.size() != per) throw DataError("mask shape does not match the image");
        std::vector<std::uint8_t> p(per), t(per);
        for (std::size_t i = 0; i < per; ++i) {
          p[i] = logits[b * per + i] > 0.0f;
          t[i] = truth.pixels[i] > 0.5f;
        }
        total += metrics::dice(p, t);
      }
    }
    return total / static_cast<double>(idx.size());
  };

  TrialOutcome out;
  nn::ModelState best = state;
  double best_dice = -1.0;
  int stale = 0;
  for (int epoch = 0; epoch < cfg.ft_epochs; ++epoch) {
    const double lr = train::cosine_lr(epoch, cfg.ft_epochs, cfg.ft_lr, cfg.ft_lr_min);
    double loss_sum = 0.0;
    const auto order = shuffled(train, derive_seed(seed, kShuffleStream, epoch));
    for (const auto& batch : batches_of(order, cfg.ft_batch_size)) {
      nn::Graph g;
      nn::BoundModel<float> m(g, state, frozen);
      const auto enc = nn::forward_encoder(m, g.input(train::stack_images(ds.images, batch)));
      const nn::Var logits = nn::forward_decoder_logits(m, enc);
      const nn::Var loss =
          nn::ops::bce_with_logits(logits, g.input(train::stack_images(ds.masks, batch)));
      state.zero_grad();
      g.backward(loss);
      train::adam_step(state, lr, {}, frozen);
      loss_sum += loss.value()[0] * static_cast<double>(batch.size());
    }
    out.train_loss.push_back(loss_sum / static_cast<double>(train.size()));
    const double v = mean_dice(val);
    out.val_metric.push_back(v);
    out.epochs_run = epoch + 1;
    if (v > best_dice) {
      best_dice = v;
      best = state;
      out.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= cfg.ft_patience) {
      break;
    }
  }
  state = std::move(best);
  out.metric = mean_dice(test);
  return out;
}

EvalResult finetune_segment(const nn::ModelState& ckpt, const data::Dataset& ds,
                            const FinetuneConfig& cfg) {
  EvalResult r;
  r.task = Task::kSegment;
  r.metric = "dice";
  r.label_fraction = cfg.label_fraction;
  for (int t = 0; t < cfg.trials; ++t) {
    r.trials.push_back(finetune_segment_trial(ckpt, ds, cfg, trial_seed(cfg, t)));
  }
  summarize(r);
  return r;
}

std::string SweepResult::to_csv() const {
  std::ostringstream os;
  os << "arm,fraction,trial,metric,value\n";
  for (const auto& r : rows) {
    os << r.arm << ',' << fmt(r.fraction) << ',' << r.trial << ',' << r.metric << ','
       << fmt(r.value) << '\n';
  }
  return os.str();
}

const EvalResult& SweepResult::cell(const std::string& arm, double fraction) const {
  for (const auto& [name, r] : cells) {
    if (name == arm && r.label_fraction == fraction) return r;
  }
  throw UsageError("sweep has no cell for arm '" + arm + "' at fraction " + fmt(fraction));
}

std::optional<double> SweepResult::matching_fraction(const std::string& arm,
                                                     const std::string& baseline) const {
  const double target = cell(baseline, 1.0).mean;
  std::vector<double> fractions;
  for (const auto& [name, r] : cells) {
    if (name == arm) fractions.push_back(r.label_fraction);
  }
  std::sort(fractions.begin(), fractions.end());
  for (double f : fractions) {
    if (cell(arm, f).mean >= target) return f;
  }
  return std::nullopt;
}

SweepResult label_fraction_sweep(std::span<const SweepArm> arms, std::span<const double> fractions,
                                 const data::Dataset& ds, const FinetuneConfig& cfg) {
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("fractions must lie in (0, 1]");
  }
  const Task task = parse_task(cfg.task);
  SweepResult out;
  for (const auto& arm : arms) {
    for (double f : fractions) {
      FinetuneConfig c = cfg;
      c.label_fraction = f;
      EvalResult r = task == Task::kClassify ? finetune_classify(arm.ckpt, ds, f, c)
                                             : finetune_segment(arm.ckpt, ds, c);
      for (int t = 0; t < static_cast<int>(r.values.size()); ++t) {
        out.rows.push_back({arm.name, f, t, r.metric, r.values[t]});
      }
      out.cells.emplace_back(arm.name, std::move(r));
    }
  }
  return out;
}

std::string embeddings_csv(const nn::ModelState& ckpt, const data::Dataset& ds) {
  const int d = ckpt.config.representation_dim();
  const auto reps = encode(ckpt, ds.images);
  std::ostringstream os;
  os << "id,label";
  for (int j = 0; j < d; ++j) os << ",r" << j;
  os << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    os << (i < ds.ids.size() ? ds.ids[i] : std::to_string(i)) << ',';
    if (ds.has_labels()) os << ds.labels[i];
    for (int j = 0; j < d; ++j) os << ',' << fmt(reps[i * d + j]);
    os << '\n';
  }
  return os.str();
}

void export_embeddings(const nn::ModelState& ckpt, const data::Dataset& ds,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write embeddings to '" + path.string() + "'");
  out << embeddings_csv(ckpt, ds);
}

}  // namespace tower::eval
