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

#include "tower/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#include "tower/augment.hpp"
#include "tower/error.hpp"
#include "tower/losses.hpp"
#include "tower/rng.hpp"

namespace tower::train {
namespace {

constexpr std::uint64_t kInitStream = 0x1417;
constexpr std::uint64_t kShuffleStream = 1;
constexpr std::uint64_t kPlanStream = 2;
constexpr std::uint64_t kValPlanStream = 3;
constexpr std::uint64_t kCarveStream = 4;

struct Losses {
  double con = 0.0;
  double gen = 0.0;
  double total = 0.0;
};

Losses run_batch(nn::ModelState& state, const nn::Tensor& x, const nn::Tensor& xt,
                 const TrainConfig& cfg, bool do_backward) {
  const Arm arm = cfg.arm();
  nn::Graph g;
  nn::BoundModel<float> model(g, state);
  const nn::Var view = g.input(xt);
  const auto enc_t = nn::forward_encoder(model, view);
  Losses out;
  nn::Var con;
  nn::Var gen;
  if (uses_generative(arm)) {
    const nn::Var rec = nn::forward_decoder(model, enc_t);
    gen = loss::mse_restoration(rec, g.input(x));
    out.gen = gen.value()[0];
  }
  if (uses_contrastive(arm)) {
    const auto enc_x = nn::forward_encoder(model, g.input(x));
    const nn::Var z = nn::forward_head(model, enc_x.representation);
    const nn::Var z_t = nn::forward_head(model, enc_t.representation);
    con = loss::info_nce(z, z_t, static_cast<float>(cfg.tau), cfg.symmetric_nce);
    out.con = con.value()[0];
  }
  nn::Var total;
  if (con.valid() && gen.valid()) {
    total = loss::tower_loss(con, gen, static_cast<float>(cfg.lambda));
  } else {
    total = con.valid() ? con : gen;
  }
  out.total = total.value()[0];
  if (!std::isfinite(out.total)) throw NumericError("non-finite training loss");
  if (do_backward) {
    state.zero_grad();
    g.backward(total);
  }
  return out;
}

// Splits `idx` into consecutive batches of `size`; a trailing batch smaller
// than `min_size` is merged into its predecessor.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& idx, int size,
                                                   int min_size) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < idx.size(); i += size) {
    const std::size_t end = std::min(idx.size(), i + size);
    out.emplace_back(idx.begin() + i, idx.begin() + end);
  }
  if (out.size() > 1 && static_cast<int>(out.back().size()) < min_size) {
    auto& prev = out[out.size() - 2];
    prev.insert(prev.end(), out.back().begin(), out.back().end());
    out.pop_back();
  }
  return out;
}

std::string image_id(const data::Dataset& ds, std::size_t i) {
  return i < ds.ids.size() ? ds.ids[i] : std::to_string(i);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

double cosine_lr(int epoch, int total_epochs, double lr_init, double lr_min) {
  if (total_epochs <= 0) return lr_init;
  const double t = static_cast<double>(epoch) / total_epochs;
  return lr_min + 0.5 * (lr_init - lr_min) * (1.0 + std::cos(std::numbers::pi * t));
}

void adam_step(nn::ModelState& state, double lr, const AdamConfig& cfg,
               std::span<const nn::Part> frozen) {
  auto is_frozen = [&](const std::string& name) {
    return std::find(frozen.begin(), frozen.end(), nn::owner_of(name)) != frozen.end();
  };
  for (const auto& p : state.params) {
    if (!is_frozen(p.name) && (!p.has_grad || p.grad.shape != p.value.shape)) {
      throw UsageError("adam_step: parameter '" + p.name + "' has no gradient");
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& p : state.params) {
    if (is_frozen(p.name)) continue;
    if (p.adam_m.shape != p.value.shape) p.adam_m = nn::Tensor(p.value.shape);
    if (p.adam_v.shape != p.value.shape) p.adam_v = nn::Tensor(p.value.shape);
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      const double m = cfg.beta1 * p.adam_m[i] + (1.0 - cfg.beta1) * g;
      const double v = cfg.beta2 * p.adam_v[i] + (1.0 - cfg.beta2) * g * g;
      p.adam_m[i] = static_cast<float>(m);
      p.adam_v[i] = static_cast<float>(v);
      const double step = lr * (m / c1) / (std::sqrt(v / c2) + cfg.eps);
      p.value[i] = static_cast<float>(p.value[i] - step);
    }
  }
}

double grad_norm(const nn::ModelState& state) {
  double sq = 0.0;
  for (const auto& p : state.params) {
    if (!p.has_grad) continue;
    for (float g : p.grad.data) sq += static_cast<double>(g) * g;
  }
  return std::sqrt(sq);
}

double clip_grad_norm(nn::ModelState& state, double max_norm) {
  const double norm = grad_norm(state);
  if (max_norm > 0.0 && norm > max_norm) {
    const float s = static_cast<float>(max_norm / norm);
    for (auto& p : state.params) {
      if (!p.has_grad) continue;
      for (float& g : p.grad.data) g *= s;
    }
  }
  return norm;
}

nn::Tensor stack_images(std::span<const Image> images, std::span<const std::size_t> idx) {
  if (idx.empty()) throw UsageError("stack_images: empty selection");
  const Image& first = images[idx[0]];
  nn::Tensor t({static_cast<int>(idx.size()), first.channels, first.height, first.width});
  const std::size_t per = first.size();
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const Image& img = images[idx[k]];
    if (!img.same_shape(first)) throw DataError("stack_images: images differ in shape");
    std::copy(img.pixels.begin(), img.pixels.end(), t.data.begin() + k * per);
  }
  return t;
}

nn::Tensor stack_images(std::span<const Image> images) {
  std::vector<std::size_t> idx(images.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return stack_images(images, idx);
}

bool EpochRecord::same_values(const EpochRecord& o) const {
  return epoch == o.epoch && lr == o.lr && loss_con == o.loss_con && loss_gen == o.loss_gen &&
         loss_total == o.loss_total && val_con == o.val_con && val_gen == o.val_gen &&
         val_total == o.val_total;
}

std::string RunMetrics::to_csv() const {
  std::ostringstream os;
  os << "epoch,lr,loss_con,loss_gen,loss_total,val_total\n";
  for (const auto& e : epochs) {
    os << e.epoch << ',' << fmt(e.lr) << ',' << fmt(e.loss_con) << ',' << fmt(e.loss_gen) << ','
       << fmt(e.loss_total) << ',' << fmt(e.val_total) << '\n';
  }
  return os.str();
}

bool RunMetrics::same_values(const RunMetrics& o) const {
  if (epochs.size() != o.epochs.size() || best_epoch != o.best_epoch || best_val != o.best_val ||
      early_stopped != o.early_stopped) {
    return false;
  }
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    if (!epochs[i].same_values(o.epochs[i])) return false;
  }
  return true;
}

nn::ModelState initial_state(const TrainConfig& cfg, int channels) {
  return nn::ModelState::init(cfg.model_config(channels), derive_seed(cfg.seed, kInitStream));
}

PretrainResult pretrain(const TrainConfig& cfg, const data::Dataset& ds,
                        const PretrainOptions& options) {
  cfg.validate();
  ds.validate();
  if (ds.size() == 0) throw DataError("pretrain: dataset is empty");
  const Arm arm = cfg.arm();
  const int min_batch = uses_contrastive(arm) ? 2 : 1;

  std::vector<std::size_t> train_idx = ds.indices(data::Split::kTrain);
  std::vector<std::size_t> val_idx = ds.indices(data::Split::kVal);
  if (val_idx.empty() && cfg.val_fraction > 0.0) {
    Rng carve(derive_seed(cfg.seed, kCarveStream));
    carve.shuffle(std::span<std::size_t>(train_idx));
    auto n_val = static_cast<std::size_t>(std::lround(cfg.val_fraction * train_idx.size()));
    n_val = std::max<std::size_t>(n_val, min_batch);
    if (n_val + min_batch <= train_idx.size()) {
      val_idx.assign(train_idx.begin(), train_idx.begin() + n_val);
      train_idx.erase(train_idx.begin(), train_idx.begin() + n_val);
      std::sort(val_idx.begin(), val_idx.end());
      std::sort(train_idx.begin(), train_idx.end());
    }
  }
  if (static_cast<int>(train_idx.size()) < min_batch) {
    throw DataError("pretrain: not enough training images for one batch");
  }
  if (!val_idx.empty() && static_cast<int>(val_idx.size()) < min_batch) val_idx.clear();

  const Image& ref = ds.images[train_idx[0]];
  const augment::AugmentConfig aug = cfg.augment_config(ref.height, ref.width, ds.modality);
  const augment::ProxyMode mode = proxy_mode(arm);
  const int res = cfg.translation_resolution;

  nn::ModelState state = initial_state(cfg, ref.channels);

  std::ofstream plan_log;
  if (options.output_dir) {
    std::filesystem::create_directories(*options.output_dir);
    if (options.log_plans) plan_log.open(*options.output_dir / "plans.log", std::ios::trunc);
  }

  auto transform_batch = [&](const std::vector<std::size_t>& batch,
                             const std::vector<augment::TransformPlan>& plans) {
    std::vector<Image> views;
    views.reserve(batch.size());
    for (std::size_t k = 0; k < batch.size(); ++k) {
      views.push_back(augment::apply_plan(ds.images[batch[k]], plans[k], res));
    }
    return stack_images(views);
  };

  // Validation views are sampled once so val losses are comparable.
  std::vector<augment::TransformPlan> val_plans;
  {
    Rng rng(derive_seed(cfg.seed, kValPlanStream));
    for (std::size_t i : val_idx) {
      val_plans.push_back(augment::sample_plan(rng, mode, aug, image_id(ds, i), ref.channels));
    }
  }
  auto val_batches = make_batches(val_idx, cfg.batch_size, min_batch);

  PretrainResult result;
  RunMetrics& metrics = result.metrics;
  double best = 0.0;
  int stale = 0;
  int steps = 0;
  bool step_limit = false;

  for (int epoch = 0; epoch < cfg.epochs && !step_limit; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = cosine_lr(epoch, cfg.epochs, cfg.lr_init, cfg.lr_min);
    std::vector<std::size_t> order = train_idx;
    Rng shuffle(derive_seed(cfg.seed, kShuffleStream, epoch));
    shuffle.shuffle(std::span<std::size_t>(order));
    Rng plan_rng(derive_seed(cfg.seed, kPlanStream, epoch));

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    std::size_t seen = 0;
    const auto batches = make_batches(order, cfg.batch_size, min_batch);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& batch = batches[b];
      std::vector<augment::TransformPlan> plans;
      for (std::size_t i : batch) {
        plans.push_back(augment::sample_plan(plan_rng, mode, aug, image_id(ds, i), ref.channels));
      }
      if (plan_log.is_open()) {
        for (const auto& p : plans) {
          plan_log << "epoch=" << epoch << " batch=" << b << ' ' << augment::serialize(p) << '\n';
        }
      }
      Losses l;
      try {
        l = run_batch(state, stack_images(ds.images, batch), transform_batch(batch, plans), cfg,
                      true);
      } catch (const NumericError& e) {
        std::string where = "(no output directory)";
        if (options.output_dir) {
          const auto path = *options.output_dir / "nan_dump.log";
          std::ofstream dump(path, std::ios::trunc);
          dump << "epoch=" << epoch << " batch=" << b << " error=" << e.what() << '\n';
          for (const auto& p : plans) dump << augment::serialize(p) << '\n';
          where = path.string();
        }
        throw NumericError(std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(b) + "; plans dumped to " + where);
      }
      clip_grad_norm(state, cfg.clip_norm);
      adam_step(state, lr);
      result.step_losses.push_back(l.total);
      const double w = static_cast<double>(batch.size());
      rec.loss_con += l.con * w;
      rec.loss_gen += l.gen * w;
      rec.loss_total += l.total * w;
      seen += batch.size();
      if (options.max_steps && ++steps >= *options.max_steps) {
        step_limit = true;
        break;
      }
    }
    rec.loss_con /= seen;
    rec.loss_gen /= seen;
    rec.loss_total /= seen;

    if (val_batches.empty()) {
      rec.val_con = rec.loss_con;
      rec.val_gen = rec.loss_gen;
      rec.val_total = rec.loss_total;
    } else {
      std::size_t off = 0;
      std::size_t n = 0;
      for (const auto& batch : val_batches) {
        std::vector<augment::TransformPlan> plans(val_plans.begin() + off,
                                                  val_plans.begin() + off + batch.size());
        off += batch.size();
        const Losses l = run_batch(state, stack_images(ds.images, batch),
                                   transform_batch(batch, plans), cfg, false);
        const double w = static_cast<double>(batch.size());
        rec.val_con += l.con * w;
        rec.val_gen += l.gen * w;
        rec.val_total += l.total * w;
        n += batch.size();
      }
      rec.val_con /= n;
      rec.val_gen /= n;
      rec.val_total /= n;
    }
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    metrics.epochs.push_back(rec);
    if (options.verbose) {
      std::cerr << "epoch " << epoch << " lr " << fmt(lr) << " train " << fmt(rec.loss_total)
                << " val " << fmt(rec.val_total) << " (" << fmt(rec.wall_seconds) << " s)\n";
    }

    if (metrics.best_epoch < 0 || rec.val_total < best) {
      best = rec.val_total;
      metrics.best_epoch = epoch;
      metrics.best_val = best;
      result.best = state;
      stale = 0;
      if (options.output_dir) nn::save_checkpoint(state, *options.output_dir / "best.ckpt");
    } else if (++stale >= cfg.patience) {
      metrics.early_stopped = true;
      break;
    }
  }

  result.last = state;
  if (options.output_dir) {
    nn::save_checkpoint(state, *options.output_dir / "final.ckpt");
    std::ofstream(*options.output_dir / "metrics.csv", std::ios::trunc) << metrics.to_csv();
  }
  return result;
}

}  // namespace tower::train
