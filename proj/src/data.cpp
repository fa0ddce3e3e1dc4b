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

#include "tower/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>

#include "tower/error.hpp"
#include "tower/png_io.hpp"
#include "tower/rng.hpp"

namespace tower::data {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::optional<int> parse_int(const std::string& s) {
  if (s.empty()) return std::nullopt;
  std::size_t pos = 0;
  try {
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IngestionError("cannot open '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::uint32_t be32(const std::string& b, std::size_t off) {
  return (static_cast<std::uint32_t>(static_cast<unsigned char>(b[off])) << 24) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 1])) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 2])) << 8) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 3]));
}

void put_be32(std::string& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<char>((v >> s) & 0xff));
}

struct IdxArray {
  std::vector<std::uint32_t> dims;
  std::size_t offset = 0;
};

IdxArray parse_idx_header(const std::string& bytes, const std::filesystem::path& p) {
  if (bytes.size() < 4) throw FormatError("IDX file '" + p.string() + "' is truncated");
  if (bytes[0] != 0 || bytes[1] != 0) throw FormatError("IDX magic mismatch in '" + p.string() + "'");
  if (static_cast<unsigned char>(bytes[2]) != 0x08) {
    throw FormatError("IDX file '" + p.string() + "' is not unsigned-byte data");
  }
  const int ndims = static_cast<unsigned char>(bytes[3]);
  if (ndims < 1 || ndims > 4) throw FormatError("IDX file '" + p.string() + "' has bad rank");
  IdxArray a;
  a.offset = 4 + 4 * static_cast<std::size_t>(ndims);
  if (bytes.size() < a.offset) throw FormatError("IDX file '" + p.string() + "' is truncated");
  std::size_t total = 1;
  for (int d = 0; d < ndims; ++d) {
    a.dims.push_back(be32(bytes, 4 + 4 * d));
    total *= a.dims.back();
  }
  if (bytes.size() - a.offset < total) {
    throw FormatError("IDX file '" + p.string() + "' is truncated");
  }
  if (bytes.size() - a.offset > total) {
    throw FormatError("IDX file '" + p.string() + "' has trailing bytes");
  }
  return a;
}

}  // namespace

std::string to_string(Modality m) {
  switch (m) {
    case Modality::kFundoscopic: return "fundoscopic";
    case Modality::kXray: return "xray";
    case Modality::kCt: return "ct";
    case Modality::kUltrasound: return "ultrasound";
    case Modality::kSynthetic: return "synthetic";
  }
  return "?";
}

Modality parse_modality(const std::string& s) {
  for (Modality m : {Modality::kFundoscopic, Modality::kXray, Modality::kCt, Modality::kUltrasound,
                     Modality::kSynthetic}) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("unknown modality '" + s + "'");
}

std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val" || s == "valid" || s == "validation") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw DataError("unknown split '" + s + "'");
}

std::vector<std::size_t> Dataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < splits.size(); ++i) {
    if (splits[i] == split) out.push_back(i);
  }
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> idx) const {
  Dataset d;
  d.modality = modality;
  d.num_classes = num_classes;
  for (std::size_t i : idx) {
    d.ids.push_back(ids[i]);
    d.images.push_back(images[i]);
    d.splits.push_back(splits[i]);
    if (has_labels()) d.labels.push_back(labels[i]);
    if (has_masks()) d.masks.push_back(masks[i]);
    if (!disc_centers.empty()) d.disc_centers.push_back(disc_centers[i]);
  }
  return d;
}

void Dataset::validate() const {
  const std::size_t n = images.size();
  if (ids.size() != n || splits.size() != n) throw DataError("dataset id/split arity mismatch");
  if (has_labels() && labels.size() != n) throw DataError("dataset label arity mismatch");
  if (has_masks() && masks.size() != n) throw DataError("dataset mask arity mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    if (!images[i].same_shape(images[0])) {
      throw DataError("image '" + ids[i] + "' has inconsistent dimensions");
    }
    if (has_masks() && (masks[i].height != images[i].height || masks[i].width != images[i].width)) {
      throw DataError("mask of '" + ids[i] + "' does not match its image");
    }
    if (has_labels() && (labels[i] < 0 || labels[i] >= num_classes)) {
      throw DataError("label of '" + ids[i] + "' out of range");
    }
  }
}

Dataset load_png_dir(const std::filesystem::path& dir, const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw IngestionError("cannot open manifest '" + manifest.string() + "'");
  Dataset ds;
  ds.modality = Modality::kFundoscopic;
  std::string line;
  int row = 0;
  bool label_kind_set = false;
  bool integer_labels = false;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty() || trim(line)[0] == '#') continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) cols.push_back(trim(col));
    if (row == 1 && cols.size() == 3 && cols[2] == "split") continue;
    if (cols.size() != 3) {
      throw IngestionError("manifest row " + std::to_string(row) + ": expected 3 columns, got " +
                           std::to_string(cols.size()));
    }
    const auto file = dir / cols[0];
    if (!std::filesystem::exists(file)) {
      throw IngestionError("manifest row " + std::to_string(row) + ": missing file '" +
                           file.string() + "'");
    }
    Image img;
    try {
      img = io::read_png(file);
    } catch (const FormatError& e) {
      throw IngestionError("manifest row " + std::to_string(row) + ": " + e.what());
    }
    if (!ds.images.empty() && !img.same_shape(ds.images.front())) {
      throw IngestionError("manifest row " + std::to_string(row) + ": '" + cols[0] +
                           "' has inconsistent dimensions");
    }
    const auto label = parse_int(cols[1]);
    if (!label_kind_set) {
      integer_labels = label.has_value();
      label_kind_set = true;
    } else if (integer_labels != label.has_value()) {
      throw IngestionError("manifest row " + std::to_string(row) + ": mixes labels and masks");
    }
    if (integer_labels) {
      if (*label < 0) {
        throw IngestionError("manifest row " + std::to_string(row) + ": negative label");
      }
      ds.labels.push_back(*label);
      ds.num_classes = std::max(ds.num_classes, *label + 1);
    } else {
      const auto mask_file = dir / cols[1];
      if (!std::filesystem::exists(mask_file)) {
        throw IngestionError("manifest row " + std::to_string(row) + ": missing mask '" +
                             mask_file.string() + "'");
      }
      Image m = channel_mean(io::read_png(mask_file));
      if (m.height != img.height || m.width != img.width) {
        throw IngestionError("manifest row " + std::to_string(row) +
                             ": mask dimensions differ from image");
      }
      for (float& v : m.pixels) v = v >= 0.5f ? 1.0f : 0.0f;
      ds.masks.push_back(std::move(m));
    }
    try {
      ds.splits.push_back(parse_split(cols[2]));
    } catch (const DataError& e) {
      throw IngestionError("manifest row " + std::to_string(row) + ": " + e.what());
    }
    ds.ids.push_back(cols[0]);
    ds.images.push_back(std::move(img));
  }
  ds.validate();
  return ds;
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::optional<int> num_classes) {
  const std::string ib = read_file(images);
  const std::string lb = read_file(labels);
  const IdxArray ia = parse_idx_header(ib, images);
  const IdxArray la = parse_idx_header(lb, labels);
  if (ia.dims.size() != 3 && ia.dims.size() != 4) {
    throw FormatError("IDX images need 3 or 4 dimensions");
  }
  if (la.dims.size() != 1) throw FormatError("IDX labels need 1 dimension");
  if (ia.dims[0] != la.dims[0]) {
    throw FormatError("IDX image count " + std::to_string(ia.dims[0]) + " != label count " +
                      std::to_string(la.dims[0]));
  }
  const int n = static_cast<int>(ia.dims[0]);
  const int h = static_cast<int>(ia.dims[1]);
  const int w = static_cast<int>(ia.dims[2]);
  const int c = ia.dims.size() == 4 ? static_cast<int>(ia.dims[3]) : 1;
  Dataset ds;
  ds.modality = Modality::kSynthetic;
  int max_label = -1;
  for (int i = 0; i < n; ++i) {
    const int label = static_cast<unsigned char>(lb[la.offset + i]);
    if (num_classes && label >= *num_classes) {
      throw FormatError("IDX label " + std::to_string(label) + " at index " + std::to_string(i) +
                        " is out of range for " + std::to_string(*num_classes) + " classes");
    }
    max_label = std::max(max_label, label);
    Image img(c, h, w);
    const std::size_t base = ia.offset + static_cast<std::size_t>(i) * h * w * c;
    for (int r = 0; r < h; ++r) {
      for (int col = 0; col < w; ++col) {
        for (int ch = 0; ch < c; ++ch) {
          const auto byte = static_cast<unsigned char>(
              ib[base + (static_cast<std::size_t>(r) * w + col) * c + ch]);
          img.at(ch, r, col) = byte / 255.0f;
        }
      }
    }
    ds.ids.push_back(std::to_string(i));
    ds.images.push_back(std::move(img));
    ds.labels.push_back(label);
    ds.splits.push_back(Split::kTrain);
  }
  ds.num_classes = num_classes.value_or(max_label + 1);
  return ds;
}

void write_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
               const Dataset& ds) {
  if (ds.images.empty()) throw DataError("cannot write an empty dataset");
  const Image& first = ds.images.front();
  std::string ib;
  ib.push_back(0);
  ib.push_back(0);
  ib.push_back(0x08);
  ib.push_back(first.channels == 1 ? 3 : 4);
  put_be32(ib, static_cast<std::uint32_t>(ds.size()));
  put_be32(ib, static_cast<std::uint32_t>(first.height));
  put_be32(ib, static_cast<std::uint32_t>(first.width));
  if (first.channels != 1) put_be32(ib, static_cast<std::uint32_t>(first.channels));
  for (const Image& img : ds.images) {
    if (!img.same_shape(first)) throw DataError("IDX export needs uniform image shapes");
    for (int r = 0; r < img.height; ++r) {
      for (int c = 0; c < img.width; ++c) {
        for (int ch = 0; ch < img.channels; ++ch) {
          const float v = std::clamp(img.at(ch, r, c), 0.0f, 1.0f);
          ib.push_back(static_cast<char>(std::lround(v * 255.0f)));
        }
      }
    }
  }
  std::string lbytes = {0, 0, 0x08, 1};
  put_be32(lbytes, static_cast<std::uint32_t>(ds.size()));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const int label = ds.has_labels() ? ds.labels[i] : 0;
    if (label < 0 || label > 255) throw DataError("IDX labels must fit in one byte");
    lbytes.push_back(static_cast<char>(label));
  }
  std::ofstream(images, std::ios::binary).write(ib.data(), static_cast<std::streamsize>(ib.size()));
  std::ofstream(labels, std::ios::binary)
      .write(lbytes.data(), static_cast<std::streamsize>(lbytes.size()));
}

namespace {

struct RenderedRetina {
  Image image;
  Image vessels;
  transform::PixelPos center;
  double vessel_fraction = 0.0;
};

RenderedRetina render_retina(int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  const double size = std::min(h, w);
  RenderedRetina out;
  Image img(1, h, w);
  Image vessels(1, h, w, 0.0f);

  // Background: vignetted field, a few low-frequency waves, pixel noise.
  const double base = rng.uniform(0.30, 0.42);
  struct Wave { double fr, fc, phase, amp; };
  std::vector<Wave> waves(3);
  for (Wave& wv : waves) {
    wv.fr = rng.uniform(0.5, 2.5) * 2.0 * std::numbers::pi / h;
    wv.fc = rng.uniform(0.5, 2.5) * 2.0 * std::numbers::pi / w;
    wv.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    wv.amp = rng.uniform(0.01, 0.03);
  }
  const double cr0 = (h - 1) / 2.0, cc0 = (w - 1) / 2.0;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double d2 = ((r - cr0) * (r - cr0) + (c - cc0) * (c - cc0)) / (0.5 * size * 0.5 * size);
      double v = base * (1.0 - 0.3 * std::min(d2, 2.0) / 2.0);
      for (const Wave& wv : waves) v += wv.amp * std::sin(wv.fr * r + wv.fc * c + wv.phase);
      img.at(0, r, c) = static_cast<float>(v);
    }
  }

  // Optic disc with a soft halo.
  const int margin = std::max(2, static_cast<int>(std::lround(0.2 * size)));
  const transform::PixelPos center{margin + static_cast<int>(rng.below(h - 2 * margin)),
                                   margin + static_cast<int>(rng.below(w - 2 * margin))};
  const double radius = std::max(1.5, 0.04 * size);
  const double halo = 2.5 * radius;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double d = std::hypot(r - center.row, c - center.col);
      double add = 0.15 * std::exp(-(d * d) / (2.0 * halo * halo));
      add += 0.45 / (1.0 + std::exp((d - radius) / 0.35));
      img.at(0, r, c) += static_cast<float>(add);
    }
  }

  // Vessels: curved random walks leaving the disc rim.
  const int count = 6 + static_cast<int>(rng.below(7));
  const double step = 0.5;
  const double half_width = 0.55;
  const double start_angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  std::vector<float> darkness(static_cast<std::size_t>(h) * w, 0.0f);
  for (int k = 0; k < count; ++k) {
    double angle = start_angle + 2.0 * std::numbers::pi * k / count + rng.uniform(-0.3, 0.3);
    double pr = center.row + radius * std::sin(angle);
    double pc = center.col + radius * std::cos(angle);
    const double length = rng.uniform(0.35, 0.75) * size;
    const float contrast = static_cast<float>(rng.uniform(0.16, 0.26));
    double curvature = rng.uniform(-0.02, 0.02);
    for (double travelled = 0.0; travelled < length; travelled += step) {
      if (pr < -1 || pc < -1 || pr > h || pc > w) break;
      const int r = static_cast<int>(std::lround(pr));
      const int c = static_cast<int>(std::lround(pc));
      for (int rr = r - 1; rr <= r + 1; ++rr) {
        for (int cc = c - 1; cc <= c + 1; ++cc) {
          if (rr < 0 || cc < 0 || rr >= h || cc >= w) continue;
          if (std::hypot(rr - pr, cc - pc) > half_width) continue;
          if (std::hypot(rr - center.row, cc - center.col) <= radius) continue;
          vessels.at(0, rr, cc) = 1.0f;
          float& dk = darkness[static_cast<std::size_t>(rr) * w + cc];
          dk = std::max(dk, contrast);
        }
      }
      curvature += rng.uniform(-0.003, 0.003);
      angle += curvature;
      pr += step * std::sin(angle);
      pc += step * std::cos(angle);
    }
  }
  for (std::size_t i = 0; i < darkness.size(); ++i) img.pixels[i] -= darkness[i];
  for (float& p : img.pixels) p += static_cast<float>(0.02 * rng.normal());
  for (float& p : img.pixels) p = std::clamp(p, 0.0f, 1.0f);
  minmax_normalize(img);

  out.image = std::move(img);
  out.center = center;
  out.vessel_fraction =
      std::accumulate(vessels.pixels.begin(), vessels.pixels.end(), 0.0) / vessels.size();
  out.vessels = std::move(vessels);
  return out;
}

}  // namespace

Dataset gen_synthetic_retina(const RetinaConfig& cfg) {
  if (cfg.n < 1) throw ConfigError("synthetic dataset needs n >= 1");
  if (cfg.height < 8 || cfg.width < 8) throw ConfigError("synthetic images must be at least 8x8");
  Dataset ds;
  ds.modality = Modality::kSynthetic;
  ds.num_classes = 2;
  std::vector<double> fractions;
  for (int i = 0; i < cfg.n; ++i) {
    RenderedRetina r = render_retina(cfg.height, cfg.width, derive_seed(cfg.seed, i));
    ds.ids.push_back("retina_" + std::to_string(i));
    ds.images.push_back(std::move(r.image));
    ds.masks.push_back(std::move(r.vessels));
    ds.disc_centers.push_back(r.center);
    fractions.push_back(r.vessel_fraction);
  }
  // Label 1 for the denser half; ties resolve by index.
  std::vector<std::size_t> order(cfg.n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return fractions[a] < fractions[b]; });
  ds.labels.assign(cfg.n, 0);
  for (std::size_t k = cfg.n / 2; k < order.size(); ++k) ds.labels[order[k]] = 1;
  ds.splits.assign(cfg.n, Split::kTrain);
  assign_splits(ds, cfg.val_fraction, cfg.test_fraction, derive_seed(cfg.seed, 0x5b117));
  return ds;
}

Dataset gen_synthetic_retina(int n, int height, int width, std::uint64_t seed) {
  RetinaConfig cfg;
  cfg.n = n;
  cfg.height = height;
  cfg.width = width;
  cfg.seed = seed;
  return gen_synthetic_retina(cfg);
}

void assign_splits(Dataset& ds, double val_fraction, double test_fraction, std::uint64_t seed) {
  if (val_fraction < 0 || test_fraction < 0 || val_fraction + test_fraction > 1) {
    throw ConfigError("split fractions must be non-negative and sum to at most 1");
  }
  const std::size_t n = ds.size();
  // Per-class assignment when labels exist, so every split sees every class.
  std::vector<std::vector<std::size_t>> groups(ds.has_labels() ? std::max(ds.num_classes, 1) : 1);
  for (std::size_t i = 0; i < n; ++i) {
    const int k = ds.has_labels() ? ds.labels[i] : 0;
    if (k < 0) throw DataError("negative label for '" + ds.ids[i] + "'");
    if (k >= static_cast<int>(groups.size())) groups.resize(k + 1);
    groups[k].push_back(i);
  }
  Rng rng(seed);
  ds.splits.assign(n, Split::kTrain);
  for (auto& order : groups) {
    rng.shuffle(std::span<std::size_t>(order));
    const std::size_t m = order.size();
    const auto n_test = static_cast<std::size_t>(std::lround(test_fraction * m));
    const auto n_val = static_cast<std::size_t>(std::lround(val_fraction * m));
    for (std::size_t k = 0; k < m; ++k) {
      if (k < n_test) {
        ds.splits[order[k]] = Split::kTest;
      } else if (k < n_test + n_val) {
        ds.splits[order[k]] = Split::kVal;
      }
    }
  }
}

std::vector<std::size_t> stratified_subsample(const Dataset& ds,
                                              std::span<const std::size_t> pool,
                                              double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ConfigError("label fraction must be in (0, 1]");
  }
  if (!ds.has_labels()) {
    // Unlabelled (segmentation) data: plain seeded subsample.
    std::vector<std::size_t> all(pool.begin(), pool.end());
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(all));
    const auto keep = static_cast<std::size_t>(std::ceil(fraction * all.size()));
    all.resize(std::max<std::size_t>(1, std::min(keep, all.size())));
    std::sort(all.begin(), all.end());
    return all;
  }
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i : pool) by_class[ds.labels[i]].push_back(i);
  std::vector<std::size_t> out;
  Rng rng(seed);
  for (int k = 0; k < ds.num_classes; ++k) {
    auto& members = by_class[k];
    rng.shuffle(std::span<std::size_t>(members));
    const auto keep = static_cast<std::size_t>(std::ceil(fraction * members.size() - 1e-9));
    if (keep == 0) {
      throw StratificationError("class " + std::to_string(k) +
                                " has no samples at label fraction " + std::to_string(fraction));
    }
    out.insert(out.end(), members.begin(), members.begin() + keep);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::uint64_t dataset_hash(const Dataset& ds) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Image& img = ds.images[i];
    const int dims[3] = {img.channels, img.height, img.width};
    feed(dims, sizeof(dims));
    feed(img.pixels.data(), img.pixels.size() * sizeof(float));
    if (ds.has_labels()) feed(&ds.labels[i], sizeof(int));
    if (ds.has_masks()) feed(ds.masks[i].pixels.data(), ds.masks[i].pixels.size() * sizeof(float));
  }
  return h;
}

}  // namespace tower::data
