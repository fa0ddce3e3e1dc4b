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

#include "tower/augment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <numbers>
#include <sstream>

#include "tower/error.hpp"

namespace tower::augment {
namespace {

constexpr std::uint64_t kMaskStream = 1;
constexpr std::uint64_t kNoiseStream = 2;

std::string hex(double v) {
  std::ostringstream os;
  os << std::hexfloat << v;
  return os.str();
}

double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw FormatError("bad number '" + s + "' in plan");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

Image rotate(const Image& img, double degrees) {
  const double a = degrees * std::numbers::pi / 180.0;
  const double ca = std::cos(a);
  const double sa = std::sin(a);
  const double cr = (img.height - 1) / 2.0;
  const double cc = (img.width - 1) / 2.0;
  Image out(img.channels, img.height, img.width, 0.0f);
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      // Inverse map the destination pixel into the source.
      const double y = r - cr;
      const double x = c - cc;
      const double sr = ca * y - sa * x + cr;
      const double sc = sa * y + ca * x + cc;
      const int r0 = static_cast<int>(std::floor(sr));
      const int c0 = static_cast<int>(std::floor(sc));
      const double fr = sr - r0;
      const double fc = sc - c0;
      for (int ch = 0; ch < img.channels; ++ch) {
        double v = 0.0;
        for (int dr = 0; dr <= 1; ++dr) {
          for (int dc = 0; dc <= 1; ++dc) {
            const int rr = r0 + dr;
            const int cc2 = c0 + dc;
            if (rr < 0 || cc2 < 0 || rr >= img.height || cc2 >= img.width) continue;
            const double w = (dr ? fr : 1.0 - fr) * (dc ? fc : 1.0 - fc);
            v += w * img.at(ch, rr, cc2);
          }
        }
        out.at(ch, r, c) = static_cast<float>(v);
      }
    }
  }
  return out;
}

Image flip(const Image& img, bool horizontal, bool vertical, bool diagonal) {
  Image out = img;
  if (diagonal && img.height != img.width) diagonal = false;
  for (int ch = 0; ch < img.channels; ++ch) {
    for (int r = 0; r < img.height; ++r) {
      for (int c = 0; c < img.width; ++c) {
        int sr = r;
        int sc = c;
        if (diagonal) std::swap(sr, sc);
        if (vertical) sr = img.height - 1 - sr;
        if (horizontal) sc = img.width - 1 - sc;
        out.at(ch, r, c) = img.at(ch, sr, sc);
      }
    }
  }
  return out;
}

}  // namespace

std::string to_string(ProxyMode mode) {
  switch (mode) {
    case ProxyMode::kTowerNl: return "tower_nl";
    case ProxyMode::kTowerM: return "tower_m";
    case ProxyMode::kTowerNlM: return "tower_nl+m";
    case ProxyMode::kClassic: return "classic";
  }
  return "?";
}

ProxyMode parse_proxy_mode(const std::string& s) {
  if (s == "tower_nl") return ProxyMode::kTowerNl;
  if (s == "tower_m") return ProxyMode::kTowerM;
  if (s == "tower_nl+m") return ProxyMode::kTowerNlM;
  if (s == "classic") return ProxyMode::kClassic;
  throw ConfigError("unknown transform mode '" + s + "'");
}

TransformPlan sample_plan(Rng& rng, ProxyMode mode, const AugmentConfig& cfg,
                          std::string image_id, int channels) {
  TransformPlan plan;
  plan.image_id = std::move(image_id);
  plan.seed = rng.next_u64();
  const bool translate = mode == ProxyMode::kTowerNl || mode == ProxyMode::kTowerNlM;
  const bool mask = mode == ProxyMode::kTowerM || mode == ProxyMode::kTowerNlM;
  if (translate) {
    const int n = cfg.per_channel_translation ? std::max(1, channels) : 1;
    for (int c = 0; c < n; ++c) {
      plan.control_points.push_back(transform::sample_control_points(rng, cfg.direction));
    }
  }
  if (mask) {
    transform::validate(cfg.mask);
    plan.mask_spec = cfg.mask;
  }
  if (mode == ProxyMode::kClassic) {
    ClassicOps ops;
    const double p = cfg.op_probability;
    if (rng.bernoulli(p)) ops.rotation_deg = rng.uniform(-cfg.max_rotation_deg, cfg.max_rotation_deg);
    ops.flip_horizontal = rng.bernoulli(p);
    ops.flip_vertical = rng.bernoulli(p);
    ops.flip_diagonal = rng.bernoulli(p);
    if (rng.bernoulli(p)) ops.noise_sigma = rng.uniform(0.0, cfg.max_noise_sigma);
    if (rng.bernoulli(p)) {
      ops.brightness = rng.uniform(1.0 - cfg.jitter, 1.0 + cfg.jitter);
      ops.contrast = rng.uniform(1.0 - cfg.jitter, 1.0 + cfg.jitter);
    }
    plan.classic_ops = ops;
  }
  return plan;
}

Image apply_classic(const Image& img, const ClassicOps& ops, std::uint64_t seed) {
  if (ops.is_identity()) return img;
  Image out = img;
  if (ops.rotation_deg != 0.0) out = rotate(out, ops.rotation_deg);
  if (ops.flip_horizontal || ops.flip_vertical || ops.flip_diagonal) {
    out = flip(out, ops.flip_horizontal, ops.flip_vertical, ops.flip_diagonal);
  }
  if (ops.noise_sigma > 0.0) {
    Rng noise(derive_seed(seed, kNoiseStream));
    for (float& p : out.pixels) p = static_cast<float>(p + ops.noise_sigma * noise.normal());
  }
  if (ops.brightness != 1.0 || ops.contrast != 1.0) {
    for (float& p : out.pixels) {
      p = static_cast<float>((ops.contrast * (p - 0.5) + 0.5) * ops.brightness);
    }
  }
  for (float& p : out.pixels) p = std::clamp(p, 0.0f, 1.0f);
  return out;
}

PlanStages apply_plan_stages(const Image& img, const TransformPlan& plan,
                             int translation_resolution) {
  check_normalized(img);
  PlanStages st;
  if (plan.control_points.empty()) {
    st.translated = img;
  } else {
    std::vector<transform::TranslationTable> tables;
    tables.reserve(plan.control_points.size());
    for (const auto& cp : plan.control_points) {
      tables.push_back(transform::TranslationTable::build(cp, translation_resolution));
    }
    st.translated = transform::apply_translation(img, tables);
  }
  if (plan.mask_spec) {
    Rng mask_rng(derive_seed(plan.seed, kMaskStream));
    st.mask = transform::make_mask(*plan.mask_spec, img, mask_rng);
    st.masked = transform::apply_mask(st.translated, st.mask);
  } else {
    st.mask = transform::all_ones_mask(img.height, img.width);
    st.masked = st.translated;
  }
  st.output = plan.classic_ops ? apply_classic(st.masked, *plan.classic_ops, plan.seed) : st.masked;
  return st;
}

Image apply_plan(const Image& img, const TransformPlan& plan, int translation_resolution) {
  return apply_plan_stages(img, plan, translation_resolution).output;
}

std::string serialize(const TransformPlan& plan) {
  std::ostringstream os;
  os << "id=" << (plan.image_id.empty() ? "-" : plan.image_id) << " seed=" << plan.seed;
  os << " cp=";
  if (plan.control_points.empty()) {
    os << "none";
  } else {
    for (std::size_t i = 0; i < plan.control_points.size(); ++i) {
      const auto& cp = plan.control_points[i];
      if (i) os << '|';
      os << hex(cp.p0.x) << ';' << hex(cp.p0.y) << ';' << hex(cp.p1.x) << ';' << hex(cp.p1.y)
         << ';' << hex(cp.p2.x) << ';' << hex(cp.p2.y) << ';' << hex(cp.p3.x) << ';'
         << hex(cp.p3.y);
    }
  }
  os << " mask=";
  if (!plan.mask_spec) {
    os << "none";
  } else {
    const auto& m = *plan.mask_spec;
    os << transform::to_string(m.kind) << ';' << m.num_rays << ';' << m.ray_thickness << ';'
       << m.disc_radius << ';' << transform::to_string(m.stripe_orientation) << ';'
       << m.stripe_width << ';' << m.block_size << ';' << hex(m.mask_ratio);
  }
  os << " classic=";
  if (!plan.classic_ops) {
    os << "none";
  } else {
    const auto& c = *plan.classic_ops;
    os << hex(c.rotation_deg) << ';' << c.flip_horizontal << ';' << c.flip_vertical << ';'
       << c.flip_diagonal << ';' << hex(c.noise_sigma) << ';' << hex(c.brightness) << ';'
       << hex(c.contrast);
  }
  return os.str();
}

TransformPlan parse_plan(const std::string& line) {
  std::map<std::string, std::string> fields;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw FormatError("plan token without '=': " + tok);
    fields[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  for (const char* key : {"id", "seed", "cp", "mask", "classic"}) {
    if (!fields.count(key)) throw FormatError(std::string("plan line lacks '") + key + "'");
  }
  TransformPlan plan;
  plan.image_id = fields["id"] == "-" ? "" : fields["id"];
  plan.seed = std::stoull(fields["seed"]);
  if (fields["cp"] != "none") {
    for (const std::string& part : split(fields["cp"], '|')) {
      const auto v = split(part, ';');
      if (v.size() != 8) throw FormatError("control points need 8 coordinates");
      transform::ControlPoints cp;
      cp.p0 = {parse_double(v[0]), parse_double(v[1])};
      cp.p1 = {parse_double(v[2]), parse_double(v[3])};
      cp.p2 = {parse_double(v[4]), parse_double(v[5])};
      cp.p3 = {parse_double(v[6]), parse_double(v[7])};
      plan.control_points.push_back(cp);
    }
  }
  if (fields["mask"] != "none") {
    const auto v = split(fields["mask"], ';');
    if (v.size() != 8) throw FormatError("mask spec needs 8 fields");
    transform::MaskSpec m;
    m.kind = transform::parse_mask_kind(v[0]);
    m.num_rays = std::stoi(v[1]);
    m.ray_thickness = std::stoi(v[2]);
    m.disc_radius = std::stoi(v[3]);
    m.stripe_orientation = transform::parse_stripe_orientation(v[4]);
    m.stripe_width = std::stoi(v[5]);
    m.block_size = std::stoi(v[6]);
    m.mask_ratio = parse_double(v[7]);
    plan.mask_spec = m;
  }
  if (fields["classic"] != "none") {
    const auto v = split(fields["classic"], ';');
    if (v.size() != 7) throw FormatError("classic ops need 7 fields");
    ClassicOps c;
    c.rotation_deg = parse_double(v[0]);
    c.flip_horizontal = v[1] == "1";
    c.flip_vertical = v[2] == "1";
    c.flip_diagonal = v[3] == "1";
    c.noise_sigma = parse_double(v[4]);
    c.brightness = parse_double(v[5]);
    c.contrast = parse_double(v[6]);
    plan.classic_ops = c;
  }
  return plan;
}

}  // namespace tower::augment
