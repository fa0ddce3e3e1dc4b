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

#include "tower/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tower/error.hpp"

namespace tower {

void minmax_normalize(Image& img) {
  if (img.empty()) return;
  auto [lo, hi] = std::minmax_element(img.pixels.begin(), img.pixels.end());
  const float lo_v = *lo;
  const float range = *hi - *lo;
  if (range <= 0.0f) {
    std::fill(img.pixels.begin(), img.pixels.end(), 0.0f);
    return;
  }
  for (float& p : img.pixels) p = (p - lo_v) / range;
}

Image channel_mean(const Image& img) {
  if (img.channels == 1) return img;
  Image out(1, img.height, img.width);
  const std::size_t plane = img.plane_size();
  for (std::size_t i = 0; i < plane; ++i) {
    float s = 0.0f;
    for (int c = 0; c < img.channels; ++c) s += img.pixels[c * plane + i];
    out.pixels[i] = s / static_cast<float>(img.channels);
  }
  return out;
}

void check_normalized(const Image& img, float slack) {
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const float p = img.pixels[i];
    if (!std::isfinite(p) || p < -slack || p > 1.0f + slack) {
      throw DataError("pixel " + std::to_string(i) + " has value " + std::to_string(p) +
                      " outside the normalized range [0, 1]");
    }
  }
}

}  // namespace tower
