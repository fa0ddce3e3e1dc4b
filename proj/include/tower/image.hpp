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

#pragma once

#include <cstddef>
#include <vector>

namespace tower {

// Planar (channel-major) image with float intensities, normally in [0, 1].
struct Image {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(int c, int h, int w, float fill = 0.0f)
      : channels(c), height(h), width(w),
        pixels(static_cast<std::size_t>(c) * h * w, fill) {}

  std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
  std::size_t size() const { return pixels.size(); }
  bool empty() const { return pixels.empty(); }

  float& at(int c, int r, int col) {
    return pixels[static_cast<std::size_t>(c) * plane_size() +
                  static_cast<std::size_t>(r) * width + col];
  }
  float at(int c, int r, int col) const {
    return pixels[static_cast<std::size_t>(c) * plane_size() +
                  static_cast<std::size_t>(r) * width + col];
  }

  bool same_shape(const Image& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
  friend bool operator==(const Image&, const Image&) = default;
};

// Rescales every channel jointly so that the image spans [0, 1].
// A constant image maps to all zeros.
void minmax_normalize(Image& img);

// Mean over channels, as a single-channel image.
Image channel_mean(const Image& img);

// Throws DataError if any pixel lies outside [0 - slack, 1 + slack] or is
// not finite.
void check_normalized(const Image& img, float slack = 1e-6f);

}  // namespace tower
