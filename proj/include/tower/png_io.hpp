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

#include <filesystem>

#include "tower/image.hpp"

namespace tower::io {

// Decodes an 8-bit PNG into [0,1] floats. Gray and gray+alpha decode to one
// channel, everything else to RGB. Throws FormatError naming the file.
Image read_png(const std::filesystem::path& path);

// Writes 1- or 3-channel images as 8-bit PNG, value v -> round(255 v).
void write_png(const std::filesystem::path& path, const Image& img);

}  // namespace tower::io
