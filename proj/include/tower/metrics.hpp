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

#include <cstdint>
#include <span>

#include "tower/image.hpp"

namespace tower::metrics {

// Rank-based (Mann-Whitney) AUC of `scores` for binary labels in {0, 1}.
// Tied scores contribute 0.5. Throws MetricError unless both classes occur.
double auc(std::span<const double> scores, std::span<const int> labels);

// Multi-class AUC from row-major N x K class scores. Two classes use the
// score of class 1; more classes average the one-vs-rest AUCs.
double auc(std::span<const double> scores, std::span<const int> labels, int num_classes);

// 2|P & G| / (|P| + |G|) over nonzero entries; 1 when both are empty.
// Throws DataError on a size mismatch.
double dice(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth);
// Binarizes both images at 0.5 first. Throws DataError on a shape mismatch.
double dice(const Image& pred, const Image& truth);

}  // namespace tower::metrics
