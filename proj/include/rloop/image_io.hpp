// Copyright 2026 The Realness Loop Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// 8-bit PNG and JPEG codecs for planar [channels, h, w] float images in [0, 1].

#include <cstdint>
#include <string>
#include <vector>

#include "rloop/tensor.hpp"

namespace rloop {

// Nearest representable 8-bit level, k / 255.
inline float quantize8(float v) {
  const float c = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
  return static_cast<float>(static_cast<int>(c * 255.0f + 0.5f)) / 255.0f;
}

// channels must be 1 or 3. Values are quantized with quantize8.
void write_png(const std::string& path, const Tensor& image);
// Returns [channels, h, w]; throws IngestionError on failure.
Tensor read_png(const std::string& path);

// Baseline JPEG encode + decode at `quality` (1..100), 4:4:4 sampling.
Tensor jpeg_round_trip(const Tensor& image, int quality);

uint32_t file_crc32(const std::string& path);

// Normalized Gaussian taps, size 2 * ceil(3 * sigma) + 1. sigma == 0 gives {1}.
std::vector<double> gaussian_kernel(double sigma);
// Per-channel Gaussian blur with reflect-101 borders; sigma == 0 copies.
Tensor gaussian_blur_image(const Tensor& image, double sigma);

}  // namespace rloop
