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

// Procedural "authentic" scenes, synthetic forgeries, and the on-disk dataset.
//
// Authentic scenes are band-limited: every component is a smooth function
// whose spectrum stays below roughly 3 * detail_scale cycles per image side.
// Forgeries paste content whose spectrum reaches well above that band
// (a donor scene at 4x detail, a same-image patch resampled at 2.5-3.5x, or
// fine-grained noise) through a feathered alpha matte.
//
// Images are [3, h, w] in [0, 1], quantized to 8-bit levels so PNG storage is
// lossless. Masks are [1, h, w] with values in {0, 1}.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rloop/tensor.hpp"

namespace rloop {

inline constexpr const char* kGeneratorVersion = "rloop-synth-1";

enum class Texture { kField = 0, kGradient = 1, kChecker = 2, kBlob = 3 };

struct SceneSpec {
  uint64_t seed = 0;
  int64_t resolution = 64;
  // Weights over {random field, gradient, checker, blob}; must sum to 1.
  std::array<double, 4> texture_mix{0.4, 0.2, 0.15, 0.25};
  double detail_scale = 1.0;
};

Tensor generate_real(const SceneSpec& spec, int64_t patch_size = 8);

enum class ForgeryKind { kSplice, kCopyMove, kNoiseFill, kNone };

std::string to_string(ForgeryKind kind);
ForgeryKind forgery_kind_from_string(const std::string& name);

struct ForgeryRecord {
  std::string id;
  Tensor image;  // [3, h, w]
  Tensor mask;   // [1, h, w]
  ForgeryKind kind = ForgeryKind::kNone;
  uint64_t source_seed = 0;  // scene seed of the authentic image
  uint64_t forge_seed = 0;
};

struct ForgeOptions {
  double area_min = 0.02;
  double area_max = 0.5;
  // When set, the region is drawn with this area fraction instead of
  // U[area_min, area_max].
  std::optional<double> area_target;
};

// `real` must be [3, h, w]; the returned record carries no id or source seed.
ForgeryRecord forge(const Tensor& real, ForgeryKind kind, uint64_t rng_seed,
                    const ForgeOptions& options = {});

enum class Split { kTrain, kVal, kTest, kPrior };

std::string to_string(Split split);
Split split_from_string(const std::string& name);

struct DatasetSpec {
  uint64_t seed = 0;
  int64_t n_train = 200;
  int64_t n_val = 50;
  int64_t n_test = 50;
  int64_t resolution = 64;
  // Fraction of records that are forged; the rest are authentic (kind none).
  double forged_fraction = 1.0;
};

struct SplitRecord {
  Split split = Split::kTrain;
  ForgeryRecord record;
};

// Deterministic in (spec, kGeneratorVersion). Records are generated in
// parallel and returned in split order, then index order.
std::vector<SplitRecord> generate_dataset(const DatasetSpec& spec);

// n authentic scenes for prior pretraining, from a seed stream disjoint from
// generate_dataset's.
std::vector<SplitRecord> generate_prior_set(uint64_t seed, int64_t n, int64_t resolution);

struct ManifestEntry {
  std::string id;
  Split split = Split::kTrain;
  std::string image_path;  // relative to the manifest directory
  std::string mask_path;
  ForgeryKind kind = ForgeryKind::kNone;
  uint64_t seed = 0;
  uint64_t forge_seed = 0;
  uint32_t image_crc32 = 0;
  uint32_t mask_crc32 = 0;
};

struct DatasetManifest {
  std::string generator_version = kGeneratorVersion;
  std::vector<ManifestEntry> records;
};

// Writes images/ and masks/ PNGs next to `manifest_path` and the manifest
// itself. Throws IngestionError when the split invariants do not hold.
DatasetManifest write_dataset(const std::vector<SplitRecord>& records,
                              const std::string& manifest_path);

DatasetManifest read_manifest(const std::string& manifest_path);
// Throws IngestionError if a path or scene seed appears in two splits.
void validate_manifest(const DatasetManifest& manifest, const std::string& manifest_path);

// Loads records in manifest order, optionally restricted to one split.
// Missing files and checksum mismatches raise IngestionError naming the file.
std::vector<ForgeryRecord> load_dataset(const std::string& manifest_path,
                                        std::optional<Split> split = std::nullopt);

// Stacks records into [n, 3, h, w] images and [n, 1, h, w] masks.
Tensor stack_images(const std::vector<ForgeryRecord>& records);
Tensor stack_masks(const std::vector<ForgeryRecord>& records);

}  // namespace rloop
