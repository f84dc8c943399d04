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

#include "rloop/synth_data.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "gtest/gtest.h"
#include "json.hpp"
#include "rloop/errors.hpp"
#include "rloop/image_io.hpp"

namespace rloop {
namespace {

namespace fs = std::filesystem;

fs::path ScratchDir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("rloop_synth_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TEST(GenerateRealTest, DeterministicAndSeedSensitive) {
  SceneSpec spec{7, 64};
  const Tensor a = generate_real(spec), b = generate_real(spec);
  EXPECT_EQ(a, b);
  spec.seed = 8;
  EXPECT_NE(generate_real(spec), a);
  EXPECT_EQ(a.shape(), (Shape{3, 64, 64}));
  for (float v : a.values()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
    EXPECT_EQ(v, quantize8(v));
  }
}

TEST(GenerateRealTest, GradientOnlyIsRamp) {
  SceneSpec spec{3, 32, {0.0, 1.0, 0.0, 0.0}};
  const Tensor img = generate_real(spec);
  for (int c = 0; c < 3; ++c) {
    float lo = 1.0f, hi = 0.0f;
    for (int64_t i = 0; i < 32 * 32; ++i) {
      lo = std::min(lo, img[c * 1024 + i]);
      hi = std::max(hi, img[c * 1024 + i]);
    }
    EXPECT_GT(hi - lo, 0.0f);
    // Second differences of an affine ramp vanish up to quantization.
    for (int64_t y = 0; y < 32; ++y) {
      for (int64_t x = 1; x + 1 < 32; ++x) {
        const float* row = img.data() + c * 1024 + y * 32;
        EXPECT_LE(std::fabs(row[x - 1] - 2 * row[x] + row[x + 1]), 2.0f / 255.0f + 1e-6f);
      }
    }
  }
}

TEST(GenerateRealTest, RejectsBadResolution) {
  EXPECT_THROW(generate_real(SceneSpec{1, 16}), ConfigError);
  EXPECT_THROW(generate_real(SceneSpec{1, 60}), ConfigError);
  EXPECT_THROW(generate_real(SceneSpec{1, 64, {0.5, 0.5, 0.5, 0.0}}), ConfigError);
}

TEST(ForgeTest, NoneIsIdentity) {
  const Tensor real = generate_real(SceneSpec{1, 64});
  const ForgeryRecord r = forge(real, ForgeryKind::kNone, 5);
  EXPECT_EQ(r.image, real);
  for (float v : r.mask.values()) EXPECT_EQ(v, 0.0f);
  ForgeOptions opts;
  opts.area_target = 0.1;
  EXPECT_THROW(forge(real, ForgeryKind::kNone, 5, opts), ConfigError);
}

TEST(ForgeTest, MaskIsExactlyTheChangedPixels) {
  for (uint64_t seed = 0; seed < 12; ++seed) {
    const Tensor real = generate_real(SceneSpec{100 + seed, 64});
    const auto kind = static_cast<ForgeryKind>(seed % 3);
    const ForgeryRecord r = forge(real, kind, seed);
    int64_t area = 0;
    for (int64_t p = 0; p < 64 * 64; ++p) {
      bool changed = false;
      for (int c = 0; c < 3; ++c) changed |= r.image[c * 4096 + p] != real[c * 4096 + p];
      EXPECT_EQ(changed, r.mask[p] == 1.0f) << "pixel " << p;
      area += changed;
    }
    const double frac = area / 4096.0;
    EXPECT_GE(frac, 0.02);
    EXPECT_LE(frac, 0.5);
  }
}

TEST(ForgeTest, AreaTargetIsRespected) {
  ForgeOptions opts;
  opts.area_target = 0.1;
  for (uint64_t seed = 0; seed < 6; ++seed) {
    const Tensor real = generate_real(SceneSpec{seed, 64});
    const ForgeryRecord r = forge(real, ForgeryKind::kSplice, seed, opts);
    double area = 0;
    for (float v : r.mask.values()) area += v;
    EXPECT_GE(area / 4096.0, 0.05);
    EXPECT_LE(area / 4096.0, 0.2);
  }
}

TEST(DatasetTest, GenerationIsDeterministicWithDisjointSeeds) {
  DatasetSpec spec{9, 6, 3, 2, 64};
  const auto a = generate_dataset(spec), b = generate_dataset(spec);
  ASSERT_EQ(a.size(), 11u);
  std::set<uint64_t> seen;
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].record.image, b[i].record.image);
    EXPECT_EQ(a[i].record.mask, b[i].record.mask);
    EXPECT_TRUE(seen.insert(a[i].record.source_seed).second);
    EXPECT_NE(a[i].record.kind, ForgeryKind::kNone);
  }
  for (const auto& r : generate_prior_set(9, 5, 64)) {
    EXPECT_EQ(r.record.kind, ForgeryKind::kNone);
    EXPECT_TRUE(seen.insert(r.record.source_seed).second);
  }
}

TEST(DatasetTest, WriteLoadRoundTripIsLossless) {
  const fs::path dir = ScratchDir("roundtrip");
  const auto records = generate_dataset(DatasetSpec{4, 6, 2, 2, 64});
  write_dataset(records, (dir / "manifest.json").string());
  const auto loaded = load_dataset((dir / "manifest.json").string());
  ASSERT_EQ(loaded.size(), 10u);
  for (size_t i = 0; i < loaded.size(); ++i) {
    EXPECT_EQ(loaded[i].id, records[i].record.id);
    EXPECT_EQ(loaded[i].image, records[i].record.image);
    EXPECT_EQ(loaded[i].mask, records[i].record.mask);
    EXPECT_EQ(loaded[i].kind, records[i].record.kind);
  }
  const auto val = load_dataset((dir / "manifest.json").string(), Split::kVal);
  ASSERT_EQ(val.size(), 2u);
  EXPECT_EQ(val[0].id, "val_0000");
}

TEST(DatasetTest, EmptyManifestLoadsEmpty) {
  const fs::path dir = ScratchDir("empty");
  write_dataset({}, (dir / "manifest.json").string());
  EXPECT_TRUE(load_dataset((dir / "manifest.json").string()).empty());
}

TEST(DatasetTest, CorruptionAndMissingFilesNamePath) {
  const fs::path dir = ScratchDir("corrupt");
  write_dataset(generate_dataset(DatasetSpec{1, 2, 0, 0, 32}), (dir / "manifest.json").string());
  const fs::path victim = dir / "images" / "train_0001.png";
  {
    std::ofstream out(victim, std::ios::binary | std::ios::app);
    out << "x";
  }
  try {
    load_dataset((dir / "manifest.json").string());
    FAIL() << "expected IngestionError";
  } catch (const IngestionError& e) {
    EXPECT_EQ(e.path(), victim.string());
  }
  fs::remove(victim);
  EXPECT_THROW(load_dataset((dir / "manifest.json").string()), IngestionError);
}

TEST(DatasetTest, PathInTwoSplitsIsRejected) {
  const fs::path dir = ScratchDir("splits");
  const std::string manifest = (dir / "manifest.json").string();
  write_dataset(generate_dataset(DatasetSpec{2, 2, 1, 0, 32}), manifest);
  nlohmann::json j;
  {
    std::ifstream in(manifest);
    j = nlohmann::json::parse(in);
  }
  j["records"][2]["image"] = j["records"][0]["image"];
  {
    std::ofstream out(manifest);
    out << j.dump();
  }
  EXPECT_THROW(load_dataset(manifest), IngestionError);
}

TEST(ImageIoTest, GaussianKernelIsNormalized) {
  for (double sigma : {0.25, 0.75, 1.75, 4.75}) {
    const auto k = gaussian_kernel(sigma);
    double s = 0.0;
    for (double v : k) s += v;
    EXPECT_NEAR(s, 1.0, 1e-9);
    EXPECT_EQ(k.size(), 2 * static_cast<size_t>(std::ceil(3 * sigma)) + 1);
  }
  EXPECT_EQ(gaussian_kernel(0.0), std::vector<double>{1.0});
  EXPECT_THROW(gaussian_kernel(-1.0), ConfigError);
}

TEST(ImageIoTest, JpegHighQualityIsClose) {
  const Tensor img = generate_real(SceneSpec{3, 64});
  const Tensor q100 = jpeg_round_trip(img, 100);
  EXPECT_LT(max_abs_diff(q100, img), 0.05f);
  EXPECT_THROW(jpeg_round_trip(img, 0), ConfigError);
}

}  // namespace
}  // namespace rloop
