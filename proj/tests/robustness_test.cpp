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

#include "rloop/robustness.hpp"

#include <cmath>
#include <sstream>

#include "gtest/gtest.h"
#include "rloop/errors.hpp"
#include "rloop/image_io.hpp"

namespace rloop {
namespace {

Tensor Scene(uint64_t seed) {
  SceneSpec s;
  s.seed = seed;
  return generate_real(s);
}

// Direct 2-D convolution with reflect-101 borders.
Tensor BlurOracle(const Tensor& img, double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k1(2 * r + 1);
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) sum += k1[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& v : k1) v /= sum;
  const int64_t c = img.dim(0), h = img.dim(1), w = img.dim(2);
  auto reflect = [](int64_t i, int64_t n) {
    while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
    return i;
  };
  Tensor out(img.shape());
  for (int64_t ch = 0; ch < c; ++ch) {
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int dy = -r; dy <= r; ++dy) {
          for (int dx = -r; dx <= r; ++dx) {
            acc += k1[dy + r] * k1[dx + r] *
                   img[(ch * h + reflect(y + dy, h)) * w + reflect(x + dx, w)];
          }
        }
        out[(ch * h + y) * w + x] = static_cast<float>(acc);
      }
    }
  }
  return out;
}

TEST(PerturbTest, IdentityCases) {
  const Tensor img = Scene(1);
  EXPECT_EQ(perturb(img, PerturbKind::kNone, 0), img);
  EXPECT_EQ(perturb(img, PerturbKind::kBlur, 0), img);
}

TEST(PerturbTest, BlurMatchesDirectConvolution) {
  const Tensor img = Scene(2);
  for (double level : {3.0, 7.0, 19.0}) {
    const Tensor got = perturb(img, PerturbKind::kBlur, level);
    EXPECT_LT(max_abs_diff(got, BlurOracle(img, level / 4.0)), 1e-5f) << level;
  }
}

TEST(PerturbTest, BlurKeepsConstantsAndKernelIsNormalized) {
  const Tensor flat({3, 64, 64}, 0.37f);
  EXPECT_LT(max_abs_diff(perturb(flat, PerturbKind::kBlur, 19), flat), 1e-6f);
  for (double s : {0.75, 1.75, 4.75}) {
    const auto k = gaussian_kernel(s);
    double sum = 0.0;
    for (double v : k) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-9);
    EXPECT_EQ(k.size(), 2 * static_cast<size_t>(std::ceil(3 * s)) + 1);
  }
}

TEST(PerturbTest, JpegDegradesWithQuality) {
  const Tensor img = Scene(3);
  double prev = 0.0;
  for (int q : {100, 80, 50}) {
    const Tensor out = perturb(img, PerturbKind::kJpeg, q);
    double mse = 0.0;
    for (int64_t i = 0; i < img.numel(); ++i) mse += (out[i] - img[i]) * (out[i] - img[i]);
    mse /= static_cast<double>(img.numel());
    EXPECT_GE(mse, prev);
    prev = mse;
    if (q == 100) {
      EXPECT_LT(max_abs_diff(out, img), 0.05f);
    }
  }
}

TEST(PerturbTest, BatchMatchesPerImage) {
  const Tensor a = Scene(4);
  const Tensor b = Scene(5);
  Tensor batch({2, 3, 64, 64});
  std::copy_n(a.data(), a.numel(), batch.data());
  std::copy_n(b.data(), b.numel(), batch.data() + a.numel());
  const Tensor out = perturb(batch, PerturbKind::kJpeg, 70);
  const Tensor pb = perturb(b, PerturbKind::kJpeg, 70);
  for (int64_t i = 0; i < b.numel(); ++i) ASSERT_EQ(out[a.numel() + i], pb[i]);
}

TEST(PerturbTest, InvalidLevels) {
  const Tensor img = Scene(6);
  EXPECT_THROW(perturb(img, PerturbKind::kJpeg, 0), ConfigError);
  EXPECT_THROW(perturb(img, PerturbKind::kJpeg, 101), ConfigError);
  EXPECT_THROW(perturb(img, PerturbKind::kJpeg, 75.5), ConfigError);
  EXPECT_THROW(perturb(img, PerturbKind::kBlur, -1), ConfigError);
  PerturbSpec s;
  EXPECT_THROW(s.validate(), ConfigError);
  EXPECT_EQ(perturb_kind_from_string("gaussian_blur"), PerturbKind::kBlur);
  EXPECT_THROW(perturb_kind_from_string("webp"), ConfigError);
}

TEST(SweepTest, NoneMatchesEvaluateAndMasksUntouched) {
  MaeConfig mc;
  mc.dim = 32;
  mc.decoder_dim = 16;
  mc.encoder_depth = 1;
  mc.decoder_depth = 1;
  mc.heads = 2;
  mc.decoder_heads = 2;
  Rng rng(1);
  const Mae prior(mc, rng);
  DssnConfig dc;
  dc.stage_dims = {16, 16, 32, 32};
  dc.heads = {1, 1, 2, 2};
  dc.decoder_dim = 32;
  const LoopModel model(prior, dc, {}, AblationFlags{}, 2);
  DatasetSpec spec;
  spec.seed = 3;
  spec.n_train = 0;
  spec.n_val = 3;
  spec.n_test = 0;
  std::vector<ForgeryRecord> recs;
  for (auto& r : generate_dataset(spec)) recs.push_back(r.record);
  const Tensor masks_before = stack_masks(recs);

  const RobustnessReport rep = robustness_sweep(
      model, recs, {PerturbSpec{PerturbKind::kNone, {0}, 0.25}, PerturbSpec{PerturbKind::kBlur, {0, 7}, 0.25}});
  ASSERT_EQ(rep.rows.size(), 3u);
  const EvalReport plain = evaluate(model, prepare_set(prior, recs));
  EXPECT_EQ(rep.rows[0].mean_iou, plain.refined.iou);
  EXPECT_EQ(rep.rows[0].mean_f1, plain.refined.f1);
  EXPECT_EQ(rep.rows[1].mean_f1, plain.refined.f1);
  for (const auto& r : rep.rows) EXPECT_EQ(r.n_images, 3);
  EXPECT_EQ(stack_masks(recs), masks_before);

  const RobustnessReport again = robustness_sweep(model, recs, {PerturbSpec{PerturbKind::kBlur, {0, 7}, 0.25}});
  EXPECT_EQ(again.rows[1].mean_f1, rep.rows[2].mean_f1);

  std::ostringstream csv;
  write_robustness_csv(csv, rep);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "kind,level,mean_iou,mean_f1,n_images");
  EXPECT_NE(csv.str().find("\ngaussian_blur,7,"), std::string::npos);
  std::ostringstream svg;
  write_robustness_svg(svg, rep);
  EXPECT_EQ(svg.str().rfind("<svg", 0), 0u);
  EXPECT_NE(svg.str().find("</svg>"), std::string::npos);
}

TEST(SweepTest, EmptyRecordsGiveZeroRows) {
  const RobustnessReport rep = robustness_sweep(LoopModel{}, {}, {default_jpeg_spec()});
  ASSERT_EQ(rep.rows.size(), 6u);
  EXPECT_EQ(rep.rows[0].n_images, 0);
}

}  // namespace
}  // namespace rloop
