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

#include "rloop/mae.hpp"

#include "gtest/gtest.h"
#include "rloop/errors.hpp"

namespace rloop {
namespace {

MaeConfig SmallConfig() {
  MaeConfig c;
  c.image_size = 32;
  c.dim = 32;
  c.decoder_dim = 16;
  c.encoder_depth = 1;
  c.decoder_depth = 1;
  c.heads = 2;
  c.decoder_heads = 2;
  return c;
}

std::vector<ForgeryRecord> Authentic(int n, int64_t res) {
  std::vector<ForgeryRecord> out;
  for (auto& r : generate_prior_set(5, n, res)) out.push_back(r.record);
  return out;
}

TEST(PatchifyTest, TokenCountRoundTripAndZeros) {
  Tensor img = generate_real(SceneSpec{1, 64}).reshape({1, 3, 64, 64});
  Var tokens = patchify(Var(img), 8);
  EXPECT_EQ(tokens.shape(), (Shape{1, 64, 192}));
  EXPECT_EQ(unpatchify(tokens, 3, 64, 64, 8).value(), img);
  Var zeros = patchify(Var(Tensor({2, 3, 64, 64}, 0.0f)), 8);
  for (float v : zeros.value().values()) EXPECT_EQ(v, 0.0f);
  EXPECT_THROW(patchify(Var(Tensor({1, 3, 60, 64})), 8), ConfigError);
}

TEST(MaeConfigTest, Validation) {
  MaeConfig c;
  c.image_size = 60;
  EXPECT_THROW(c.validate(), ConfigError);
  c = MaeConfig{};
  c.heads = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = MaeConfig{};
  c.mask_ratio = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_NO_THROW(MaeConfig{}.validate());
  EXPECT_EQ(MaeConfig{}.num_patches(), 64);
}

TEST(ReconstructTest, DeterministicAndResidualIsAbsDiff) {
  Rng rng(1);
  Mae mae(SmallConfig(), rng);
  const Tensor x = stack_images(Authentic(3, 32));
  const ReconResult a = reconstruct(mae, x), b = reconstruct(mae, x);
  EXPECT_EQ(a.x_rec, b.x_rec);
  EXPECT_EQ(a.residual, b.residual);
  EXPECT_EQ(a.tokens.shape(), (Shape{3, 16, 32}));
  for (int64_t i = 0; i < x.numel(); ++i) {
    EXPECT_EQ(a.residual[i], std::fabs(x[i] - a.x_rec[i]));
    EXPECT_GE(a.residual[i], 0.0f);
  }
  EXPECT_EQ(residual_map(x, a.x_rec), residual_map(a.x_rec, x));
  const Tensor self = residual_map(x, x);
  for (float v : self.values()) EXPECT_EQ(v, 0.0f);
  EXPECT_THROW(reconstruct(mae, Tensor({1, 3, 64, 64})), ShapeError);
}

TEST(ReconstructTest, BatchCompositionDoesNotChangeResults) {
  Rng rng(2);
  Mae mae(SmallConfig(), rng);
  const auto data = Authentic(4, 32);
  const ReconResult all = reconstruct(mae, stack_images(data));
  const ReconResult one = reconstruct(mae, stack_images({data[2]}));
  const int64_t per = one.x_rec.numel();
  for (int64_t i = 0; i < per; ++i) EXPECT_EQ(one.x_rec[i], all.x_rec[2 * per + i]);
}

TEST(PretrainTest, ZeroEpochsKeepsInitAndForgedIsRefused) {
  Rng rng(3);
  Mae mae(SmallConfig(), rng);
  const uint64_t before = params_checksum(mae.params());
  PretrainOptions opts;
  opts.epochs = 0;
  pretrain_mae(mae, Authentic(4, 32), opts);
  EXPECT_EQ(params_checksum(mae.params()), before);

  auto forged = Authentic(2, 32);
  forged.push_back(forge(forged[0].image, ForgeryKind::kSplice, 1));
  EXPECT_THROW(pretrain_mae(mae, forged, opts), ConfigError);
}

TEST(PretrainTest, LossDecreasesAndFrozenEncoderIsUntouched) {
  Rng rng(4);
  Mae mae(SmallConfig(), rng);
  const auto data = Authentic(32, 32);
  PretrainOptions opts;
  opts.epochs = 4;
  opts.batch_size = 8;
  opts.lr = 1e-3;
  const PretrainReport report = pretrain_mae(mae, data, opts);
  ASSERT_EQ(report.epoch_loss.size(), 4u);
  EXPECT_LT(report.epoch_loss.back(), report.epoch_loss.front());

  mae.freeze_encoder();
  const uint64_t enc = params_checksum(mae.encoder_params());
  const uint64_t dec = params_checksum(mae.decoder_params());
  opts.epochs = 1;
  pretrain_mae(mae, data, opts);
  EXPECT_EQ(params_checksum(mae.encoder_params()), enc);
  EXPECT_NE(params_checksum(mae.decoder_params()), dec);
}

TEST(DecoderCloneTest, SameValuesDistinctParameters) {
  Rng rng(5);
  Mae mae(SmallConfig(), rng);
  const MaeDecoder copy = mae.decoder.clone();
  ParamList a, b;
  mae.decoder.collect(a, "");
  copy.collect(b, "");
  ASSERT_EQ(a.size(), b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].name, b[i].name);
    EXPECT_EQ(a[i].var.value(), b[i].var.value());
    EXPECT_NE(a[i].var.node(), b[i].var.node());
  }
  const Tensor x = stack_images(Authentic(2, 32));
  NoGradGuard no_grad;
  Var z = mae.encoder(Var(x));
  EXPECT_EQ(mae.decoder(z).value(), copy(z).value());
}

TEST(MaskingTest, KeepIdsAreSortedUniqueAndSized) {
  Rng rng(6);
  const KeepIds ids = random_keep_ids(3, 64, 0.75, rng);
  ASSERT_EQ(ids.size(), 3u);
  for (const auto& row : ids) {
    ASSERT_EQ(row.size(), 16u);
    EXPECT_TRUE(std::is_sorted(row.begin(), row.end()));
    EXPECT_EQ(std::adjacent_find(row.begin(), row.end()), row.end());
  }
}

}  // namespace
}  // namespace rloop
