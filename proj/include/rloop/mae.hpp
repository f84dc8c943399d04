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

// Masked autoencoder used as the realness prior.
//
// The encoder embeds non-overlapping patches, adds a fixed sine-cosine
// position table and runs pre-norm transformer blocks. The decoder maps
// tokens to its own width, fills dropped positions with a learned mask token,
// and predicts every patch. At inference all patches are visible.

#include <cstdint>
#include <functional>
#include <vector>

#include "rloop/nn.hpp"
#include "rloop/synth_data.hpp"

namespace rloop {

struct MaeConfig {
  int64_t image_size = 64;
  int64_t patch_size = 8;
  int64_t channels = 3;
  int64_t dim = 128;
  int64_t decoder_dim = 64;
  int64_t encoder_depth = 4;
  int64_t decoder_depth = 2;
  int64_t heads = 4;
  int64_t decoder_heads = 4;
  int64_t mlp_ratio = 4;
  double mask_ratio = 0.75;

  void validate() const;
  int64_t grid() const { return image_size / patch_size; }
  int64_t num_patches() const { return grid() * grid(); }
  int64_t patch_dim() const { return patch_size * patch_size * channels; }
};

// Token ids kept per batch entry; empty means every patch is visible.
using KeepIds = std::vector<std::vector<int64_t>>;

class MaeEncoder {
 public:
  MaeEncoder() = default;
  MaeEncoder(const MaeConfig& config, Rng& rng);

  // images: [batch, c, h, w] -> tokens [batch, kept, dim].
  Var operator()(const Var& images, const KeepIds& keep = {}) const;
  void collect(ParamList& out, const std::string& prefix) const;

  int64_t patch_size = 8;
  Linear patch_embed;
  Var pos;  // fixed, not trainable
  std::vector<TransformerBlock> blocks;
  LayerNormLayer norm;
};

class MaeDecoder {
 public:
  MaeDecoder() = default;
  MaeDecoder(const MaeConfig& config, Rng& rng);

  // tokens: [batch, kept, dim] -> patch predictions [batch, num_patches, patch_dim].
  Var operator()(const Var& tokens, const KeepIds& keep = {}) const;
  void collect(ParamList& out, const std::string& prefix) const;
  // Deep copy with fresh parameter handles.
  MaeDecoder clone() const;

  MaeConfig config;
  Linear embed;
  Var mask_token;
  Var pos;  // fixed, not trainable
  std::vector<TransformerBlock> blocks;
  LayerNormLayer norm;
  Linear pred;
};

class Mae {
 public:
  Mae() = default;
  Mae(const MaeConfig& config, Rng& rng);

  // Patch predictions back to an image [batch, c, h, w].
  Var to_image(const Var& patches) const;
  // Parameters under "mae.encoder.*" and "mae.decoder.*".
  ParamList params() const;
  ParamList encoder_params() const;
  ParamList decoder_params() const;
  void freeze_encoder();
  void freeze_decoder();
  // Deep copy with fresh parameter handles and the same trainable flags.
  Mae clone() const;

  MaeConfig config;
  MaeEncoder encoder;
  MaeDecoder decoder;
};

struct ReconResult {
  Tensor x_rec;     // [batch, c, h, w]
  Tensor residual;  // |x - x_rec|
  Tensor tokens;    // encoder output [batch, num_patches, dim]
};

// Elementwise |a - b|.
Tensor residual_map(const Tensor& a, const Tensor& b);

// Full-visibility reconstruction; no graph is recorded.
ReconResult reconstruct(const Mae& mae, const Tensor& images);

// Random per-image keep sets for the given mask ratio, sorted ascending.
KeepIds random_keep_ids(int64_t batch, int64_t num_patches, double mask_ratio, Rng& rng);

struct PretrainOptions {
  int64_t epochs = 40;
  int64_t batch_size = 16;
  double lr = 1e-3;
  double weight_decay = 1e-5;
  // Weight of the visible-patch term next to the masked-patch MSE.
  double visible_weight = 1.0;
  // Fraction of batches trained with every patch visible.
  double full_view_fraction = 0.5;
  uint64_t seed = 0;
  std::function<void(int64_t epoch, double loss)> on_epoch;
};

struct PretrainReport {
  std::vector<double> epoch_loss;
};

// Pretrains `mae` in place on authentic images. Forged records are refused
// with a ConfigError.
PretrainReport pretrain_mae(Mae& mae, const std::vector<ForgeryRecord>& data,
                            const PretrainOptions& options);

// Mean squared error over masked patches with a fixed masking seed.
double masked_reconstruction_mse(const Mae& mae, const Tensor& images, double mask_ratio,
                                 uint64_t seed);
// The same masked positions predicted by the per-pixel dataset mean patch.
double mean_patch_mse(const Tensor& train_images, const Tensor& images, int64_t patch_size,
                      double mask_ratio, uint64_t seed);

}  // namespace rloop
