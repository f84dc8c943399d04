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

// Dual-stream hierarchical segmenter.
//
// A content stream reads the image and an artifact stream reads the
// reconstruction residual. Each stream is a stack of stages: an overlapping
// strided convolution, transformer blocks with spatially reduced keys and
// values, and a depthwise-conv feed-forward. After every stage the content
// tokens attend to the artifact tokens:
//
//   fused = content + proj(MHA(q = content, k = v = artifact))
//
// with `proj` starting at zero. Fused tokens feed the next content stage when
// `fusion_feedforward` is set. A light decoder projects each stage to a
// common width, resamples to the first stage grid, concatenates, fuses and
// predicts one logit per pixel.
//
// With `dual = false` a single stream reads the channel concatenation of
// image and residual and no fusion happens.

#include <cstdint>
#include <vector>

#include "rloop/nn.hpp"

namespace rloop {

struct DssnConfig {
  int64_t image_size = 64;
  int64_t in_channels = 3;
  std::vector<int64_t> stage_dims{32, 64, 128, 192};
  std::vector<int64_t> stage_downsample{4, 2, 2, 2};
  std::vector<int64_t> heads{1, 2, 4, 8};
  std::vector<int64_t> sr_ratios{8, 4, 2, 1};
  std::vector<int64_t> depths{1, 1, 1, 1};
  int64_t mlp_ratio = 4;
  int64_t decoder_dim = 128;
  // Multiplier applied to the residual before the artifact stream.
  float residual_scale = 10.0f;
  bool dual = true;
  bool fusion_feedforward = true;

  void validate() const;
  int64_t num_stages() const { return static_cast<int64_t>(stage_dims.size()); }
  // Side length of stage `s`'s token grid.
  int64_t grid(int64_t s) const;
};

class MitStage {
 public:
  MitStage() = default;
  MitStage(int64_t in_c, int64_t dim, int64_t downsample, int64_t heads, int64_t sr,
           int64_t depth, int64_t mlp_ratio, Rng& rng);

  // x: [batch, h, w, in_c] -> tokens [batch, h', w', dim].
  Var operator()(const Var& x) const;
  void collect(ParamList& out, const std::string& prefix) const;

  struct Block {
    LayerNormLayer norm1;
    Linear q, kv_k, kv_v, proj;
    Conv2dLayer sr;  // unused when sr_ratio == 1
    LayerNormLayer sr_norm;
    LayerNormLayer norm2;
    Linear fc1;
    DepthwiseConv3x3 dw;
    Linear fc2;
  };

  Conv2dLayer embed;
  LayerNormLayer embed_norm;
  std::vector<Block> blocks;
  LayerNormLayer out_norm;
  int64_t heads = 1;
  int64_t sr_ratio = 1;
};

class CrossFusion {
 public:
  CrossFusion() = default;
  CrossFusion(int64_t dim, int64_t heads, Rng& rng);

  // Feature maps [batch, h, w, dim] or tokens [batch, n, dim]. Square maps get a
  // fixed 2-D position code on the query and key inputs when dim % 4 == 0.
  // probs receives the attention weights.
  Var operator()(const Var& content, const Var& artifact, Tensor* probs = nullptr) const;
  void collect(ParamList& out, const std::string& prefix) const;

  Linear q, k, v, proj;  // k starts as a copy of q, proj at zero
  int64_t heads = 1;
};

struct StageFeatures {
  Var f_con;    // [batch, h, w, dim]
  Var f_art;    // undefined in single-stream mode
  Var f_fused;  // equals f_con in single-stream mode
};

struct DssnOutput {
  std::vector<StageFeatures> stages;
  Var logits;  // [batch, 1, h, w]
  Var mask;    // sigmoid(logits)
};

// Optional capture of fusion attention weights, one tensor per stage.
struct FusionProbe {
  std::vector<Tensor> probs;
};

class Dssn {
 public:
  Dssn() = default;
  Dssn(const DssnConfig& config, Rng& rng);

  // image, residual: [batch, 3, h, w].
  std::vector<StageFeatures> encode(const Var& image, const Var& residual,
                                    FusionProbe* probe = nullptr) const;
  DssnOutput decode(std::vector<StageFeatures> stages) const;
  DssnOutput operator()(const Var& image, const Var& residual, FusionProbe* probe = nullptr) const;

  ParamList params() const;

  DssnConfig config;
  std::vector<MitStage> content;
  std::vector<MitStage> artifact;
  std::vector<CrossFusion> fusion;
  std::vector<Linear> head_proj;
  Linear head_fuse;
  Linear head_out;
};

}  // namespace rloop
