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

#include "rloop/dssn.hpp"

#include <cmath>
#include <numbers>

#include "rloop/errors.hpp"

namespace rloop {

namespace {

constexpr float kFusionPositionScale = 6.0f;

// 2-D sin-cos code whose frequencies span pi/2 down to pi/grid, so every
// component varies across the map.
Tensor fusion_position_table(int64_t grid, int64_t dim) {
  Tensor t(Shape{grid * grid, dim});
  const int64_t quarter = dim / 4;
  for (int64_t gy = 0; gy < grid; ++gy) {
    for (int64_t gx = 0; gx < grid; ++gx) {
      float* row = t.data() + (gy * grid + gx) * dim;
      for (int64_t i = 0; i < quarter; ++i) {
        const double f = quarter > 1 ? static_cast<double>(i) / (quarter - 1) : 0.0;
        const double omega = std::numbers::pi / 2 * std::pow(2.0 / std::max<int64_t>(grid, 2), f);
        row[i] = kFusionPositionScale * static_cast<float>(std::sin(gx * omega));
        row[quarter + i] = kFusionPositionScale * static_cast<float>(std::cos(gx * omega));
        row[2 * quarter + i] = kFusionPositionScale * static_cast<float>(std::sin(gy * omega));
        row[3 * quarter + i] = kFusionPositionScale * static_cast<float>(std::cos(gy * omega));
      }
    }
  }
  return t;
}

}  // namespace

void DssnConfig::validate() const {
  const size_t s = stage_dims.size();
  if (s == 0) throw ConfigError("dssn: at least one stage is required");
  if (stage_downsample.size() != s || heads.size() != s || sr_ratios.size() != s ||
      depths.size() != s) {
    throw ConfigError("dssn: per-stage lists must all have num_stages entries");
  }
  int64_t side = image_size;
  for (size_t i = 0; i < s; ++i) {
    if (stage_downsample[i] < 1 || side % stage_downsample[i] != 0) {
      throw ConfigError("dssn: cumulative downsample does not divide the image size at stage " +
                        std::to_string(i));
    }
    side /= stage_downsample[i];
    if (heads[i] < 1 || stage_dims[i] % heads[i] != 0) {
      throw ConfigError("dssn: stage " + std::to_string(i) + " dim " +
                        std::to_string(stage_dims[i]) + " not divisible by heads " +
                        std::to_string(heads[i]));
    }
    if (sr_ratios[i] < 1 || side % sr_ratios[i] != 0) {
      throw ConfigError("dssn: reduction ratio does not divide the grid at stage " +
                        std::to_string(i));
    }
    if (depths[i] < 1) throw ConfigError("dssn: stage depth must be >= 1");
  }
  if (decoder_dim < 1) throw ConfigError("dssn: decoder_dim must be positive");
}

int64_t DssnConfig::grid(int64_t s) const {
  int64_t side = image_size;
  for (int64_t i = 0; i <= s; ++i) side /= stage_downsample[i];
  return side;
}

MitStage::MitStage(int64_t in_c, int64_t dim, int64_t downsample, int64_t heads_, int64_t sr,
                   int64_t depth, int64_t mlp_ratio, Rng& rng)
    : heads(heads_), sr_ratio(sr) {
  const int64_t kernel = 2 * downsample - 1;
  embed = Conv2dLayer(in_c, dim, kernel, downsample, kernel / 2, rng);
  embed_norm = LayerNormLayer(dim);
  const int64_t hidden = dim * mlp_ratio;
  for (int64_t i = 0; i < depth; ++i) {
    Block b;
    b.norm1 = LayerNormLayer(dim);
    b.q = Linear(dim, dim, rng);
    b.kv_k = Linear(dim, dim, rng);
    b.kv_v = Linear(dim, dim, rng);
    b.proj = Linear(dim, dim, rng);
    if (sr > 1) {
      b.sr = Conv2dLayer(dim, dim, sr, sr, 0, rng);
      b.sr_norm = LayerNormLayer(dim);
    }
    b.norm2 = LayerNormLayer(dim);
    b.fc1 = Linear(dim, hidden, rng);
    b.dw = DepthwiseConv3x3(hidden, rng);
    b.fc2 = Linear(hidden, dim, rng);
    blocks.push_back(std::move(b));
  }
  out_norm = LayerNormLayer(dim);
}

Var MitStage::operator()(const Var& x) const {
  Var y = embed_norm(embed(x));
  const int64_t batch = y.dim(0), h = y.dim(1), w = y.dim(2), dim = y.dim(3);
  Var t = reshape(y, {batch, h * w, dim});
  for (const Block& b : blocks) {
    Var n1 = b.norm1(t);
    Var kv = n1;
    if (sr_ratio > 1) {
      Var reduced = b.sr(reshape(n1, {batch, h, w, dim}));
      kv = b.sr_norm(reshape(reduced, {batch, reduced.dim(1) * reduced.dim(2), dim}));
    }
    t = add(t, b.proj(attention(b.q(n1), b.kv_k(kv), b.kv_v(kv), heads)));
    Var hidden = b.fc1(b.norm2(t));
    const int64_t hd = hidden.dim(2);
    hidden = gelu(b.dw(reshape(hidden, {batch, h, w, hd})));
    t = add(t, b.fc2(reshape(hidden, {batch, h * w, hd})));
  }
  return reshape(out_norm(t), {batch, h, w, dim});
}

void MitStage::collect(ParamList& out, const std::string& prefix) const {
  embed.collect(out, prefix + ".embed");
  embed_norm.collect(out, prefix + ".embed_norm");
  for (size_t i = 0; i < blocks.size(); ++i) {
    const Block& b = blocks[i];
    const std::string p = prefix + ".blocks." + std::to_string(i);
    b.norm1.collect(out, p + ".norm1");
    b.q.collect(out, p + ".attn.q");
    b.kv_k.collect(out, p + ".attn.k");
    b.kv_v.collect(out, p + ".attn.v");
    b.proj.collect(out, p + ".attn.proj");
    if (sr_ratio > 1) {
      b.sr.collect(out, p + ".attn.sr");
      b.sr_norm.collect(out, p + ".attn.sr_norm");
    }
    b.norm2.collect(out, p + ".norm2");
    b.fc1.collect(out, p + ".ffn.fc1");
    b.dw.collect(out, p + ".ffn.dw");
    b.fc2.collect(out, p + ".ffn.fc2");
  }
  out_norm.collect(out, prefix + ".out_norm");
}

CrossFusion::CrossFusion(int64_t dim, int64_t heads_, Rng& rng)
    : q(dim, dim, rng), k(dim, dim, rng), v(dim, dim, rng), proj(Linear::zeros(dim, dim)),
      heads(heads_) {
  k.weight = Var(q.weight.value(), true);
  k.bias = Var(q.bias.value(), true);
  if (dim % heads != 0) {
    throw ConfigError("fusion: dim " + std::to_string(dim) + " not divisible by heads " +
                      std::to_string(heads));
  }
}

Var CrossFusion::operator()(const Var& content, const Var& artifact, Tensor* probs) const {
  if (content.shape() != artifact.shape()) {
    throw ShapeError("fusion: content " + shape_str(content.shape()) + " vs artifact " +
                     shape_str(artifact.shape()));
  }
  const Shape shape = content.shape();
  const int64_t batch = shape[0], dim = shape.back();
  const int64_t n = content.numel() / (batch * dim);
  Var c = reshape(content, {batch, n, dim});
  Var a = reshape(artifact, {batch, n, dim});
  const int64_t grid = shape.size() == 4 ? shape[1] : 0;
  if (grid * grid == n && dim % 4 == 0) {
    Var pos(fusion_position_table(grid, dim), false);
    Var mixed = attention(q(add_per_token(c, pos)), k(add_per_token(a, pos)), v(a), heads, probs);
    return reshape(add(c, proj(mixed)), shape);
  }
  Var mixed = attention(q(c), k(a), v(a), heads, probs);
  return reshape(add(c, proj(mixed)), shape);
}

void CrossFusion::collect(ParamList& out, const std::string& prefix) const {
  q.collect(out, prefix + ".q");
  k.collect(out, prefix + ".k");
  v.collect(out, prefix + ".v");
  proj.collect(out, prefix + ".proj");
}

Dssn::Dssn(const DssnConfig& c, Rng& rng) : config(c) {
  c.validate();
  int64_t in_c = c.dual ? c.in_channels : 2 * c.in_channels;
  for (int64_t s = 0; s < c.num_stages(); ++s) {
    content.emplace_back(in_c, c.stage_dims[s], c.stage_downsample[s], c.heads[s],
                         c.sr_ratios[s], c.depths[s], c.mlp_ratio, rng);
    in_c = c.stage_dims[s];
  }
  if (c.dual) {
    in_c = c.in_channels;
    for (int64_t s = 0; s < c.num_stages(); ++s) {
      artifact.emplace_back(in_c, c.stage_dims[s], c.stage_downsample[s], c.heads[s],
                            c.sr_ratios[s], c.depths[s], c.mlp_ratio, rng);
      fusion.emplace_back(c.stage_dims[s], c.heads[s], rng);
      in_c = c.stage_dims[s];
    }
  }
  for (int64_t s = 0; s < c.num_stages(); ++s) {
    head_proj.emplace_back(c.stage_dims[s], c.decoder_dim, rng);
  }
  head_fuse = Linear(c.decoder_dim * c.num_stages(), c.decoder_dim, rng);
  head_out = Linear(c.decoder_dim, 1, rng);
}

std::vector<StageFeatures> Dssn::encode(const Var& image, const Var& residual,
                                        FusionProbe* probe) const {
  const Shape want{image.shape().empty() ? 0 : image.dim(0), config.in_channels,
                   config.image_size, config.image_size};
  if (image.shape() != want || residual.shape() != want) {
    throw ShapeError("dssn: expected image and residual " + shape_str(want) + ", got " +
                     shape_str(image.shape()) + " and " + shape_str(residual.shape()));
  }
  Var x = nchw_to_nhwc(image);
  Var r = nchw_to_nhwc(scale(residual, config.residual_scale));
  std::vector<StageFeatures> out;
  if (probe) probe->probs.assign(config.dual ? content.size() : 0, Tensor());
  if (!config.dual) {
    Var cur = concat_last({x, r});
    for (const auto& stage : content) {
      cur = stage(cur);
      out.push_back({cur, Var(), cur});
    }
    return out;
  }
  Var cur = x, art = r;
  for (size_t s = 0; s < content.size(); ++s) {
    Var fc = content[s](cur);
    art = artifact[s](art);
    Var ff = fusion[s](fc, art, probe ? &probe->probs[s] : nullptr);
    out.push_back({fc, art, ff});
    cur = config.fusion_feedforward ? ff : fc;
  }
  return out;
}

DssnOutput Dssn::decode(std::vector<StageFeatures> stages) const {
  if (stages.empty()) throw ConfigError("dssn: decode needs at least one stage");
  if (stages.size() != head_proj.size()) throw ShapeError("dssn: stage count mismatch");
  const int64_t g = config.grid(0);
  std::vector<Var> parts;
  for (size_t s = 0; s < stages.size(); ++s) {
    parts.push_back(upsample_bilinear(head_proj[s](stages[s].f_fused), g, g));
  }
  Var fused = relu(head_fuse(concat_last(parts)));
  Var logit = upsample_bilinear(head_out(fused), config.image_size, config.image_size);
  DssnOutput out;
  out.logits = reshape(logit, {logit.dim(0), 1, config.image_size, config.image_size});
  out.mask = sigmoid(out.logits);
  out.stages = std::move(stages);
  return out;
}

DssnOutput Dssn::operator()(const Var& image, const Var& residual, FusionProbe* probe) const {
  return decode(encode(image, residual, probe));
}

ParamList Dssn::params() const {
  ParamList out;
  for (size_t s = 0; s < content.size(); ++s) {
    content[s].collect(out, "dssn.content." + std::to_string(s));
  }
  for (size_t s = 0; s < artifact.size(); ++s) {
    artifact[s].collect(out, "dssn.artifact." + std::to_string(s));
    fusion[s].collect(out, "dssn.fusion." + std::to_string(s));
  }
  for (size_t s = 0; s < head_proj.size(); ++s) {
    head_proj[s].collect(out, "dssn.head.proj." + std::to_string(s));
  }
  head_fuse.collect(out, "dssn.head.fuse");
  head_out.collect(out, "dssn.head.out");
  return out;
}

}  // namespace rloop
