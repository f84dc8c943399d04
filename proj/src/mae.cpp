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

#include <algorithm>
#include <numeric>

#include "rloop/errors.hpp"
#include "rloop/optim.hpp"

namespace rloop {

void MaeConfig::validate() const {
  if (patch_size <= 0 || image_size % patch_size != 0) {
    throw ConfigError("mae: image_size " + std::to_string(image_size) +
                      " is not divisible by patch_size " + std::to_string(patch_size));
  }
  if (dim % heads != 0 || decoder_dim % decoder_heads != 0) {
    throw ConfigError("mae: token dims must be divisible by their head counts");
  }
  if (dim % 4 != 0 || decoder_dim % 4 != 0) {
    throw ConfigError("mae: token dims must be multiples of 4 for the position table");
  }
  if (mask_ratio < 0.0 || mask_ratio >= 1.0) throw ConfigError("mae: mask_ratio must be in [0, 1)");
  if (encoder_depth < 1 || decoder_depth < 1) throw ConfigError("mae: depths must be >= 1");
}

MaeEncoder::MaeEncoder(const MaeConfig& c, Rng& rng)
    : patch_size(c.patch_size),
      patch_embed(c.patch_dim(), c.dim, rng),
      pos(sincos_position_table(c.grid(), c.dim), false),
      norm(c.dim) {
  for (int64_t i = 0; i < c.encoder_depth; ++i) blocks.emplace_back(c.dim, c.heads, c.mlp_ratio, rng);
}

Var MaeEncoder::operator()(const Var& images, const KeepIds& keep) const {
  Var x = add_per_token(patch_embed(patchify(images, patch_size)), pos);
  if (!keep.empty()) x = gather_tokens(x, keep);
  for (const auto& b : blocks) x = b(x);
  return norm(x);
}

void MaeEncoder::collect(ParamList& out, const std::string& prefix) const {
  patch_embed.collect(out, prefix + ".patch_embed");
  append_param(out, prefix, "pos", pos);
  for (size_t i = 0; i < blocks.size(); ++i) {
    blocks[i].collect(out, prefix + ".blocks." + std::to_string(i));
  }
  norm.collect(out, prefix + ".norm");
}

MaeDecoder::MaeDecoder(const MaeConfig& c, Rng& rng)
    : config(c),
      embed(c.dim, c.decoder_dim, rng),
      mask_token(normal_tensor(Shape{c.decoder_dim}, 0.02f, rng), true),
      pos(sincos_position_table(c.grid(), c.decoder_dim), false),
      norm(c.decoder_dim),
      pred(c.decoder_dim, c.patch_dim(), rng) {
  for (int64_t i = 0; i < c.decoder_depth; ++i) {
    blocks.emplace_back(c.decoder_dim, c.decoder_heads, c.mlp_ratio, rng);
  }
}

Var MaeDecoder::operator()(const Var& tokens, const KeepIds& keep) const {
  Var x = embed(tokens);
  if (!keep.empty()) x = scatter_tokens(x, mask_token, keep, config.num_patches());
  x = add_per_token(x, pos);
  for (const auto& b : blocks) x = b(x);
  return pred(norm(x));
}

void MaeDecoder::collect(ParamList& out, const std::string& prefix) const {
  embed.collect(out, prefix + ".embed");
  append_param(out, prefix, "mask_token", mask_token);
  append_param(out, prefix, "pos", pos);
  for (size_t i = 0; i < blocks.size(); ++i) {
    blocks[i].collect(out, prefix + ".blocks." + std::to_string(i));
  }
  norm.collect(out, prefix + ".norm");
  pred.collect(out, prefix + ".pred");
}

MaeDecoder MaeDecoder::clone() const {
  Rng unused(0);
  MaeDecoder copy(config, unused);
  ParamList src, dst;
  collect(src, "");
  copy.collect(dst, "");
  copy_values(dst, src);
  for (size_t i = 0; i < src.size(); ++i) dst[i].var.node()->requires_grad = src[i].var.requires_grad();
  return copy;
}

Mae::Mae(const MaeConfig& c, Rng& rng) : config(c) {
  c.validate();
  encoder = MaeEncoder(c, rng);
  decoder = MaeDecoder(c, rng);
}

Var Mae::to_image(const Var& patches) const {
  return unpatchify(patches, config.channels, config.image_size, config.image_size,
                    config.patch_size);
}

ParamList Mae::params() const {
  ParamList out = encoder_params();
  decoder.collect(out, "mae.decoder");
  return out;
}

ParamList Mae::encoder_params() const {
  ParamList out;
  encoder.collect(out, "mae.encoder");
  return out;
}

ParamList Mae::decoder_params() const {
  ParamList out;
  decoder.collect(out, "mae.decoder");
  return out;
}

Mae Mae::clone() const {
  Rng unused(0);
  Mae copy(config, unused);
  const ParamList src = params(), dst = copy.params();
  copy_values(dst, src);
  for (size_t i = 0; i < src.size(); ++i) dst[i].var.node()->requires_grad = src[i].var.requires_grad();
  return copy;
}

void Mae::freeze_encoder() { set_trainable(encoder_params(), false); }
void Mae::freeze_decoder() { set_trainable(decoder_params(), false); }

Tensor residual_map(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("residual: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.numel(); ++i) out[i] = std::fabs(a[i] - b[i]);
  return out;
}

namespace {

void check_images(const MaeConfig& c, const Tensor& images) {
  const Shape want{images.shape().empty() ? 0 : images.dim(0), c.channels, c.image_size,
                   c.image_size};
  if (images.shape() != want) {
    throw ShapeError("mae: expected images " + shape_str(want) + ", got " +
                     shape_str(images.shape()));
  }
}

}  // namespace

ReconResult reconstruct(const Mae& mae, const Tensor& images) {
  check_images(mae.config, images);
  NoGradGuard no_grad;
  ReconResult r;
  Var tokens = mae.encoder(Var(images));
  r.x_rec = mae.to_image(mae.decoder(tokens)).value();
  r.residual = residual_map(images, r.x_rec);
  r.tokens = tokens.value();
  return r;
}

KeepIds random_keep_ids(int64_t batch, int64_t num_patches, double mask_ratio, Rng& rng) {
  const auto keep = std::max<int64_t>(
      1, static_cast<int64_t>(std::llround(num_patches * (1.0 - mask_ratio))));
  KeepIds ids(static_cast<size_t>(batch));
  std::vector<int64_t> perm(static_cast<size_t>(num_patches));
  for (auto& row : ids) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    row.assign(perm.begin(), perm.begin() + keep);
    std::sort(row.begin(), row.end());
  }
  return ids;
}

namespace {

// Per-patch weights: 1 on masked patches, `visible` on kept ones, normalized
// so the loss is a weighted mean over pixels.
Tensor patch_weights(const KeepIds& keep, int64_t batch, int64_t n, int64_t patch_dim,
                     double visible) {
  Tensor w({batch, n, patch_dim});
  double total = 0.0;
  for (int64_t b = 0; b < batch; ++b) {
    std::vector<char> kept(static_cast<size_t>(n), keep.empty() ? 1 : 0);
    if (!keep.empty()) {
      for (int64_t id : keep[b]) kept[id] = 1;
    }
    for (int64_t t = 0; t < n; ++t) {
      const double v = kept[t] ? (keep.empty() ? 1.0 : visible) : 1.0;
      total += v * patch_dim;
      std::fill_n(w.data() + (b * n + t) * patch_dim, patch_dim, static_cast<float>(v));
    }
  }
  for (float& v : w.values()) v = static_cast<float>(v / total);
  return w;
}

Var weighted_mse(const Var& pred, const Var& target, const Tensor& weights) {
  Var d = sub(pred, target);
  return sum_all(mul(mul(d, d), Var(weights)));
}

}  // namespace

PretrainReport pretrain_mae(Mae& mae, const std::vector<ForgeryRecord>& data,
                            const PretrainOptions& options) {
  for (const auto& r : data) {
    if (r.kind != ForgeryKind::kNone) {
      throw ConfigError("pretrain_mae: record " + r.id + " is forged; the prior sees authentic images only");
    }
  }
  if (options.batch_size <= 0) throw ConfigError("pretrain_mae: batch_size must be positive");
  const MaeConfig& c = mae.config;
  const Tensor all = stack_images(data);
  if (!data.empty()) check_images(c, all);
  PretrainReport report;
  if (data.empty() || options.epochs <= 0) return report;

  ParamList params = mae.params();
  AdamW opt(params, AdamWOptions{options.lr, 0.9, 0.95, 1e-8, options.weight_decay});
  Rng rng(options.seed);
  const int64_t n = static_cast<int64_t>(data.size());
  const int64_t per = all.numel() / n;
  std::vector<int64_t> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (int64_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    int64_t batches = 0;
    for (int64_t start = 0; start < n; start += options.batch_size) {
      const int64_t b = std::min(options.batch_size, n - start);
      Tensor batch({b, c.channels, c.image_size, c.image_size});
      for (int64_t i = 0; i < b; ++i) {
        std::copy_n(all.data() + order[start + i] * per, per, batch.data() + i * per);
      }
      const bool full = unit(rng) < options.full_view_fraction;
      const KeepIds keep = full ? KeepIds{} : random_keep_ids(b, c.num_patches(), c.mask_ratio, rng);
      Var images(batch);
      Var pred = mae.decoder(mae.encoder(images, keep), keep);
      Var target = patchify(images, c.patch_size);
      Var loss = weighted_mse(pred, target,
                              patch_weights(keep, b, c.num_patches(), c.patch_dim(),
                                            options.visible_weight));
      opt.zero_grad();
      backward(loss);
      clip_grad_norm(params, 1.0);
      opt.step();
      sum += loss.value()[0];
      ++batches;
    }
    report.epoch_loss.push_back(sum / static_cast<double>(batches));
    if (options.on_epoch) options.on_epoch(epoch, report.epoch_loss.back());
  }
  return report;
}

double masked_reconstruction_mse(const Mae& mae, const Tensor& images, double mask_ratio,
                                 uint64_t seed) {
  check_images(mae.config, images);
  const MaeConfig& c = mae.config;
  NoGradGuard no_grad;
  Rng rng(seed);
  const int64_t b = images.dim(0);
  const KeepIds keep = random_keep_ids(b, c.num_patches(), mask_ratio, rng);
  Var x(images);
  const Tensor pred = mae.decoder(mae.encoder(x, keep), keep).value();
  const Tensor target = patchify(x, c.patch_size).value();
  const Tensor w = patch_weights(keep, b, c.num_patches(), c.patch_dim(), 0.0);
  double sum = 0.0;
  for (int64_t i = 0; i < pred.numel(); ++i) {
    const double d = pred[i] - target[i];
    sum += w[i] * d * d;
  }
  return sum;
}

double mean_patch_mse(const Tensor& train_images, const Tensor& images, int64_t patch_size,
                      double mask_ratio, uint64_t seed) {
  NoGradGuard no_grad;
  const Tensor train_tokens = patchify(Var(train_images), patch_size).value();
  const Tensor target = patchify(Var(images), patch_size).value();
  const int64_t n = target.dim(1), d = target.dim(2);
  std::vector<double> mean(static_cast<size_t>(d), 0.0);
  const int64_t rows = train_tokens.numel() / d;
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t j = 0; j < d; ++j) mean[j] += train_tokens[r * d + j];
  }
  for (double& m : mean) m /= static_cast<double>(rows);
  Rng rng(seed);
  const KeepIds keep = random_keep_ids(images.dim(0), n, mask_ratio, rng);
  const Tensor w = patch_weights(keep, images.dim(0), n, d, 0.0);
  double sum = 0.0;
  for (int64_t i = 0; i < target.numel(); ++i) {
    const double diff = mean[i % d] - target[i];
    sum += w[i] * diff * diff;
  }
  return sum;
}

}  // namespace rloop
