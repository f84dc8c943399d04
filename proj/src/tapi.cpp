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

#include "rloop/tapi.hpp"

#include "rloop/errors.hpp"

namespace rloop {

void PromptEncoderConfig::validate(int64_t image_size) const {
  if (channels.empty()) throw ConfigError("prompt: at least one conv layer is required");
  if (downsample != (int64_t{1} << channels.size())) {
    throw ConfigError("prompt: downsample " + std::to_string(downsample) + " must equal 2^" +
                      std::to_string(channels.size()));
  }
  if (image_size % downsample != 0) {
    throw ConfigError("prompt: image size " + std::to_string(image_size) +
                      " not divisible by downsample " + std::to_string(downsample));
  }
  if (token_dim < 1) throw ConfigError("prompt: token_dim must be positive");
}

PromptEncoder::PromptEncoder(const PromptEncoderConfig& c, int64_t image_size_, Rng& rng)
    : config(c), image_size(image_size_) {
  c.validate(image_size);
  int64_t in_c = 1;
  for (int64_t out_c : c.channels) {
    convs.emplace_back(in_c, out_c, 3, 2, 1, rng);
    in_c = out_c;
  }
  to_tokens = Linear(in_c, c.token_dim, rng);
}

Var PromptEncoder::operator()(const Var& mask) const {
  const Shape want{mask.shape().empty() ? 0 : mask.dim(0), 1, image_size, image_size};
  if (mask.shape() != want) {
    throw ShapeError("prompt: expected mask " + shape_str(want) + ", got " +
                     shape_str(mask.shape()));
  }
  Var x = nchw_to_nhwc(mask);
  for (const auto& conv : convs) x = gelu(conv(x));
  const int64_t batch = x.dim(0), n = x.dim(1) * x.dim(2);
  return to_tokens(reshape(x, {batch, n, x.dim(3)}));
}

void PromptEncoder::collect(ParamList& out, const std::string& prefix) const {
  for (size_t i = 0; i < convs.size(); ++i) {
    convs[i].collect(out, prefix + ".convs." + std::to_string(i));
  }
  to_tokens.collect(out, prefix + ".to_tokens");
}

FilmHead::FilmHead(int64_t token_dim, int64_t dim)
    : to_gamma(Linear::zeros(token_dim, dim)), to_beta(Linear::zeros(token_dim, dim)) {}

FilmParams FilmHead::operator()(const Var& prompts) const {
  Var pooled = mean_tokens(prompts);
  Var delta = to_gamma(pooled);
  FilmParams p;
  p.gamma = add(Var(Tensor(delta.shape(), 1.0f)), delta);
  p.beta = to_beta(pooled);
  return p;
}

void FilmHead::collect(ParamList& out, const std::string& prefix) const {
  to_gamma.collect(out, prefix + ".gamma");
  to_beta.collect(out, prefix + ".beta");
}

Var modulate(const Var& z, const FilmParams& p) {
  if (z.shape().size() != 3 || p.gamma.shape() != Shape{z.dim(0), z.dim(2)} ||
      p.beta.shape() != p.gamma.shape()) {
    throw ShapeError("modulate: tokens " + shape_str(z.shape()) + " with gamma " +
                     shape_str(p.gamma.shape()) + " and beta " + shape_str(p.beta.shape()));
  }
  return film(z, p.gamma, p.beta);
}

Tapi::Tapi(const PromptEncoderConfig& config, const Mae& prior, Rng& rng)
    : prompt(config, prior.config.image_size, rng),
      film(config.token_dim, prior.config.dim),
      decoder(prior.decoder.clone()) {
  decoder.mask_token.set_requires_grad(false);  // never used at full visibility
  for (auto& p : decoder_params()) {
    if (p.var.node() != decoder.pos.node() && p.var.node() != decoder.mask_token.node()) {
      p.var.set_requires_grad(true);
    }
  }
}

GuidedRecon Tapi::guided_reconstruct(const Mae& prior, const MaeDecoder& dec,
                                     const Tensor& images, const Tensor& tokens,
                                     const Var& mask) const {
  GuidedRecon r;
  r.prompts = prompt(mask);
  r.film = film(r.prompts);
  r.x_rec = prior.to_image(dec(modulate(Var(tokens), r.film)));
  r.residual = abs(sub(Var(images), r.x_rec));
  return r;
}

ParamList Tapi::prompt_params() const {
  ParamList out;
  prompt.collect(out, "tapi.prompt");
  return out;
}

ParamList Tapi::film_params() const {
  ParamList out;
  film.collect(out, "tapi.film");
  return out;
}

ParamList Tapi::decoder_params() const {
  ParamList out;
  decoder.collect(out, "mae.decoder_stage2");
  return out;
}

bool same_decoder_values(const MaeDecoder& a, const MaeDecoder& b) {
  ParamList pa, pb;
  a.collect(pa, "");
  b.collect(pb, "");
  if (pa.size() != pb.size()) return false;
  for (size_t i = 0; i < pa.size(); ++i) {
    if (pa[i].var.value() != pb[i].var.value()) return false;
  }
  return true;
}

}  // namespace rloop
