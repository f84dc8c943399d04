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

// Prompt-driven modulation of the frozen prior.
//
// The coarse mask is encoded by strided convolutions into a small grid of
// prompt tokens. Their mean drives two affine maps that produce per-channel
// scale and shift for the encoder tokens:
//
//   gamma = 1 + g(mean(T)),  beta = b(mean(T)),  z' = gamma * z + beta
//
// g and b start at zero, so modulation is the identity until trained. A
// trainable copy of the pretrained decoder turns z' into the second
// reconstruction.

#include <cstdint>
#include <vector>

#include "rloop/mae.hpp"

namespace rloop {

struct PromptEncoderConfig {
  // One stride-2 3x3 convolution per entry.
  std::vector<int64_t> channels{16, 32, 32, 64};
  int64_t downsample = 16;
  int64_t token_dim = 64;

  void validate(int64_t image_size) const;
  int64_t grid(int64_t image_size) const { return image_size / downsample; }
};

class PromptEncoder {
 public:
  PromptEncoder() = default;
  PromptEncoder(const PromptEncoderConfig& config, int64_t image_size, Rng& rng);

  // mask: [batch, 1, h, w] -> tokens [batch, n_p, token_dim].
  Var operator()(const Var& mask) const;
  void collect(ParamList& out, const std::string& prefix) const;

  PromptEncoderConfig config;
  int64_t image_size = 64;
  std::vector<Conv2dLayer> convs;
  Linear to_tokens;
};

struct FilmParams {
  Var gamma;  // [batch, dim]
  Var beta;   // [batch, dim]
};

class FilmHead {
 public:
  FilmHead() = default;
  FilmHead(int64_t token_dim, int64_t dim);

  FilmParams operator()(const Var& prompts) const;
  void collect(ParamList& out, const std::string& prefix) const;

  Linear to_gamma;  // zero-initialized
  Linear to_beta;   // zero-initialized
};

// z[b, n, d] * gamma[b, d] + beta[b, d].
Var modulate(const Var& z, const FilmParams& p);

struct GuidedRecon {
  Var prompts;
  FilmParams film;
  Var x_rec;
  Var residual;
};

class Tapi {
 public:
  Tapi() = default;
  // The stage-2 decoder starts as a deep copy of `prior`'s decoder.
  Tapi(const PromptEncoderConfig& config, const Mae& prior, Rng& rng);

  // tokens: frozen encoder output for `images`; mask: the coarse prediction.
  // `decoder` selects which decoder turns modulated tokens into pixels.
  GuidedRecon guided_reconstruct(const Mae& prior, const MaeDecoder& decoder, const Tensor& images,
                                 const Tensor& tokens, const Var& mask) const;

  ParamList prompt_params() const;
  ParamList film_params() const;
  ParamList decoder_params() const;

  PromptEncoder prompt;
  FilmHead film;
  MaeDecoder decoder;
};

// True when both decoders hold bit-identical parameter values.
bool same_decoder_values(const MaeDecoder& a, const MaeDecoder& b);

}  // namespace rloop
