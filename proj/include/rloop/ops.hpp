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

// Differentiable tensor ops. Image-like Vars are NHWC ([batch, h, w, c]) unless
// the name says otherwise; token Vars are [batch, tokens, channels].

#include <vector>

#include "rloop/autograd.hpp"

namespace rloop {

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, float factor);
// a + factor * b for tensors of equal shape.
Var add_scaled(const Var& a, const Var& b, float factor);
Var abs(const Var& a);
Var sigmoid(const Var& a);
Var gelu(const Var& a);
Var relu(const Var& a);

// x: [..., n] plus bias [n].
Var add_bias(const Var& x, const Var& bias);
// x: [batch, tokens, dim] plus table [tokens, dim] shared over the batch.
Var add_per_token(const Var& x, const Var& table);

// x: [..., in] times weight [in, out], plus optional bias [out].
Var linear(const Var& x, const Var& weight, const Var& bias);

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, float eps);

// Multi-head scaled dot-product attention without projections.
// q: [batch, q_len, dim]; k, v: [batch, kv_len, dim]. When `probs` is given it
// receives the softmax weights [batch, heads, q_len, kv_len].
Var attention(const Var& q, const Var& k, const Var& v, int64_t heads, Tensor* probs = nullptr);

// x: [batch, h, w, in_c]; weight: [kernel*kernel*in_c, out_c]; bias [out_c].
Var conv2d(const Var& x, const Var& weight, const Var& bias, int64_t kernel, int64_t stride,
           int64_t pad);
// 3x3 depthwise, stride 1, padding 1. weight: [9, c]; bias [c].
Var depthwise_conv3x3(const Var& x, const Var& weight, const Var& bias);

Var upsample_bilinear(const Var& x, int64_t out_h, int64_t out_w);

// Concatenation along the last axis.
Var concat_last(const std::vector<Var>& parts);

// [batch, tokens, dim] -> [batch, dim], mean over tokens.
Var mean_tokens(const Var& x);

// z[b, n, d] * gamma[b, d] + beta[b, d].
Var film(const Var& z, const Var& gamma, const Var& beta);

Var reshape(const Var& x, Shape shape);

// Selects rows ids[b] from each batch entry: [batch, n, d] -> [batch, k, d].
Var gather_tokens(const Var& x, const std::vector<std::vector<int64_t>>& ids);
// Inverse layout of gather_tokens: rows of `x` land at ids[b]; every other of
// the `tokens` positions takes the shared `fill` vector [d].
Var scatter_tokens(const Var& x, const Var& fill, const std::vector<std::vector<int64_t>>& ids,
                   int64_t tokens);

Var nchw_to_nhwc(const Var& x);
Var nhwc_to_nchw(const Var& x);

// [batch, c, h, w] -> [batch, (h/p)*(w/p), p*p*c]; patch vectors are laid out
// as (row-in-patch, col-in-patch, channel).
Var patchify(const Var& images, int64_t patch);
Var unpatchify(const Var& tokens, int64_t channels, int64_t height, int64_t width,
               int64_t patch);

Var sum_all(const Var& x);
Var mean_all(const Var& x);

}  // namespace rloop
