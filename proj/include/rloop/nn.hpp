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

// Layer building blocks. Layers are small value types holding parameter Vars;
// copying a layer shares its parameters (use copy_values for a deep copy).

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "rloop/autograd.hpp"
#include "rloop/ops.hpp"

namespace rloop {

using Rng = std::mt19937_64;

struct NamedParam {
  std::string name;
  Var var;
};
using ParamList = std::vector<NamedParam>;

void append_param(ParamList& out, const std::string& prefix, const std::string& name,
                  const Var& var);
// Copies values (not handles) from `src` into `dst`, matching by position.
void copy_values(const ParamList& dst, const ParamList& src);
void set_trainable(const ParamList& params, bool trainable);
// Checksum over all parameter values, in list order.
uint64_t params_checksum(const ParamList& params);

Tensor xavier_uniform(Shape shape, int64_t fan_in, int64_t fan_out, Rng& rng);
Tensor normal_tensor(Shape shape, float stddev, Rng& rng);

class Linear {
 public:
  Linear() = default;
  Linear(int64_t in, int64_t out, Rng& rng);
  // Weight and bias start at zero.
  static Linear zeros(int64_t in, int64_t out);

  Var operator()(const Var& x) const { return linear(x, weight, bias); }
  void collect(ParamList& out, const std::string& prefix) const;

  Var weight;  // [in, out]
  Var bias;    // [out]
};

class LayerNormLayer {
 public:
  LayerNormLayer() = default;
  LayerNormLayer(int64_t dim, float eps = 1e-6f);

  Var operator()(const Var& x) const { return layer_norm(x, gamma, beta, eps); }
  void collect(ParamList& out, const std::string& prefix) const;

  Var gamma;
  Var beta;
  float eps = 1e-6f;
};

// NHWC convolution lowered to im2col + gemm.
class Conv2dLayer {
 public:
  Conv2dLayer() = default;
  Conv2dLayer(int64_t in_c, int64_t out_c, int64_t kernel, int64_t stride, int64_t pad, Rng& rng);

  Var operator()(const Var& x) const { return conv2d(x, weight, bias, kernel, stride, pad); }
  void collect(ParamList& out, const std::string& prefix) const;

  Var weight;  // [kernel*kernel*in_c, out_c]
  Var bias;
  int64_t kernel = 1;
  int64_t stride = 1;
  int64_t pad = 0;
};

class DepthwiseConv3x3 {
 public:
  DepthwiseConv3x3() = default;
  DepthwiseConv3x3(int64_t channels, Rng& rng);

  Var operator()(const Var& x) const { return depthwise_conv3x3(x, weight, bias); }
  void collect(ParamList& out, const std::string& prefix) const;

  Var weight;  // [9, channels]
  Var bias;
};

class Mlp {
 public:
  Mlp() = default;
  Mlp(int64_t dim, int64_t hidden, Rng& rng);

  Var operator()(const Var& x) const { return fc2(gelu(fc1(x))); }
  void collect(ParamList& out, const std::string& prefix) const;

  Linear fc1;
  Linear fc2;
};

// Multi-head self attention with separate q/k/v projections.
class SelfAttention {
 public:
  SelfAttention() = default;
  SelfAttention(int64_t dim, int64_t heads, Rng& rng);

  Var operator()(const Var& x) const;
  void collect(ParamList& out, const std::string& prefix) const;

  Linear q, k, v, proj;
  int64_t heads = 1;
};

// Pre-norm transformer block: x + attn(norm(x)), then x + mlp(norm(x)).
class TransformerBlock {
 public:
  TransformerBlock() = default;
  TransformerBlock(int64_t dim, int64_t heads, int64_t mlp_ratio, Rng& rng);

  Var operator()(const Var& x) const;
  void collect(ParamList& out, const std::string& prefix) const;

  LayerNormLayer norm1;
  SelfAttention attn;
  LayerNormLayer norm2;
  Mlp mlp;
};

// Fixed 2-D sine-cosine position table [grid*grid, dim]; dim % 4 == 0.
Tensor sincos_position_table(int64_t grid, int64_t dim);

}  // namespace rloop
