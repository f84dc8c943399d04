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

#include "rloop/nn.hpp"

#include <cmath>

#include "rloop/errors.hpp"

namespace rloop {

void append_param(ParamList& out, const std::string& prefix, const std::string& name,
                  const Var& var) {
  out.push_back({prefix.empty() ? name : prefix + "." + name, var});
}

void copy_values(const ParamList& dst, const ParamList& src) {
  if (dst.size() != src.size()) throw ShapeError("copy_values: parameter count mismatch");
  for (size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].var.shape() != src[i].var.shape()) {
      throw ShapeError("copy_values: " + dst[i].name + " " + shape_str(dst[i].var.shape()) +
                       " vs " + src[i].name + " " + shape_str(src[i].var.shape()));
    }
    Var target = dst[i].var;
    target.mutable_value() = src[i].var.value();
  }
}

void set_trainable(const ParamList& params, bool trainable) {
  for (const auto& p : params) {
    Var v = p.var;
    v.set_requires_grad(trainable);
    if (!trainable) v.zero_grad();
  }
}

uint64_t params_checksum(const ParamList& params) {
  uint64_t h = 1469598103934665603ULL;
  for (const auto& p : params) {
    h ^= checksum(p.var.value().values());
    h *= 1099511628211ULL;
  }
  return h;
}

Tensor xavier_uniform(Shape shape, int64_t fan_in, int64_t fan_out, Rng& rng) {
  const float limit = std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
  std::uniform_real_distribution<float> dist(-limit, limit);
  Tensor t(std::move(shape));
  for (float& v : t.values()) v = dist(rng);
  return t;
}

Tensor normal_tensor(Shape shape, float stddev, Rng& rng) {
  std::normal_distribution<float> dist(0.0f, stddev);
  Tensor t(std::move(shape));
  for (float& v : t.values()) v = dist(rng);
  return t;
}

Linear::Linear(int64_t in, int64_t out, Rng& rng)
    : weight(xavier_uniform(Shape{in, out}, in, out, rng), true), bias(Tensor(Shape{out}), true) {}

Linear Linear::zeros(int64_t in, int64_t out) {
  Linear l;
  l.weight = Var(Tensor(Shape{in, out}), true);
  l.bias = Var(Tensor(Shape{out}), true);
  return l;
}

void Linear::collect(ParamList& out, const std::string& prefix) const {
  append_param(out, prefix, "weight", weight);
  append_param(out, prefix, "bias", bias);
}

LayerNormLayer::LayerNormLayer(int64_t dim, float eps_)
    : gamma(Tensor(Shape{dim}, 1.0f), true), beta(Tensor(Shape{dim}), true), eps(eps_) {}

void LayerNormLayer::collect(ParamList& out, const std::string& prefix) const {
  append_param(out, prefix, "gamma", gamma);
  append_param(out, prefix, "beta", beta);
}

Conv2dLayer::Conv2dLayer(int64_t in_c, int64_t out_c, int64_t kernel_, int64_t stride_,
                         int64_t pad_, Rng& rng)
    : kernel(kernel_), stride(stride_), pad(pad_) {
  // He-style init on fan-out, as in the hierarchical segmentation encoders.
  const float stddev = std::sqrt(2.0f / static_cast<float>(kernel * kernel * out_c));
  weight = Var(normal_tensor(Shape{kernel * kernel * in_c, out_c}, stddev, rng), true);
  bias = Var(Tensor(Shape{out_c}), true);
}

void Conv2dLayer::collect(ParamList& out, const std::string& prefix) const {
  append_param(out, prefix, "weight", weight);
  append_param(out, prefix, "bias", bias);
}

DepthwiseConv3x3::DepthwiseConv3x3(int64_t channels, Rng& rng)
    : weight(normal_tensor(Shape{9, channels}, std::sqrt(2.0f / 9.0f), rng), true),
      bias(Tensor(Shape{channels}), true) {}

void DepthwiseConv3x3::collect(ParamList& out, const std::string& prefix) const {
  append_param(out, prefix, "weight", weight);
  append_param(out, prefix, "bias", bias);
}

Mlp::Mlp(int64_t dim, int64_t hidden, Rng& rng) : fc1(dim, hidden, rng), fc2(hidden, dim, rng) {}

void Mlp::collect(ParamList& out, const std::string& prefix) const {
  fc1.collect(out, prefix + ".fc1");
  fc2.collect(out, prefix + ".fc2");
}

SelfAttention::SelfAttention(int64_t dim, int64_t heads_, Rng& rng)
    : q(dim, dim, rng), k(dim, dim, rng), v(dim, dim, rng), proj(dim, dim, rng), heads(heads_) {
  if (heads <= 0 || dim % heads != 0) {
    throw ConfigError("attention dim " + std::to_string(dim) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
}

Var SelfAttention::operator()(const Var& x) const {
  return proj(attention(q(x), k(x), v(x), heads));
}

void SelfAttention::collect(ParamList& out, const std::string& prefix) const {
  q.collect(out, prefix + ".q");
  k.collect(out, prefix + ".k");
  v.collect(out, prefix + ".v");
  proj.collect(out, prefix + ".proj");
}

TransformerBlock::TransformerBlock(int64_t dim, int64_t heads, int64_t mlp_ratio, Rng& rng)
    : norm1(dim), attn(dim, heads, rng), norm2(dim), mlp(dim, dim * mlp_ratio, rng) {}

Var TransformerBlock::operator()(const Var& x) const {
  Var h = add(x, attn(norm1(x)));
  return add(h, mlp(norm2(h)));
}

void TransformerBlock::collect(ParamList& out, const std::string& prefix) const {
  norm1.collect(out, prefix + ".norm1");
  attn.collect(out, prefix + ".attn");
  norm2.collect(out, prefix + ".norm2");
  mlp.collect(out, prefix + ".mlp");
}

Tensor sincos_position_table(int64_t grid, int64_t dim) {
  if (dim % 4 != 0) throw ConfigError("position table dim must be divisible by 4");
  Tensor t(Shape{grid * grid, dim});
  const int64_t quarter = dim / 4;
  for (int64_t gy = 0; gy < grid; ++gy) {
    for (int64_t gx = 0; gx < grid; ++gx) {
      float* row = t.data() + (gy * grid + gx) * dim;
      for (int64_t i = 0; i < quarter; ++i) {
        const double omega = 1.0 / std::pow(10000.0, static_cast<double>(i) / quarter);
        row[i] = static_cast<float>(std::sin(gx * omega));
        row[quarter + i] = static_cast<float>(std::cos(gx * omega));
        row[2 * quarter + i] = static_cast<float>(std::sin(gy * omega));
        row[3 * quarter + i] = static_cast<float>(std::cos(gy * omega));
      }
    }
  }
  return t;
}

}  // namespace rloop
