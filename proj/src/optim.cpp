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

#include "rloop/optim.hpp"

#include <cmath>

namespace rloop {

AdamW::AdamW(ParamList params, AdamWOptions options)
    : params_(std::move(params)), options_(options) {
  for (const auto& p : params_) {
    m_.emplace_back(p.var.shape());
    v_.emplace_back(p.var.shape());
  }
}

void AdamW::step() {
  ++steps_;
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(steps_));
  const float lr = static_cast<float>(options_.lr);
  const float decay = static_cast<float>(1.0 - options_.lr * options_.weight_decay);
  const float b1 = static_cast<float>(options_.beta1);
  const float b2 = static_cast<float>(options_.beta2);
  const float eps = static_cast<float>(options_.eps);
  const float step_scale = static_cast<float>(1.0 / bc1);
  const float v_scale = static_cast<float>(1.0 / bc2);
  for (size_t i = 0; i < params_.size(); ++i) {
    Var var = params_[i].var;
    if (!var.requires_grad() || !var.has_grad()) continue;
    Tensor& w = var.mutable_value();
    const Tensor& g = var.grad();
    float* m = m_[i].data();
    float* v = v_[i].data();
    for (int64_t j = 0; j < w.numel(); ++j) {
      m[j] = b1 * m[j] + (1.0f - b1) * g[j];
      v[j] = b2 * v[j] + (1.0f - b2) * g[j] * g[j];
      const float mhat = m[j] * step_scale;
      const float vhat = v[j] * v_scale;
      w[j] = w[j] * decay - lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

void AdamW::zero_grad() {
  for (const auto& p : params_) {
    Var v = p.var;
    v.zero_grad();
  }
}

double grad_norm(const ParamList& params) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (!p.var.has_grad()) continue;
    for (float g : p.var.grad().values()) sq += static_cast<double>(g) * g;
  }
  return std::sqrt(sq);
}

double clip_grad_norm(const ParamList& params, double max_norm) {
  const double norm = grad_norm(params);
  if (norm > max_norm && norm > 0.0) {
    const float factor = static_cast<float>(max_norm / (norm + 1e-6));
    for (const auto& p : params) {
      if (!p.var.has_grad()) continue;
      Var v = p.var;
      for (float& g : v.mutable_grad().values()) g *= factor;
    }
  }
  return norm;
}

}  // namespace rloop
