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

#include <vector>

#include "rloop/nn.hpp"

namespace rloop {

struct AdamWOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-5;
};

// AdamW with decoupled weight decay. Parameters that do not require a
// gradient are skipped entirely, so frozen groups are never written.
class AdamW {
 public:
  AdamW(ParamList params, AdamWOptions options);

  void step();
  void zero_grad();
  const ParamList& params() const { return params_; }
  int64_t steps() const { return steps_; }

 private:
  ParamList params_;
  AdamWOptions options_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  int64_t steps_ = 0;
};

// Global L2 norm of all gradients present in `params`.
double grad_norm(const ParamList& params);
// Rescales gradients so their global norm is at most `max_norm`. Returns the
// norm before clipping.
double clip_grad_norm(const ParamList& params, double max_norm);

}  // namespace rloop
