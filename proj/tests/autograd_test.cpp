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

#include "rloop/autograd.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "gtest/gtest.h"
#include "rloop/ops.hpp"

namespace rloop {
namespace {

Tensor RandomTensor(Shape shape, uint64_t seed, float lo = -1.0f, float hi = 1.0f) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> dist(lo, hi);
  Tensor t(std::move(shape));
  for (float& v : t.values()) v = dist(rng);
  return t;
}

// Reduces an op output to a scalar with fixed random weights, then compares
// the analytic gradient of every input with central differences.
void CheckGradients(const std::function<Var(const std::vector<Var>&)>& fn,
                    std::vector<Tensor> inputs, float tol = 2e-2f, float h = 1e-2f) {
  std::vector<Var> vars;
  for (auto& t : inputs) vars.emplace_back(t, true);
  Var out = fn(vars);
  const Tensor weights = RandomTensor(out.shape(), 99);
  auto loss_of = [&](const std::vector<Var>& v) {
    Var o = fn(v);
    double s = 0.0;
    for (int64_t i = 0; i < o.numel(); ++i) s += double(o.value()[i]) * weights[i];
    return s;
  };
  backward(out, weights);

  for (size_t p = 0; p < vars.size(); ++p) {
    ASSERT_TRUE(vars[p].has_grad()) << "input " << p;
    const Tensor analytic = vars[p].grad();
    for (int64_t i = 0; i < inputs[p].numel(); ++i) {
      std::vector<Var> plus, minus;
      for (size_t q = 0; q < inputs.size(); ++q) {
        Tensor tp = inputs[q], tm = inputs[q];
        if (q == p) {
          tp[i] += h;
          tm[i] -= h;
        }
        plus.emplace_back(tp, false);
        minus.emplace_back(tm, false);
      }
      const double numeric = (loss_of(plus) - loss_of(minus)) / (2.0 * h);
      ASSERT_NEAR(analytic[i], numeric, tol * (1.0 + std::fabs(numeric)))
          << "input " << p << " element " << i;
    }
  }
}

TEST(AutogradTest, ElementwiseOps) {
  Tensor a = RandomTensor({2, 5}, 1), b = RandomTensor({2, 5}, 2);
  CheckGradients([](const auto& v) { return add(v[0], v[1]); }, {a, b});
  CheckGradients([](const auto& v) { return sub(v[0], v[1]); }, {a, b});
  CheckGradients([](const auto& v) { return mul(v[0], v[1]); }, {a, b});
  CheckGradients([](const auto& v) { return add_scaled(v[0], v[1], -0.7f); }, {a, b});
  CheckGradients([](const auto& v) { return scale(v[0], 3.0f); }, {a});
  CheckGradients([](const auto& v) { return sigmoid(v[0]); }, {a});
  CheckGradients([](const auto& v) { return gelu(v[0]); }, {a});
}

TEST(AutogradTest, KinkedOpsAwayFromZero) {
  Tensor a = RandomTensor({3, 4}, 3, 0.1f, 1.0f);
  for (int64_t i = 0; i < a.numel(); i += 2) a[i] = -a[i];
  CheckGradients([](const auto& v) { return abs(v[0]); }, {a});
  CheckGradients([](const auto& v) { return relu(v[0]); }, {a});
}

TEST(AutogradTest, AbsHasZeroSubgradientAtZero) {
  Var x(Tensor({3}, {0.0f, 2.0f, -1.0f}), true);
  backward(sum_all(abs(x)));
  EXPECT_EQ(x.grad()[0], 0.0f);
  EXPECT_EQ(x.grad()[1], 1.0f);
  EXPECT_EQ(x.grad()[2], -1.0f);
}

TEST(AutogradTest, BiasAndLinear) {
  CheckGradients([](const auto& v) { return add_bias(v[0], v[1]); },
                 {RandomTensor({2, 3, 4}, 4), RandomTensor({4}, 5)});
  CheckGradients([](const auto& v) { return add_per_token(v[0], v[1]); },
                 {RandomTensor({2, 3, 4}, 6), RandomTensor({3, 4}, 7)});
  CheckGradients([](const auto& v) { return linear(v[0], v[1], v[2]); },
                 {RandomTensor({2, 3, 5}, 8), RandomTensor({5, 4}, 9), RandomTensor({4}, 10)});
  CheckGradients([](const auto& v) { return linear(v[0], v[1], Var()); },
                 {RandomTensor({3, 5}, 11), RandomTensor({5, 2}, 12)});
}

TEST(AutogradTest, LayerNorm) {
  CheckGradients([](const auto& v) { return layer_norm(v[0], v[1], v[2], 1e-6f); },
                 {RandomTensor({2, 3, 6}, 13), RandomTensor({6}, 14), RandomTensor({6}, 15)},
                 3e-2f, 5e-3f);
}

TEST(AutogradTest, Attention) {
  CheckGradients([](const auto& v) { return attention(v[0], v[1], v[2], 2); },
                 {RandomTensor({2, 3, 4}, 16), RandomTensor({2, 5, 4}, 17),
                  RandomTensor({2, 5, 4}, 18)});
}

TEST(AutogradTest, Convolutions) {
  CheckGradients([](const auto& v) { return conv2d(v[0], v[1], v[2], 3, 2, 1); },
                 {RandomTensor({1, 5, 6, 2}, 19), RandomTensor({18, 3}, 20),
                  RandomTensor({3}, 21)});
  CheckGradients([](const auto& v) { return depthwise_conv3x3(v[0], v[1], v[2]); },
                 {RandomTensor({2, 4, 3, 2}, 22), RandomTensor({9, 2}, 23),
                  RandomTensor({2}, 24)});
}

TEST(AutogradTest, UpsampleAndLayout) {
  CheckGradients([](const auto& v) { return upsample_bilinear(v[0], 7, 5); },
                 {RandomTensor({1, 3, 2, 2}, 25)});
  CheckGradients([](const auto& v) { return nchw_to_nhwc(v[0]); }, {RandomTensor({2, 3, 2, 4}, 26)});
  CheckGradients([](const auto& v) { return nhwc_to_nchw(v[0]); }, {RandomTensor({2, 3, 2, 4}, 27)});
  CheckGradients([](const auto& v) { return patchify(v[0], 2); }, {RandomTensor({2, 3, 4, 6}, 28)});
  CheckGradients([](const auto& v) { return unpatchify(v[0], 3, 4, 6, 2); },
                 {RandomTensor({2, 6, 12}, 29)});
}

TEST(AutogradTest, TokenOps) {
  CheckGradients([](const auto& v) { return concat_last({v[0], v[1]}); },
                 {RandomTensor({2, 3}, 30), RandomTensor({2, 4}, 31)});
  CheckGradients([](const auto& v) { return mean_tokens(v[0]); }, {RandomTensor({2, 5, 3}, 32)});
  CheckGradients([](const auto& v) { return film(v[0], v[1], v[2]); },
                 {RandomTensor({2, 4, 3}, 33), RandomTensor({2, 3}, 34), RandomTensor({2, 3}, 35)});
  const std::vector<std::vector<int64_t>> ids{{3, 0}, {1, 2}};
  CheckGradients([&](const auto& v) { return gather_tokens(v[0], ids); },
                 {RandomTensor({2, 4, 3}, 36)});
  CheckGradients([&](const auto& v) { return scatter_tokens(v[0], v[1], ids, 4); },
                 {RandomTensor({2, 2, 3}, 37), RandomTensor({3}, 38)});
  CheckGradients([](const auto& v) { return mean_all(v[0]); }, {RandomTensor({2, 5}, 39)});
}

TEST(AutogradTest, PatchifyRoundTrip) {
  Tensor img = RandomTensor({2, 3, 8, 8}, 40);
  Var tokens = patchify(Var(img), 4);
  EXPECT_EQ(tokens.shape(), (Shape{2, 4, 48}));
  Var back = unpatchify(tokens, 3, 8, 8, 4);
  EXPECT_EQ(back.value(), img);
}

TEST(AutogradTest, SharedInputAccumulates) {
  Var x(Tensor({2}, {1.5f, -2.0f}), true);
  backward(sum_all(mul(x, x)));
  EXPECT_FLOAT_EQ(x.grad()[0], 3.0f);
  EXPECT_FLOAT_EQ(x.grad()[1], -4.0f);
}

TEST(AutogradTest, NoGradGuardSkipsGraph) {
  Var x(Tensor({2}, 1.0f), true);
  NoGradGuard guard;
  Var y = scale(x, 2.0f);
  EXPECT_FALSE(y.requires_grad());
}

}  // namespace
}  // namespace rloop
