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

// Compute kernels behind the autograd ops. Every kernel in `kernels` has a
// serial twin in `kernels::reference` with the same signature; the reference
// versions are plain loops kept for tests and the benchmark target.
//
// All image-like buffers are NHWC (channels last), matching the token layout
// [batch, tokens, channels] used by the transformer layers.
//
// Backward kernels accumulate (+=) into their gradient outputs.

#include <cstdint>
#include <span>

namespace rloop::kernels {

// C = op(A) * op(B), or C += ... when `accumulate`. Row-major, contiguous.
// op(A) is m x k and op(B) is k x n. Each output element is summed over k in
// ascending order regardless of m, n or thread count, so a row's result does
// not depend on which other rows share the call.
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, const float* a,
          const float* b, float* c, bool accumulate);

struct AttentionDims {
  int64_t batch = 1;
  int64_t q_len = 1;
  int64_t kv_len = 1;
  int64_t heads = 1;
  int64_t head_dim = 1;
  int64_t model_dim() const { return heads * head_dim; }
};

// q: [batch, q_len, heads*head_dim]; k, v: [batch, kv_len, heads*head_dim].
// probs receives softmax weights [batch, heads, q_len, kv_len].
void attention_forward(const AttentionDims& d, const float* q, const float* k, const float* v,
                       float* out, float* probs);
void attention_backward(const AttentionDims& d, const float* q, const float* k, const float* v,
                        const float* probs, const float* d_out, float* d_q, float* d_k,
                        float* d_v);

struct ConvDims {
  int64_t batch = 1;
  int64_t in_h = 1;
  int64_t in_w = 1;
  int64_t in_c = 1;
  int64_t kernel = 1;
  int64_t stride = 1;
  int64_t pad = 0;
  int64_t out_h() const { return (in_h + 2 * pad - kernel) / stride + 1; }
  int64_t out_w() const { return (in_w + 2 * pad - kernel) / stride + 1; }
  int64_t patch_size() const { return kernel * kernel * in_c; }
};

// cols: [batch*out_h*out_w, kernel*kernel*in_c], zero padded.
void im2col(const ConvDims& d, const float* x, float* cols);
void col2im(const ConvDims& d, const float* cols, float* dx);

// 3x3 depthwise convolution, stride 1, zero padding 1. weight: [9, channels].
void depthwise_conv3x3_forward(int64_t batch, int64_t h, int64_t w, int64_t channels,
                               const float* x, const float* weight, const float* bias, float* y);
void depthwise_conv3x3_backward(int64_t batch, int64_t h, int64_t w, int64_t channels,
                                const float* x, const float* weight, const float* dy, float* dx,
                                float* d_weight, float* d_bias);

// Row-wise normalization over the last axis. mean/rstd hold one value per row.
void layer_norm_forward(int64_t rows, int64_t cols, const float* x, const float* gamma,
                        const float* beta, float eps, float* y, float* mean, float* rstd);
void layer_norm_backward(int64_t rows, int64_t cols, const float* x, const float* gamma,
                         const float* mean, const float* rstd, const float* dy, float* dx,
                         float* d_gamma, float* d_beta);

// Exact (erf) GELU.
void gelu_forward(int64_t n, const float* x, float* y);
void gelu_backward(int64_t n, const float* x, const float* dy, float* dx);

// Bilinear resize, NHWC, align_corners = false.
void upsample_bilinear_forward(int64_t batch, int64_t in_h, int64_t in_w, int64_t channels,
                               int64_t out_h, int64_t out_w, const float* x, float* y);
void upsample_bilinear_backward(int64_t batch, int64_t in_h, int64_t in_w, int64_t channels,
                                int64_t out_h, int64_t out_w, const float* dy, float* dx);

// Separable convolution of a planar [channels, h, w] image with a symmetric
// odd-length kernel, reflect (mirror without edge repeat) padding.
void gaussian_blur(int64_t channels, int64_t h, int64_t w, const float* x,
                   std::span<const double> kernel, float* y);

namespace reference {

void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, const float* a,
          const float* b, float* c, bool accumulate);
void attention_forward(const AttentionDims& d, const float* q, const float* k, const float* v,
                       float* out, float* probs);
void attention_backward(const AttentionDims& d, const float* q, const float* k, const float* v,
                        const float* probs, const float* d_out, float* d_q, float* d_k,
                        float* d_v);
void im2col(const ConvDims& d, const float* x, float* cols);
void col2im(const ConvDims& d, const float* cols, float* dx);
void depthwise_conv3x3_forward(int64_t batch, int64_t h, int64_t w, int64_t channels,
                               const float* x, const float* weight, const float* bias, float* y);
void depthwise_conv3x3_backward(int64_t batch, int64_t h, int64_t w, int64_t channels,
                                const float* x, const float* weight, const float* dy, float* dx,
                                float* d_weight, float* d_bias);
void layer_norm_forward(int64_t rows, int64_t cols, const float* x, const float* gamma,
                        const float* beta, float eps, float* y, float* mean, float* rstd);
void layer_norm_backward(int64_t rows, int64_t cols, const float* x, const float* gamma,
                         const float* mean, const float* rstd, const float* dy, float* dx,
                         float* d_gamma, float* d_beta);
void gelu_forward(int64_t n, const float* x, float* y);
void gelu_backward(int64_t n, const float* x, const float* dy, float* dx);
void upsample_bilinear_forward(int64_t batch, int64_t in_h, int64_t in_w, int64_t channels,
                               int64_t out_h, int64_t out_w, const float* x, float* y);
void upsample_bilinear_backward(int64_t batch, int64_t in_h, int64_t in_w, int64_t channels,
                                int64_t out_h, int64_t out_w, const float* dy, float* dx);
void gaussian_blur(int64_t channels, int64_t h, int64_t w, const float* x,
                   std::span<const double> kernel, float* y);

}  // namespace reference

// Reflect-101 index folding shared by the blur kernels.
inline int64_t reflect_index(int64_t i, int64_t n) {
  if (n == 1) return 0;
  const int64_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace rloop::kernels
