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

#include "rloop/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

namespace rloop::kernels {
namespace {

constexpr int64_t kRowBlock = 8;
constexpr int64_t kColBlock = 16;
// Below this many multiply-adds a parallel region costs more than it saves.
constexpr int64_t kParallelWork = 1 << 16;

typedef float Vec16 __attribute__((vector_size(64)));

// Computes a kRowBlock x kColBlock tile of C over the full k range. `a` points
// at kRowBlock rows with stride lda; `panel` is op(B) packed as [k][16].
inline void micro_kernel(int64_t k, const float* a, int64_t lda, const float* panel, float* c,
                         int64_t ldc, int64_t rows, int64_t cols, bool accumulate) {
  Vec16 acc[kRowBlock];
  for (int64_t r = 0; r < kRowBlock; ++r) {
    acc[r] = Vec16{};
    if (accumulate && r < rows) {
      float tmp[kColBlock] = {};
      std::memcpy(tmp, c + r * ldc, static_cast<size_t>(cols) * sizeof(float));
      std::memcpy(&acc[r], tmp, sizeof(tmp));
    }
  }
  for (int64_t kk = 0; kk < k; ++kk) {
    Vec16 bv;
    std::memcpy(&bv, panel + kk * kColBlock, sizeof(bv));
    for (int64_t r = 0; r < kRowBlock; ++r) acc[r] += a[r * lda + kk] * bv;
  }
  for (int64_t r = 0; r < rows; ++r) {
    float tmp[kColBlock];
    std::memcpy(tmp, &acc[r], sizeof(tmp));
    std::memcpy(c + r * ldc, tmp, static_cast<size_t>(cols) * sizeof(float));
  }
}

}  // namespace

void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, const float* a,
          const float* b, float* c, bool accumulate) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    if (!accumulate) std::fill(c, c + m * n, 0.0f);
    return;
  }
  // Row-major op(A) with stride k.
  std::vector<float> a_packed;
  const float* a_rows = a;
  if (trans_a) {
    a_packed.resize(static_cast<size_t>(m * k));
    for (int64_t kk = 0; kk < k; ++kk)
      for (int64_t i = 0; i < m; ++i) a_packed[i * k + kk] = a[kk * m + i];
    a_rows = a_packed.data();
  }
  // op(B) in column panels of 16, zero padded.
  const int64_t panels = (n + kColBlock - 1) / kColBlock;
  std::vector<float> b_packed(static_cast<size_t>(panels * k * kColBlock), 0.0f);
  for (int64_t p = 0; p < panels; ++p) {
    float* dst = b_packed.data() + p * k * kColBlock;
    const int64_t j0 = p * kColBlock;
    const int64_t cols = std::min(kColBlock, n - j0);
    for (int64_t kk = 0; kk < k; ++kk) {
      if (trans_b) {
        for (int64_t j = 0; j < cols; ++j) dst[kk * kColBlock + j] = b[(j0 + j) * k + kk];
      } else {
        std::memcpy(dst + kk * kColBlock, b + kk * n + j0, static_cast<size_t>(cols) * sizeof(float));
      }
    }
  }

  const int64_t row_blocks = (m + kRowBlock - 1) / kRowBlock;
#pragma omp parallel for schedule(static) if (m * n * k > kParallelWork)
  for (int64_t rb = 0; rb < row_blocks; ++rb) {
    const int64_t i0 = rb * kRowBlock;
    const int64_t rows = std::min(kRowBlock, m - i0);
    const float* a_block = a_rows + i0 * k;
    std::vector<float> a_tail;
    if (rows < kRowBlock) {
      a_tail.assign(static_cast<size_t>(kRowBlock * k), 0.0f);
      std::memcpy(a_tail.data(), a_block, static_cast<size_t>(rows * k) * sizeof(float));
      a_block = a_tail.data();
    }
    for (int64_t p = 0; p < panels; ++p) {
      const int64_t j0 = p * kColBlock;
      micro_kernel(k, a_block, k, b_packed.data() + p * k * kColBlock, c + i0 * n + j0, n, rows,
                   std::min(kColBlock, n - j0), accumulate);
    }
  }
}

namespace {

void pack_head(const float* src, int64_t len, int64_t model_dim, int64_t offset,
               int64_t head_dim, float* dst) {
  for (int64_t i = 0; i < len; ++i)
    std::memcpy(dst + i * head_dim, src + i * model_dim + offset,
                static_cast<size_t>(head_dim) * sizeof(float));
}

void unpack_head_add(const float* src, int64_t len, int64_t model_dim, int64_t offset,
                     int64_t head_dim, float* dst) {
  for (int64_t i = 0; i < len; ++i)
    for (int64_t j = 0; j < head_dim; ++j) dst[i * model_dim + offset + j] += src[i * head_dim + j];
}

}  // namespace

void attention_forward(const AttentionDims& d, const float* q, const float* k, const float* v,
                       float* out, float* probs) {
  const int64_t dm = d.model_dim();
  const float scale = 1.0f / std::sqrt(static_cast<float>(d.head_dim));
  const int64_t pairs = d.batch * d.heads;
#pragma omp parallel for schedule(static)
  for (int64_t bh = 0; bh < pairs; ++bh) {
    const int64_t b = bh / d.heads;
    const int64_t h = bh % d.heads;
    const int64_t off = h * d.head_dim;
    std::vector<float> qh(static_cast<size_t>(d.q_len * d.head_dim));
    std::vector<float> kh(static_cast<size_t>(d.kv_len * d.head_dim));
    std::vector<float> vh(static_cast<size_t>(d.kv_len * d.head_dim));
    std::vector<float> oh(static_cast<size_t>(d.q_len * d.head_dim));
    pack_head(q + b * d.q_len * dm, d.q_len, dm, off, d.head_dim, qh.data());
    pack_head(k + b * d.kv_len * dm, d.kv_len, dm, off, d.head_dim, kh.data());
    pack_head(v + b * d.kv_len * dm, d.kv_len, dm, off, d.head_dim, vh.data());
    float* p = probs + bh * d.q_len * d.kv_len;
    gemm(false, true, d.q_len, d.kv_len, d.head_dim, qh.data(), kh.data(), p, false);
    for (int64_t i = 0; i < d.q_len; ++i) {
      float* row = p + i * d.kv_len;
      float mx = -INFINITY;
      for (int64_t j = 0; j < d.kv_len; ++j) {
        row[j] *= scale;
        mx = std::max(mx, row[j]);
      }
      float sum = 0.0f;
      for (int64_t j = 0; j < d.kv_len; ++j) {
        row[j] = std::exp(row[j] - mx);
        sum += row[j];
      }
      const float inv = 1.0f / sum;
      for (int64_t j = 0; j < d.kv_len; ++j) row[j] *= inv;
    }
    gemm(false, false, d.q_len, d.head_dim, d.kv_len, p, vh.data(), oh.data(), false);
    float* o = out + b * d.q_len * dm;
    for (int64_t i = 0; i < d.q_len; ++i)
      std::memcpy(o + i * dm + off, oh.data() + i * d.head_dim,
                  static_cast<size_t>(d.head_dim) * sizeof(float));
  }
}

void attention_backward(const AttentionDims& d, const float* q, const float* k, const float* v,
                        const float* probs, const float* d_out, float* d_q, float* d_k,
                        float* d_v) {
  const int64_t dm = d.model_dim();
  const float scale = 1.0f / std::sqrt(static_cast<float>(d.head_dim));
  const int64_t pairs = d.batch * d.heads;
#pragma omp parallel for schedule(static)
  for (int64_t bh = 0; bh < pairs; ++bh) {
    const int64_t b = bh / d.heads;
    const int64_t h = bh % d.heads;
    const int64_t off = h * d.head_dim;
    const size_t qn = static_cast<size_t>(d.q_len * d.head_dim);
    const size_t kn = static_cast<size_t>(d.kv_len * d.head_dim);
    std::vector<float> qh(qn), kh(kn), vh(kn), doh(qn), dqh(qn), dkh(kn), dvh(kn);
    std::vector<float> dp(static_cast<size_t>(d.q_len * d.kv_len));
    pack_head(q + b * d.q_len * dm, d.q_len, dm, off, d.head_dim, qh.data());
    pack_head(k + b * d.kv_len * dm, d.kv_len, dm, off, d.head_dim, kh.data());
    pack_head(v + b * d.kv_len * dm, d.kv_len, dm, off, d.head_dim, vh.data());
    pack_head(d_out + b * d.q_len * dm, d.q_len, dm, off, d.head_dim, doh.data());
    const float* p = probs + bh * d.q_len * d.kv_len;

    gemm(false, true, d.q_len, d.kv_len, d.head_dim, doh.data(), vh.data(), dp.data(), false);
    gemm(true, false, d.kv_len, d.head_dim, d.q_len, p, doh.data(), dvh.data(), false);
    for (int64_t i = 0; i < d.q_len; ++i) {
      const float* pr = p + i * d.kv_len;
      float* dr = dp.data() + i * d.kv_len;
      float dot = 0.0f;
      for (int64_t j = 0; j < d.kv_len; ++j) dot += pr[j] * dr[j];
      for (int64_t j = 0; j < d.kv_len; ++j) dr[j] = pr[j] * (dr[j] - dot) * scale;
    }
    gemm(false, false, d.q_len, d.head_dim, d.kv_len, dp.data(), kh.data(), dqh.data(), false);
    gemm(true, false, d.kv_len, d.head_dim, d.q_len, dp.data(), qh.data(), dkh.data(), false);

    unpack_head_add(dqh.data(), d.q_len, dm, off, d.head_dim, d_q + b * d.q_len * dm);
    unpack_head_add(dkh.data(), d.kv_len, dm, off, d.head_dim, d_k + b * d.kv_len * dm);
    unpack_head_add(dvh.data(), d.kv_len, dm, off, d.head_dim, d_v + b * d.kv_len * dm);
  }
}

void im2col(const ConvDims& d, const float* x, float* cols) {
  const int64_t oh = d.out_h();
  const int64_t ow = d.out_w();
  const int64_t ps = d.patch_size();
  const size_t chan_bytes = static_cast<size_t>(d.in_c) * sizeof(float);
#pragma omp parallel for schedule(static)
  for (int64_t row = 0; row < d.batch * oh; ++row) {
    const int64_t b = row / oh;
    const int64_t oy = row % oh;
    for (int64_t ox = 0; ox < ow; ++ox) {
      float* dst = cols + ((b * oh + oy) * ow + ox) * ps;
      for (int64_t ky = 0; ky < d.kernel; ++ky) {
        const int64_t iy = oy * d.stride - d.pad + ky;
        for (int64_t kx = 0; kx < d.kernel; ++kx) {
          const int64_t ix = ox * d.stride - d.pad + kx;
          float* cell = dst + (ky * d.kernel + kx) * d.in_c;
          if (iy < 0 || iy >= d.in_h || ix < 0 || ix >= d.in_w) {
            std::memset(cell, 0, chan_bytes);
          } else {
            std::memcpy(cell, x + ((b * d.in_h + iy) * d.in_w + ix) * d.in_c, chan_bytes);
          }
        }
      }
    }
  }
}

void col2im(const ConvDims& d, const float* cols, float* dx) {
  const int64_t oh = d.out_h();
  const int64_t ow = d.out_w();
  const int64_t ps = d.patch_size();
#pragma omp parallel for schedule(static)
  for (int64_t b = 0; b < d.batch; ++b) {
    for (int64_t oy = 0; oy < oh; ++oy) {
      for (int64_t ox = 0; ox < ow; ++ox) {
        const float* src = cols + ((b * oh + oy) * ow + ox) * ps;
        for (int64_t ky = 0; ky < d.kernel; ++ky) {
          const int64_t iy = oy * d.stride - d.pad + ky;
          if (iy < 0 || iy >= d.in_h) continue;
          for (int64_t kx = 0; kx < d.kernel; ++kx) {
            const int64_t ix = ox * d.stride - d.pad + kx;
            if (ix < 0 || ix >= d.in_w) continue;
            const float* cell = src + (ky * d.kernel + kx) * d.in_c;
            float* out = dx + ((b * d.in_h + iy) * d.in_w + ix) * d.in_c;
            for (int64_t c = 0; c < d.in_c; ++c) out[c] += cell[c];
          }
        }
      }
    }
  }
}

void depthwise_conv3x3_forward(int64_t batch, int64_t h, int64_t w, int64_t channels,
                               const float* x, const float* weight, const float* bias, float* y) {
#pragma omp parallel for schedule(static)
  for (int64_t row = 0; row < batch * h; ++row) {
    const int64_t b = row / h;
    const int64_t yy = row % h;
    for (int64_t xx = 0; xx < w; ++xx) {
      float* out = y + ((b * h + yy) * w + xx) * channels;
      for (int64_t c = 0; c < channels; ++c) out[c] = bias ? bias[c] : 0.0f;
      for (int64_t ky = 0; ky < 3; ++ky) {
        const int64_t iy = yy + ky - 1;
        if (iy < 0 || iy >= h) continue;
        for (int64_t kx = 0; kx < 3; ++kx) {
          const int64_t ix = xx + kx - 1;
          if (ix < 0 || ix >= w) continue;
          const float* in = x + ((b * h + iy) * w + ix) * channels;
          const float* wk = weight + (ky * 3 + kx) * channels;
          for (int64_t c = 0; c < channels; ++c) out[c] += wk[c] * in[c];
        }
      }
    }
  }
}

void depthwise_conv3x3_backward(int64_t batch, int64_t h, int64_t w, int64_t channels,
                                const float* x, const float* weight, const float* dy, float* dx,
                                float* d_weight, float* d_bias) {
  // Per-image partial weight gradients, reduced in image order afterwards so
  // the result does not depend on the thread count.
  std::vector<float> partial(static_cast<size_t>(batch * 10 * channels), 0.0f);
#pragma omp parallel for schedule(static)
  for (int64_t b = 0; b < batch; ++b) {
    float* pw = partial.data() + b * 10 * channels;
    float* pb = pw + 9 * channels;
    for (int64_t yy = 0; yy < h; ++yy) {
      for (int64_t xx = 0; xx < w; ++xx) {
        const float* g = dy + ((b * h + yy) * w + xx) * channels;
        for (int64_t c = 0; c < channels; ++c) pb[c] += g[c];
        for (int64_t ky = 0; ky < 3; ++ky) {
          const int64_t iy = yy + ky - 1;
          if (iy < 0 || iy >= h) continue;
          for (int64_t kx = 0; kx < 3; ++kx) {
            const int64_t ix = xx + kx - 1;
            if (ix < 0 || ix >= w) continue;
            const int64_t idx = ((b * h + iy) * w + ix) * channels;
            const float* wk = weight + (ky * 3 + kx) * channels;
            float* pwk = pw + (ky * 3 + kx) * channels;
            for (int64_t c = 0; c < channels; ++c) {
              dx[idx + c] += wk[c] * g[c];
              pwk[c] += x[idx + c] * g[c];
            }
          }
        }
      }
    }
  }
  for (int64_t b = 0; b < batch; ++b) {
    const float* pw = partial.data() + b * 10 * channels;
    for (int64_t i = 0; i < 9 * channels; ++i) d_weight[i] += pw[i];
    if (d_bias)
      for (int64_t c = 0; c < channels; ++c) d_bias[c] += pw[9 * channels + c];
  }
}

void layer_norm_forward(int64_t rows, int64_t cols, const float* x, const float* gamma,
                        const float* beta, float eps, float* y, float* mean, float* rstd) {
#pragma omp parallel for schedule(static) if (rows * cols > kParallelWork)
  for (int64_t r = 0; r < rows; ++r) {
    const float* xr = x + r * cols;
    float* yr = y + r * cols;
    float mu = 0.0f;
    for (int64_t c = 0; c < cols; ++c) mu += xr[c];
    mu /= static_cast<float>(cols);
    float var = 0.0f;
    for (int64_t c = 0; c < cols; ++c) {
      const float t = xr[c] - mu;
      var += t * t;
    }
    var /= static_cast<float>(cols);
    const float rs = 1.0f / std::sqrt(var + eps);
    mean[r] = mu;
    rstd[r] = rs;
    for (int64_t c = 0; c < cols; ++c) yr[c] = (xr[c] - mu) * rs * gamma[c] + beta[c];
  }
}

void layer_norm_backward(int64_t rows, int64_t cols, const float* x, const float* gamma,
                         const float* mean, const float* rstd, const float* dy, float* dx,
                         float* d_gamma, float* d_beta) {
#pragma omp parallel for schedule(static) if (rows * cols > kParallelWork)
  for (int64_t r = 0; r < rows; ++r) {
    const float* xr = x + r * cols;
    const float* gr = dy + r * cols;
    float* dr = dx + r * cols;
    const float mu = mean[r];
    const float rs = rstd[r];
    float sum_g = 0.0f;
    float sum_gx = 0.0f;
    for (int64_t c = 0; c < cols; ++c) {
      const float g = gr[c] * gamma[c];
      sum_g += g;
      sum_gx += g * (xr[c] - mu) * rs;
    }
    const float inv_n = 1.0f / static_cast<float>(cols);
    for (int64_t c = 0; c < cols; ++c) {
      const float xhat = (xr[c] - mu) * rs;
      dr[c] += rs * (gr[c] * gamma[c] - inv_n * sum_g - xhat * inv_n * sum_gx);
    }
  }
  // Column sums in row order.
  for (int64_t r = 0; r < rows; ++r) {
    const float* xr = x + r * cols;
    const float* gr = dy + r * cols;
    const float mu = mean[r];
    const float rs = rstd[r];
    for (int64_t c = 0; c < cols; ++c) {
      d_gamma[c] += gr[c] * (xr[c] - mu) * rs;
      d_beta[c] += gr[c];
    }
  }
}

void gelu_forward(int64_t n, const float* x, float* y) {
#pragma omp parallel for schedule(static) if (n > kParallelWork)
  for (int64_t i = 0; i < n; ++i) y[i] = 0.5f * x[i] * (1.0f + std::erf(x[i] * 0.70710678f));
}

void gelu_backward(int64_t n, const float* x, const float* dy, float* dx) {
#pragma omp parallel for schedule(static) if (n > kParallelWork)
  for (int64_t i = 0; i < n; ++i) {
    const float cdf = 0.5f * (1.0f + std::erf(x[i] * 0.70710678f));
    const float pdf = 0.39894228f * std::exp(-0.5f * x[i] * x[i]);
    dx[i] += dy[i] * (cdf + x[i] * pdf);
  }
}

namespace {

struct Tap {
  int64_t lo;
  int64_t hi;
  float frac;
};

Tap bilinear_tap(int64_t out_index, int64_t in_size, int64_t out_size) {
  const float scale = static_cast<float>(in_size) / static_cast<float>(out_size);
  float src = (static_cast<float>(out_index) + 0.5f) * scale - 0.5f;
  if (src < 0.0f) src = 0.0f;
  int64_t lo = static_cast<int64_t>(src);
  if (lo > in_size - 1) lo = in_size - 1;
  const int64_t hi = std::min(lo + 1, in_size - 1);
  return {lo, hi, src - static_cast<float>(lo)};
}

}  // namespace

void upsample_bilinear_forward(int64_t batch, int64_t in_h, int64_t in_w, int64_t channels,
                               int64_t out_h, int64_t out_w, const float* x, float* y) {
  std::vector<Tap> ty(static_cast<size_t>(out_h)), tx(static_cast<size_t>(out_w));
  for (int64_t i = 0; i < out_h; ++i) ty[i] = bilinear_tap(i, in_h, out_h);
  for (int64_t i = 0; i < out_w; ++i) tx[i] = bilinear_tap(i, in_w, out_w);
#pragma omp parallel for schedule(static)
  for (int64_t row = 0; row < batch * out_h; ++row) {
    const int64_t b = row / out_h;
    const Tap& vy = ty[row % out_h];
    const float* base = x + b * in_h * in_w * channels;
    for (int64_t ox = 0; ox < out_w; ++ox) {
      const Tap& vx = tx[ox];
      const float* p00 = base + (vy.lo * in_w + vx.lo) * channels;
      const float* p01 = base + (vy.lo * in_w + vx.hi) * channels;
      const float* p10 = base + (vy.hi * in_w + vx.lo) * channels;
      const float* p11 = base + (vy.hi * in_w + vx.hi) * channels;
      const float w00 = (1.0f - vy.frac) * (1.0f - vx.frac);
      const float w01 = (1.0f - vy.frac) * vx.frac;
      const float w10 = vy.frac * (1.0f - vx.frac);
      const float w11 = vy.frac * vx.frac;
      float* out = y + (row * out_w + ox) * channels;
      for (int64_t c = 0; c < channels; ++c)
        out[c] = w00 * p00[c] + w01 * p01[c] + w10 * p10[c] + w11 * p11[c];
    }
  }
}

void upsample_bilinear_backward(int64_t batch, int64_t in_h, int64_t in_w, int64_t channels,
                                int64_t out_h, int64_t out_w, const float* dy, float* dx) {
  std::vector<Tap> ty(static_cast<size_t>(out_h)), tx(static_cast<size_t>(out_w));
  for (int64_t i = 0; i < out_h; ++i) ty[i] = bilinear_tap(i, in_h, out_h);
  for (int64_t i = 0; i < out_w; ++i) tx[i] = bilinear_tap(i, in_w, out_w);
#pragma omp parallel for schedule(static)
  for (int64_t b = 0; b < batch; ++b) {
    float* base = dx + b * in_h * in_w * channels;
    for (int64_t oy = 0; oy < out_h; ++oy) {
      const Tap& vy = ty[oy];
      for (int64_t ox = 0; ox < out_w; ++ox) {
        const Tap& vx = tx[ox];
        const float* g = dy + ((b * out_h + oy) * out_w + ox) * channels;
        float* p00 = base + (vy.lo * in_w + vx.lo) * channels;
        float* p01 = base + (vy.lo * in_w + vx.hi) * channels;
        float* p10 = base + (vy.hi * in_w + vx.lo) * channels;
        float* p11 = base + (vy.hi * in_w + vx.hi) * channels;
        const float w00 = (1.0f - vy.frac) * (1.0f - vx.frac);
        const float w01 = (1.0f - vy.frac) * vx.frac;
        const float w10 = vy.frac * (1.0f - vx.frac);
        const float w11 = vy.frac * vx.frac;
        for (int64_t c = 0; c < channels; ++c) {
          p00[c] += w00 * g[c];
          p01[c] += w01 * g[c];
          p10[c] += w10 * g[c];
          p11[c] += w11 * g[c];
        }
      }
    }
  }
}

void gaussian_blur(int64_t channels, int64_t h, int64_t w, const float* x,
                   std::span<const double> kernel, float* y) {
  const int64_t radius = static_cast<int64_t>(kernel.size() / 2);
#pragma omp parallel for schedule(static)
  for (int64_t c = 0; c < channels; ++c) {
    std::vector<double> tmp(static_cast<size_t>(h * w));
    const float* src = x + c * h * w;
    for (int64_t yy = 0; yy < h; ++yy) {
      for (int64_t xx = 0; xx < w; ++xx) {
        double acc = 0.0;
        for (int64_t t = -radius; t <= radius; ++t)
          acc += kernel[static_cast<size_t>(t + radius)] * src[yy * w + reflect_index(xx + t, w)];
        tmp[static_cast<size_t>(yy * w + xx)] = acc;
      }
    }
    float* dst = y + c * h * w;
    for (int64_t yy = 0; yy < h; ++yy) {
      for (int64_t xx = 0; xx < w; ++xx) {
        double acc = 0.0;
        for (int64_t t = -radius; t <= radius; ++t)
          acc += kernel[static_cast<size_t>(t + radius)] *
                 tmp[static_cast<size_t>(reflect_index(yy + t, h) * w + xx)];
        dst[yy * w + xx] = static_cast<float>(acc);
      }
    }
  }
}

}  // namespace rloop::kernels
