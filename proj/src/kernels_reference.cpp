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

#include <algorithm>
#include <cmath>
#include <vector>

#include "rloop/kernels.hpp"

namespace rloop::kernels::reference {

void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, const float* a,
          const float* b, float* c, bool accumulate) {
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      float acc = accumulate ? c[i * n + j] : 0.0f;
      for (int64_t kk = 0; kk < k; ++kk) {
        const float av = trans_a ? a[kk * m + i] : a[i * k + kk];
        const float bv = trans_b ? b[j * k + kk] : b[kk * n + j];
        acc += av * bv;
      }
      c[i * n + j] = acc;
    }
  }
}

void attention_forward(const AttentionDims& d, const float* q, const float* k, const float* v,
                       float* out, float* probs) {
  const int64_t dm = d.model_dim();
  const float scale = 1.0f / std::sqrt(static_cast<float>(d.head_dim));
  for (int64_t b = 0; b < d.batch; ++b) {
    for (int64_t h = 0; h < d.heads; ++h) {
      for (int64_t i = 0; i < d.q_len; ++i) {
        float* p = probs + ((b * d.heads + h) * d.q_len + i) * d.kv_len;
        const float* qi = q + (b * d.q_len + i) * dm + h * d.head_dim;
        float mx = -INFINITY;
        for (int64_t j = 0; j < d.kv_len; ++j) {
          const float* kj = k + (b * d.kv_len + j) * dm + h * d.head_dim;
          float s = 0.0f;
          for (int64_t t = 0; t < d.head_dim; ++t) s += qi[t] * kj[t];
          p[j] = s * scale;
          mx = std::max(mx, p[j]);
        }
        float sum = 0.0f;
        for (int64_t j = 0; j < d.kv_len; ++j) {
          p[j] = std::exp(p[j] - mx);
          sum += p[j];
        }
        for (int64_t j = 0; j < d.kv_len; ++j) p[j] /= sum;
        float* o = out + (b * d.q_len + i) * dm + h * d.head_dim;
        for (int64_t t = 0; t < d.head_dim; ++t) {
          float acc = 0.0f;
          for (int64_t j = 0; j < d.kv_len; ++j)
            acc += p[j] * v[(b * d.kv_len + j) * dm + h * d.head_dim + t];
          o[t] = acc;
        }
      }
    }
  }
}

void attention_backward(const AttentionDims& d, const float* q, const float* k, const float* v,
                        const float* probs, const float* d_out, float* d_q, float* d_k,
                        float* d_v) {
  const int64_t dm = d.model_dim();
  const float scale = 1.0f / std::sqrt(static_cast<float>(d.head_dim));
  std::vector<float> dp(static_cast<size_t>(d.kv_len));
  for (int64_t b = 0; b < d.batch; ++b) {
    for (int64_t h = 0; h < d.heads; ++h) {
      const int64_t off = h * d.head_dim;
      for (int64_t i = 0; i < d.q_len; ++i) {
        const float* p = probs + ((b * d.heads + h) * d.q_len + i) * d.kv_len;
        const float* go = d_out + (b * d.q_len + i) * dm + off;
        float dot = 0.0f;
        for (int64_t j = 0; j < d.kv_len; ++j) {
          const float* vj = v + (b * d.kv_len + j) * dm + off;
          float s = 0.0f;
          for (int64_t t = 0; t < d.head_dim; ++t) {
            s += go[t] * vj[t];
            d_v[(b * d.kv_len + j) * dm + off + t] += p[j] * go[t];
          }
          dp[j] = s;
          dot += p[j] * s;
        }
        const float* qi = q + (b * d.q_len + i) * dm + off;
        float* gq = d_q + (b * d.q_len + i) * dm + off;
        for (int64_t j = 0; j < d.kv_len; ++j) {
          const float ds = p[j] * (dp[j] - dot) * scale;
          const float* kj = k + (b * d.kv_len + j) * dm + off;
          float* gk = d_k + (b * d.kv_len + j) * dm + off;
          for (int64_t t = 0; t < d.head_dim; ++t) {
            gq[t] += ds * kj[t];
            gk[t] += ds * qi[t];
          }
        }
      }
    }
  }
}

void im2col(const ConvDims& d, const float* x, float* cols) {
  const int64_t oh = d.out_h();
  const int64_t ow = d.out_w();
  int64_t idx = 0;
  for (int64_t b = 0; b < d.batch; ++b)
    for (int64_t oy = 0; oy < oh; ++oy)
      for (int64_t ox = 0; ox < ow; ++ox)
        for (int64_t ky = 0; ky < d.kernel; ++ky)
          for (int64_t kx = 0; kx < d.kernel; ++kx)
            for (int64_t c = 0; c < d.in_c; ++c) {
              const int64_t iy = oy * d.stride - d.pad + ky;
              const int64_t ix = ox * d.stride - d.pad + kx;
              const bool inside = iy >= 0 && iy < d.in_h && ix >= 0 && ix < d.in_w;
              cols[idx++] = inside ? x[((b * d.in_h + iy) * d.in_w + ix) * d.in_c + c] : 0.0f;
            }
}

void col2im(const ConvDims& d, const float* cols, float* dx) {
  const int64_t oh = d.out_h();
  const int64_t ow = d.out_w();
  int64_t idx = 0;
  for (int64_t b = 0; b < d.batch; ++b)
    for (int64_t oy = 0; oy < oh; ++oy)
      for (int64_t ox = 0; ox < ow; ++ox)
        for (int64_t ky = 0; ky < d.kernel; ++ky)
          for (int64_t kx = 0; kx < d.kernel; ++kx)
            for (int64_t c = 0; c < d.in_c; ++c, ++idx) {
              const int64_t iy = oy * d.stride - d.pad + ky;
              const int64_t ix = ox * d.stride - d.pad + kx;
              if (iy >= 0 && iy < d.in_h && ix >= 0 && ix < d.in_w)
                dx[((b * d.in_h + iy) * d.in_w + ix) * d.in_c + c] += cols[idx];
            }
}

void depthwise_conv3x3_forward(int64_t batch, int64_t h, int64_t w, int64_t channels,
                               const float* x, const float* weight, const float* bias, float* y) {
  for (int64_t b = 0; b < batch; ++b)
    for (int64_t yy = 0; yy < h; ++yy)
      for (int64_t xx = 0; xx < w; ++xx)
        for (int64_t c = 0; c < channels; ++c) {
          float acc = bias ? bias[c] : 0.0f;
          for (int64_t ky = 0; ky < 3; ++ky)
            for (int64_t kx = 0; kx < 3; ++kx) {
              const int64_t iy = yy + ky - 1;
              const int64_t ix = xx + kx - 1;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              acc += weight[(ky * 3 + kx) * channels + c] * x[((b * h + iy) * w + ix) * channels + c];
            }
          y[((b * h + yy) * w + xx) * channels + c] = acc;
        }
}

void depthwise_conv3x3_backward(int64_t batch, int64_t h, int64_t w, int64_t channels,
                                const float* x, const float* weight, const float* dy, float* dx,
                                float* d_weight, float* d_bias) {
  for (int64_t b = 0; b < batch; ++b)
    for (int64_t yy = 0; yy < h; ++yy)
      for (int64_t xx = 0; xx < w; ++xx)
        for (int64_t c = 0; c < channels; ++c) {
          const float g = dy[((b * h + yy) * w + xx) * channels + c];
          if (d_bias) d_bias[c] += g;
          for (int64_t ky = 0; ky < 3; ++ky)
            for (int64_t kx = 0; kx < 3; ++kx) {
              const int64_t iy = yy + ky - 1;
              const int64_t ix = xx + kx - 1;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              const int64_t idx = ((b * h + iy) * w + ix) * channels + c;
              dx[idx] += weight[(ky * 3 + kx) * channels + c] * g;
              d_weight[(ky * 3 + kx) * channels + c] += x[idx] * g;
            }
        }
}

void layer_norm_forward(int64_t rows, int64_t cols, const float* x, const float* gamma,
                        const float* beta, float eps, float* y, float* mean, float* rstd) {
  for (int64_t r = 0; r < rows; ++r) {
    double mu = 0.0;
    for (int64_t c = 0; c < cols; ++c) mu += x[r * cols + c];
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (int64_t c = 0; c < cols; ++c) var += (x[r * cols + c] - mu) * (x[r * cols + c] - mu);
    var /= static_cast<double>(cols);
    mean[r] = static_cast<float>(mu);
    rstd[r] = static_cast<float>(1.0 / std::sqrt(var + eps));
    for (int64_t c = 0; c < cols; ++c)
      y[r * cols + c] =
          static_cast<float>((x[r * cols + c] - mu) * rstd[r] * gamma[c] + beta[c]);
  }
}

void layer_norm_backward(int64_t rows, int64_t cols, const float* x, const float* gamma,
                         const float* mean, const float* rstd, const float* dy, float* dx,
                         float* d_gamma, float* d_beta) {
  for (int64_t r = 0; r < rows; ++r) {
    double sum_g = 0.0;
    double sum_gx = 0.0;
    for (int64_t c = 0; c < cols; ++c) {
      const double xhat = (x[r * cols + c] - mean[r]) * rstd[r];
      const double g = dy[r * cols + c] * gamma[c];
      sum_g += g;
      sum_gx += g * xhat;
      d_gamma[c] += static_cast<float>(dy[r * cols + c] * xhat);
      d_beta[c] += dy[r * cols + c];
    }
    for (int64_t c = 0; c < cols; ++c) {
      const double xhat = (x[r * cols + c] - mean[r]) * rstd[r];
      const double g = dy[r * cols + c] * gamma[c];
      dx[r * cols + c] += static_cast<float>(rstd[r] * (g - (sum_g + xhat * sum_gx) / cols));
    }
  }
}

void gelu_forward(int64_t n, const float* x, float* y) {
  for (int64_t i = 0; i < n; ++i) {
    const double v = x[i];
    y[i] = static_cast<float>(0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))));
  }
}

void gelu_backward(int64_t n, const float* x, const float* dy, float* dx) {
  for (int64_t i = 0; i < n; ++i) {
    const double v = x[i];
    const double cdf = 0.5 * (1.0 + std::erf(v / std::sqrt(2.0)));
    const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * M_PI);
    dx[i] += static_cast<float>(dy[i] * (cdf + v * pdf));
  }
}

namespace {

// Source coordinate and weights for one output index (align_corners = false).
void tap(int64_t o, int64_t in_size, int64_t out_size, int64_t& lo, int64_t& hi, double& frac) {
  double src = (o + 0.5) * static_cast<double>(in_size) / static_cast<double>(out_size) - 0.5;
  src = std::max(src, 0.0);
  lo = std::min(static_cast<int64_t>(std::floor(src)), in_size - 1);
  hi = std::min(lo + 1, in_size - 1);
  frac = src - static_cast<double>(lo);
}

}  // namespace

void upsample_bilinear_forward(int64_t batch, int64_t in_h, int64_t in_w, int64_t channels,
                               int64_t out_h, int64_t out_w, const float* x, float* y) {
  for (int64_t b = 0; b < batch; ++b)
    for (int64_t oy = 0; oy < out_h; ++oy)
      for (int64_t ox = 0; ox < out_w; ++ox) {
        int64_t y0, y1, x0, x1;
        double fy, fx;
        tap(oy, in_h, out_h, y0, y1, fy);
        tap(ox, in_w, out_w, x0, x1, fx);
        for (int64_t c = 0; c < channels; ++c) {
          auto at = [&](int64_t yy, int64_t xx) {
            return static_cast<double>(x[((b * in_h + yy) * in_w + xx) * channels + c]);
          };
          const double v = (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x1)) +
                           fy * ((1 - fx) * at(y1, x0) + fx * at(y1, x1));
          y[((b * out_h + oy) * out_w + ox) * channels + c] = static_cast<float>(v);
        }
      }
}

void upsample_bilinear_backward(int64_t batch, int64_t in_h, int64_t in_w, int64_t channels,
                                int64_t out_h, int64_t out_w, const float* dy, float* dx) {
  for (int64_t b = 0; b < batch; ++b)
    for (int64_t oy = 0; oy < out_h; ++oy)
      for (int64_t ox = 0; ox < out_w; ++ox) {
        int64_t y0, y1, x0, x1;
        double fy, fx;
        tap(oy, in_h, out_h, y0, y1, fy);
        tap(ox, in_w, out_w, x0, x1, fx);
        for (int64_t c = 0; c < channels; ++c) {
          const double g = dy[((b * out_h + oy) * out_w + ox) * channels + c];
          auto add = [&](int64_t yy, int64_t xx, double wgt) {
            dx[((b * in_h + yy) * in_w + xx) * channels + c] += static_cast<float>(wgt * g);
          };
          add(y0, x0, (1 - fy) * (1 - fx));
          add(y0, x1, (1 - fy) * fx);
          add(y1, x0, fy * (1 - fx));
          add(y1, x1, fy * fx);
        }
      }
}

void gaussian_blur(int64_t channels, int64_t h, int64_t w, const float* x,
                   std::span<const double> kernel, float* y) {
  // Direct 2-D convolution with the outer-product kernel.
  const int64_t radius = static_cast<int64_t>(kernel.size() / 2);
  for (int64_t c = 0; c < channels; ++c)
    for (int64_t yy = 0; yy < h; ++yy)
      for (int64_t xx = 0; xx < w; ++xx) {
        double acc = 0.0;
        for (int64_t dy = -radius; dy <= radius; ++dy)
          for (int64_t dx = -radius; dx <= radius; ++dx)
            acc += kernel[static_cast<size_t>(dy + radius)] *
                   kernel[static_cast<size_t>(dx + radius)] *
                   x[(c * h + reflect_index(yy + dy, h)) * w + reflect_index(xx + dx, w)];
        y[(c * h + yy) * w + xx] = static_cast<float>(acc);
      }
}

}  // namespace rloop::kernels::reference
