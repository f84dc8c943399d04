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

#include "rloop/ops.hpp"

#include <cmath>
#include <string>

#include "rloop/errors.hpp"
#include "rloop/kernels.hpp"

namespace rloop {
namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

void require_rank(const Var& x, size_t rank, const char* op) {
  if (x.value().rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_str(x.shape()));
  }
}

// Adds `scale * src` into the gradient of parent `i` when it wants one.
void accumulate(Node& n, size_t i, const Tensor& src, float factor = 1.0f) {
  Node& p = *n.parents[i];
  if (!p.requires_grad) return;
  Tensor& g = p.grad_buffer();
  float* gd = g.data();
  const float* s = src.data();
  for (int64_t j = 0; j < g.numel(); ++j) gd[j] += factor * s[j];
}

// out[i] = in[map[i]]; backward scatters through the same map.
Var gather_by_map(const Var& x, Shape out_shape, std::vector<int64_t> map) {
  Tensor out(std::move(out_shape));
  const float* in = x.value().data();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = in[map[static_cast<size_t>(i)]];
  return Var::from_op(std::move(out), {x}, [map = std::move(map)](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    float* g = p.grad_buffer().data();
    for (int64_t i = 0; i < n.grad.numel(); ++i) g[map[static_cast<size_t>(i)]] += n.grad[i];
  });
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] += b.value()[i];
  return Var::from_op(std::move(out), {a, b}, [](Node& n) {
    accumulate(n, 0, n.grad);
    accumulate(n, 1, n.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] -= b.value()[i];
  return Var::from_op(std::move(out), {a, b}, [](Node& n) {
    accumulate(n, 0, n.grad);
    accumulate(n, 1, n.grad, -1.0f);
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] *= b.value()[i];
  return Var::from_op(std::move(out), {a, b}, [](Node& n) {
    const Tensor& av = n.parents[0]->value;
    const Tensor& bv = n.parents[1]->value;
    if (n.parents[0]->requires_grad) {
      Tensor& g = n.parents[0]->grad_buffer();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * bv[i];
    }
    if (n.parents[1]->requires_grad) {
      Tensor& g = n.parents[1]->grad_buffer();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * av[i];
    }
  });
}

Var scale(const Var& a, float factor) {
  Tensor out = a.value();
  for (float& v : out.values()) v *= factor;
  return Var::from_op(std::move(out), {a}, [factor](Node& n) { accumulate(n, 0, n.grad, factor); });
}

Var add_scaled(const Var& a, const Var& b, float factor) {
  require_same_shape(a, b, "add_scaled");
  Tensor out = a.value();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] += factor * b.value()[i];
  return Var::from_op(std::move(out), {a, b}, [factor](Node& n) {
    accumulate(n, 0, n.grad);
    accumulate(n, 1, n.grad, factor);
  });
}

Var abs(const Var& a) {
  Tensor out = a.value();
  for (float& v : out.values()) v = std::fabs(v);
  return Var::from_op(std::move(out), {a}, [](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (int64_t i = 0; i < g.numel(); ++i) {
      const float x = p.value[i];
      g[i] += x > 0.0f ? n.grad[i] : (x < 0.0f ? -n.grad[i] : 0.0f);
    }
  });
}

Var sigmoid(const Var& a) {
  Tensor out = a.value();
  for (float& v : out.values()) v = 1.0f / (1.0f + std::exp(-v));
  return Var::from_op(std::move(out), {a}, [](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (int64_t i = 0; i < g.numel(); ++i) {
      const float s = n.value[i];
      g[i] += n.grad[i] * s * (1.0f - s);
    }
  });
}

Var gelu(const Var& a) {
  Tensor out(a.shape());
  kernels::gelu_forward(out.numel(), a.value().data(), out.data());
  return Var::from_op(std::move(out), {a}, [](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    kernels::gelu_backward(n.grad.numel(), p.value.data(), n.grad.data(), p.grad_buffer().data());
  });
}

Var relu(const Var& a) {
  Tensor out = a.value();
  for (float& v : out.values()) v = v > 0.0f ? v : 0.0f;
  return Var::from_op(std::move(out), {a}, [](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (int64_t i = 0; i < g.numel(); ++i)
      if (p.value[i] > 0.0f) g[i] += n.grad[i];
  });
}

Var add_bias(const Var& x, const Var& bias) {
  const int64_t cols = bias.numel();
  if (x.value().rank() == 0 || x.shape().back() != cols) {
    throw ShapeError("add_bias: " + shape_str(x.shape()) + " + " + shape_str(bias.shape()));
  }
  Tensor out = x.value();
  const int64_t rows = out.numel() / cols;
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t c = 0; c < cols; ++c) out[r * cols + c] += bias.value()[c];
  return Var::from_op(std::move(out), {x, bias}, [rows, cols](Node& n) {
    accumulate(n, 0, n.grad);
    if (n.parents[1]->requires_grad) {
      Tensor& g = n.parents[1]->grad_buffer();
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t c = 0; c < cols; ++c) g[c] += n.grad[r * cols + c];
    }
  });
}

Var add_per_token(const Var& x, const Var& table) {
  require_rank(x, 3, "add_per_token");
  if (table.shape() != Shape{x.dim(1), x.dim(2)}) {
    throw ShapeError("add_per_token: table " + shape_str(table.shape()) + " vs tokens " +
                     shape_str(x.shape()));
  }
  Tensor out = x.value();
  const int64_t per = table.numel();
  const int64_t batch = x.dim(0);
  for (int64_t b = 0; b < batch; ++b)
    for (int64_t i = 0; i < per; ++i) out[b * per + i] += table.value()[i];
  return Var::from_op(std::move(out), {x, table}, [batch, per](Node& n) {
    accumulate(n, 0, n.grad);
    if (n.parents[1]->requires_grad) {
      Tensor& g = n.parents[1]->grad_buffer();
      for (int64_t b = 0; b < batch; ++b)
        for (int64_t i = 0; i < per; ++i) g[i] += n.grad[b * per + i];
    }
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  if (weight.value().rank() != 2 || x.value().rank() == 0 || x.shape().back() != weight.dim(0)) {
    throw ShapeError("linear: input " + shape_str(x.shape()) + " weight " +
                     shape_str(weight.shape()));
  }
  const int64_t in = weight.dim(0);
  const int64_t out_dim = weight.dim(1);
  const int64_t rows = x.numel() / in;
  Shape out_shape = x.shape();
  out_shape.back() = out_dim;
  Tensor out(out_shape);
  kernels::gemm(false, false, rows, out_dim, in, x.value().data(), weight.value().data(),
                out.data(), false);
  const bool has_bias = bias.defined();
  if (has_bias) {
    if (bias.numel() != out_dim) throw ShapeError("linear: bias " + shape_str(bias.shape()));
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t c = 0; c < out_dim; ++c) out[r * out_dim + c] += bias.value()[c];
  }
  std::vector<Var> parents{x, weight};
  if (has_bias) parents.push_back(bias);
  return Var::from_op(std::move(out), parents, [rows, in, out_dim, has_bias](Node& n) {
    Node& px = *n.parents[0];
    Node& pw = *n.parents[1];
    if (px.requires_grad)
      kernels::gemm(false, true, rows, in, out_dim, n.grad.data(), pw.value.data(),
                    px.grad_buffer().data(), true);
    if (pw.requires_grad)
      kernels::gemm(true, false, in, out_dim, rows, px.value.data(), n.grad.data(),
                    pw.grad_buffer().data(), true);
    if (has_bias && n.parents[2]->requires_grad) {
      Tensor& g = n.parents[2]->grad_buffer();
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t c = 0; c < out_dim; ++c) g[c] += n.grad[r * out_dim + c];
    }
  });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, float eps) {
  const int64_t cols = gamma.numel();
  if (x.shape().empty() || x.shape().back() != cols || beta.numel() != cols) {
    throw ShapeError("layer_norm: input " + shape_str(x.shape()) + " gamma " +
                     shape_str(gamma.shape()));
  }
  const int64_t rows = x.numel() / cols;
  Tensor out(x.shape());
  Tensor mean(Shape{rows});
  Tensor rstd(Shape{rows});
  kernels::layer_norm_forward(rows, cols, x.value().data(), gamma.value().data(),
                              beta.value().data(), eps, out.data(), mean.data(), rstd.data());
  return Var::from_op(std::move(out), {x, gamma, beta},
                      [rows, cols, mean = std::move(mean), rstd = std::move(rstd)](Node& n) {
                        Node& px = *n.parents[0];
                        Node& pg = *n.parents[1];
                        Node& pb = *n.parents[2];
                        Tensor dx_scratch;
                        float* dx = nullptr;
                        if (px.requires_grad) {
                          dx = px.grad_buffer().data();
                        } else {
                          dx_scratch = Tensor(px.value.shape());
                          dx = dx_scratch.data();
                        }
                        Tensor dg_scratch, db_scratch;
                        float* dg = nullptr;
                        float* db = nullptr;
                        if (pg.requires_grad) {
                          dg = pg.grad_buffer().data();
                        } else {
                          dg_scratch = Tensor(pg.value.shape());
                          dg = dg_scratch.data();
                        }
                        if (pb.requires_grad) {
                          db = pb.grad_buffer().data();
                        } else {
                          db_scratch = Tensor(pb.value.shape());
                          db = db_scratch.data();
                        }
                        kernels::layer_norm_backward(rows, cols, px.value.data(), pg.value.data(),
                                                     mean.data(), rstd.data(), n.grad.data(), dx,
                                                     dg, db);
                      });
}

Var attention(const Var& q, const Var& k, const Var& v, int64_t heads, Tensor* probs_out) {
  require_rank(q, 3, "attention");
  require_rank(k, 3, "attention");
  require_same_shape(k, v, "attention");
  if (q.dim(0) != k.dim(0) || q.dim(2) != k.dim(2)) {
    throw ShapeError("attention: q " + shape_str(q.shape()) + " k " + shape_str(k.shape()));
  }
  if (heads <= 0 || q.dim(2) % heads != 0) {
    throw ConfigError("attention: dim " + std::to_string(q.dim(2)) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  kernels::AttentionDims d{q.dim(0), q.dim(1), k.dim(1), heads, q.dim(2) / heads};
  Tensor out(q.shape());
  Tensor probs(Shape{d.batch, d.heads, d.q_len, d.kv_len});
  kernels::attention_forward(d, q.value().data(), k.value().data(), v.value().data(), out.data(),
                             probs.data());
  if (probs_out) *probs_out = probs;
  return Var::from_op(std::move(out), {q, k, v}, [d, probs = std::move(probs)](Node& n) {
    Node& pq = *n.parents[0];
    Node& pk = *n.parents[1];
    Node& pv = *n.parents[2];
    // The kernel writes all three; route unused ones to scratch.
    Tensor sq, sk, sv;
    float* dq = pq.requires_grad ? pq.grad_buffer().data() : (sq = Tensor(pq.value.shape())).data();
    float* dk = pk.requires_grad ? pk.grad_buffer().data() : (sk = Tensor(pk.value.shape())).data();
    float* dv = pv.requires_grad ? pv.grad_buffer().data() : (sv = Tensor(pv.value.shape())).data();
    kernels::attention_backward(d, pq.value.data(), pk.value.data(), pv.value.data(), probs.data(),
                                n.grad.data(), dq, dk, dv);
  });
}

Var conv2d(const Var& x, const Var& weight, const Var& bias, int64_t kernel, int64_t stride,
           int64_t pad) {
  require_rank(x, 4, "conv2d");
  kernels::ConvDims d{x.dim(0), x.dim(1), x.dim(2), x.dim(3), kernel, stride, pad};
  if (weight.value().rank() != 2 || weight.dim(0) != d.patch_size()) {
    throw ShapeError("conv2d: weight " + shape_str(weight.shape()) + " for input " +
                     shape_str(x.shape()) + " kernel " + std::to_string(kernel));
  }
  if (d.out_h() <= 0 || d.out_w() <= 0) throw ShapeError("conv2d: empty output");
  const int64_t out_c = weight.dim(1);
  const int64_t rows = d.batch * d.out_h() * d.out_w();
  Tensor cols(Shape{rows, d.patch_size()});
  kernels::im2col(d, x.value().data(), cols.data());
  Tensor out(Shape{d.batch, d.out_h(), d.out_w(), out_c});
  kernels::gemm(false, false, rows, out_c, d.patch_size(), cols.data(), weight.value().data(),
                out.data(), false);
  const bool has_bias = bias.defined();
  if (has_bias)
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t c = 0; c < out_c; ++c) out[r * out_c + c] += bias.value()[c];
  std::vector<Var> parents{x, weight};
  if (has_bias) parents.push_back(bias);
  return Var::from_op(std::move(out), parents,
                      [d, rows, out_c, has_bias, cols = std::move(cols)](Node& n) {
                        Node& px = *n.parents[0];
                        Node& pw = *n.parents[1];
                        if (px.requires_grad) {
                          Tensor dcols(Shape{rows, d.patch_size()});
                          kernels::gemm(false, true, rows, d.patch_size(), out_c, n.grad.data(),
                                        pw.value.data(), dcols.data(), false);
                          kernels::col2im(d, dcols.data(), px.grad_buffer().data());
                        }
                        if (pw.requires_grad)
                          kernels::gemm(true, false, d.patch_size(), out_c, rows, cols.data(),
                                        n.grad.data(), pw.grad_buffer().data(), true);
                        if (has_bias && n.parents[2]->requires_grad) {
                          Tensor& g = n.parents[2]->grad_buffer();
                          for (int64_t r = 0; r < rows; ++r)
                            for (int64_t c = 0; c < out_c; ++c) g[c] += n.grad[r * out_c + c];
                        }
                      });
}

Var depthwise_conv3x3(const Var& x, const Var& weight, const Var& bias) {
  require_rank(x, 4, "depthwise_conv3x3");
  const int64_t b = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  if (weight.shape() != Shape{9, c} || bias.numel() != c) {
    throw ShapeError("depthwise_conv3x3: weight " + shape_str(weight.shape()) + " for " +
                     shape_str(x.shape()));
  }
  Tensor out(x.shape());
  kernels::depthwise_conv3x3_forward(b, h, w, c, x.value().data(), weight.value().data(),
                                     bias.value().data(), out.data());
  return Var::from_op(std::move(out), {x, weight, bias}, [b, h, w, c](Node& n) {
    Node& px = *n.parents[0];
    Node& pw = *n.parents[1];
    Node& pb = *n.parents[2];
    Tensor sx, sw, sb;
    float* dx = px.requires_grad ? px.grad_buffer().data() : (sx = Tensor(px.value.shape())).data();
    float* dw = pw.requires_grad ? pw.grad_buffer().data() : (sw = Tensor(pw.value.shape())).data();
    float* db = pb.requires_grad ? pb.grad_buffer().data() : (sb = Tensor(pb.value.shape())).data();
    kernels::depthwise_conv3x3_backward(b, h, w, c, px.value.data(), pw.value.data(),
                                        n.grad.data(), dx, dw, db);
  });
}

Var upsample_bilinear(const Var& x, int64_t out_h, int64_t out_w) {
  require_rank(x, 4, "upsample_bilinear");
  const int64_t b = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  if (h == out_h && w == out_w) return x;
  Tensor out(Shape{b, out_h, out_w, c});
  kernels::upsample_bilinear_forward(b, h, w, c, out_h, out_w, x.value().data(), out.data());
  return Var::from_op(std::move(out), {x}, [b, h, w, c, out_h, out_w](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    kernels::upsample_bilinear_backward(b, h, w, c, out_h, out_w, n.grad.data(),
                                        p.grad_buffer().data());
  });
}

Var concat_last(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_last: no inputs");
  Shape lead = parts[0].shape();
  lead.pop_back();
  std::vector<int64_t> widths;
  int64_t total = 0;
  for (const Var& p : parts) {
    Shape l = p.shape();
    const int64_t w = l.back();
    l.pop_back();
    if (l != lead) throw ShapeError("concat_last: leading dims differ");
    widths.push_back(w);
    total += w;
  }
  const int64_t rows = shape_numel(lead);
  Shape out_shape = lead;
  out_shape.push_back(total);
  Tensor out(out_shape);
  int64_t offset = 0;
  for (size_t i = 0; i < parts.size(); ++i) {
    const float* src = parts[i].value().data();
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t c = 0; c < widths[i]; ++c) out[r * total + offset + c] = src[r * widths[i] + c];
    offset += widths[i];
  }
  return Var::from_op(std::move(out), parts, [rows, total, widths](Node& n) {
    int64_t off = 0;
    for (size_t i = 0; i < widths.size(); ++i) {
      Node& p = *n.parents[i];
      if (p.requires_grad) {
        float* g = p.grad_buffer().data();
        for (int64_t r = 0; r < rows; ++r)
          for (int64_t c = 0; c < widths[i]; ++c) g[r * widths[i] + c] += n.grad[r * total + off + c];
      }
      off += widths[i];
    }
  });
}

Var mean_tokens(const Var& x) {
  require_rank(x, 3, "mean_tokens");
  const int64_t b = x.dim(0), t = x.dim(1), d = x.dim(2);
  Tensor out(Shape{b, d});
  for (int64_t i = 0; i < b; ++i) {
    for (int64_t j = 0; j < t; ++j)
      for (int64_t c = 0; c < d; ++c) out[i * d + c] += x.value()[(i * t + j) * d + c];
    for (int64_t c = 0; c < d; ++c) out[i * d + c] /= static_cast<float>(t);
  }
  return Var::from_op(std::move(out), {x}, [b, t, d](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    float* g = p.grad_buffer().data();
    const float inv = 1.0f / static_cast<float>(t);
    for (int64_t i = 0; i < b; ++i)
      for (int64_t j = 0; j < t; ++j)
        for (int64_t c = 0; c < d; ++c) g[(i * t + j) * d + c] += n.grad[i * d + c] * inv;
  });
}

Var film(const Var& z, const Var& gamma, const Var& beta) {
  require_rank(z, 3, "film");
  const int64_t b = z.dim(0), t = z.dim(1), d = z.dim(2);
  if (gamma.shape() != Shape{b, d} || beta.shape() != Shape{b, d}) {
    throw ShapeError("film: tokens " + shape_str(z.shape()) + " gamma " +
                     shape_str(gamma.shape()) + " beta " + shape_str(beta.shape()));
  }
  Tensor out(z.shape());
  const float* zv = z.value().data();
  const float* gv = gamma.value().data();
  const float* bv = beta.value().data();
  for (int64_t i = 0; i < b; ++i)
    for (int64_t j = 0; j < t; ++j)
      for (int64_t c = 0; c < d; ++c)
        out[(i * t + j) * d + c] = gv[i * d + c] * zv[(i * t + j) * d + c] + bv[i * d + c];
  return Var::from_op(std::move(out), {z, gamma, beta}, [b, t, d](Node& n) {
    Node& pz = *n.parents[0];
    Node& pg = *n.parents[1];
    Node& pb = *n.parents[2];
    for (int64_t i = 0; i < b; ++i)
      for (int64_t j = 0; j < t; ++j)
        for (int64_t c = 0; c < d; ++c) {
          const int64_t idx = (i * t + j) * d + c;
          const float g = n.grad[idx];
          if (pz.requires_grad) pz.grad_buffer()[idx] += g * pg.value[i * d + c];
          if (pg.requires_grad) pg.grad_buffer()[i * d + c] += g * pz.value[idx];
          if (pb.requires_grad) pb.grad_buffer()[i * d + c] += g;
        }
  });
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshape(std::move(shape));
  return Var::from_op(std::move(out), {x}, [](Node& n) { accumulate(n, 0, n.grad); });
}

Var gather_tokens(const Var& x, const std::vector<std::vector<int64_t>>& ids) {
  require_rank(x, 3, "gather_tokens");
  const int64_t b = x.dim(0), t = x.dim(1), d = x.dim(2);
  if (static_cast<int64_t>(ids.size()) != b) throw ShapeError("gather_tokens: batch mismatch");
  const int64_t keep = ids.empty() ? 0 : static_cast<int64_t>(ids[0].size());
  std::vector<int64_t> map;
  map.reserve(static_cast<size_t>(b * keep * d));
  for (int64_t i = 0; i < b; ++i) {
    if (static_cast<int64_t>(ids[i].size()) != keep) throw ShapeError("gather_tokens: ragged ids");
    for (int64_t id : ids[i]) {
      if (id < 0 || id >= t) throw ShapeError("gather_tokens: id out of range");
      for (int64_t c = 0; c < d; ++c) map.push_back((i * t + id) * d + c);
    }
  }
  return gather_by_map(x, Shape{b, keep, d}, std::move(map));
}

Var scatter_tokens(const Var& x, const Var& fill, const std::vector<std::vector<int64_t>>& ids,
                   int64_t tokens) {
  require_rank(x, 3, "scatter_tokens");
  const int64_t b = x.dim(0), keep = x.dim(1), d = x.dim(2);
  if (fill.numel() != d) throw ShapeError("scatter_tokens: fill width");
  // src[b*tokens + n] = row of x or -1 for fill.
  std::vector<int64_t> src(static_cast<size_t>(b * tokens), -1);
  for (int64_t i = 0; i < b; ++i)
    for (int64_t j = 0; j < keep; ++j) src[static_cast<size_t>(i * tokens + ids[i][j])] = i * keep + j;
  Tensor out(Shape{b, tokens, d});
  for (int64_t r = 0; r < b * tokens; ++r) {
    const int64_t s = src[static_cast<size_t>(r)];
    for (int64_t c = 0; c < d; ++c) out[r * d + c] = s >= 0 ? x.value()[s * d + c] : fill.value()[c];
  }
  return Var::from_op(std::move(out), {x, fill}, [src = std::move(src), d](Node& n) {
    Node& px = *n.parents[0];
    Node& pf = *n.parents[1];
    for (size_t r = 0; r < src.size(); ++r) {
      const int64_t s = src[r];
      const float* g = n.grad.data() + static_cast<int64_t>(r) * d;
      if (s >= 0) {
        if (px.requires_grad) {
          float* gx = px.grad_buffer().data() + s * d;
          for (int64_t c = 0; c < d; ++c) gx[c] += g[c];
        }
      } else if (pf.requires_grad) {
        float* gf = pf.grad_buffer().data();
        for (int64_t c = 0; c < d; ++c) gf[c] += g[c];
      }
    }
  });
}

Var nchw_to_nhwc(const Var& x) {
  require_rank(x, 4, "nchw_to_nhwc");
  const int64_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  std::vector<int64_t> map(static_cast<size_t>(x.numel()));
  size_t i = 0;
  for (int64_t n = 0; n < b; ++n)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t xx = 0; xx < w; ++xx)
        for (int64_t ch = 0; ch < c; ++ch) map[i++] = ((n * c + ch) * h + y) * w + xx;
  return gather_by_map(x, Shape{b, h, w, c}, std::move(map));
}

Var nhwc_to_nchw(const Var& x) {
  require_rank(x, 4, "nhwc_to_nchw");
  const int64_t b = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  std::vector<int64_t> map(static_cast<size_t>(x.numel()));
  size_t i = 0;
  for (int64_t n = 0; n < b; ++n)
    for (int64_t ch = 0; ch < c; ++ch)
      for (int64_t y = 0; y < h; ++y)
        for (int64_t xx = 0; xx < w; ++xx) map[i++] = ((n * h + y) * w + xx) * c + ch;
  return gather_by_map(x, Shape{b, c, h, w}, std::move(map));
}

Var patchify(const Var& images, int64_t patch) {
  require_rank(images, 4, "patchify");
  const int64_t b = images.dim(0), c = images.dim(1), h = images.dim(2), w = images.dim(3);
  if (patch <= 0 || h % patch != 0 || w % patch != 0) {
    throw ConfigError("patchify: " + shape_str(images.shape()) + " not divisible by patch " +
                      std::to_string(patch));
  }
  const int64_t gh = h / patch, gw = w / patch;
  std::vector<int64_t> map(static_cast<size_t>(images.numel()));
  size_t i = 0;
  for (int64_t n = 0; n < b; ++n)
    for (int64_t py = 0; py < gh; ++py)
      for (int64_t px = 0; px < gw; ++px)
        for (int64_t dy = 0; dy < patch; ++dy)
          for (int64_t dx = 0; dx < patch; ++dx)
            for (int64_t ch = 0; ch < c; ++ch)
              map[i++] = ((n * c + ch) * h + py * patch + dy) * w + px * patch + dx;
  return gather_by_map(images, Shape{b, gh * gw, patch * patch * c}, std::move(map));
}

Var unpatchify(const Var& tokens, int64_t channels, int64_t height, int64_t width,
               int64_t patch) {
  require_rank(tokens, 3, "unpatchify");
  if (patch <= 0 || height % patch != 0 || width % patch != 0) {
    throw ConfigError("unpatchify: image size not divisible by patch");
  }
  const int64_t b = tokens.dim(0), gh = height / patch, gw = width / patch;
  if (tokens.dim(1) != gh * gw || tokens.dim(2) != patch * patch * channels) {
    throw ShapeError("unpatchify: tokens " + shape_str(tokens.shape()) + " for image " +
                     std::to_string(channels) + "x" + std::to_string(height) + "x" +
                     std::to_string(width));
  }
  const int64_t pd = patch * patch * channels;
  std::vector<int64_t> map(static_cast<size_t>(tokens.numel()));
  size_t i = 0;
  for (int64_t n = 0; n < b; ++n)
    for (int64_t ch = 0; ch < channels; ++ch)
      for (int64_t y = 0; y < height; ++y)
        for (int64_t x = 0; x < width; ++x) {
          const int64_t tok = (y / patch) * gw + x / patch;
          const int64_t e = ((y % patch) * patch + x % patch) * channels + ch;
          map[i++] = (n * gh * gw + tok) * pd + e;
        }
  return gather_by_map(tokens, Shape{b, channels, height, width}, std::move(map));
}

Var sum_all(const Var& x) {
  double s = 0.0;
  for (float v : x.value().values()) s += v;
  return Var::from_op(Tensor(Shape{1}, static_cast<float>(s)), {x}, [](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    const float up = n.grad[0];
    for (float& v : g.values()) v += up;
  });
}

Var mean_all(const Var& x) {
  return scale(sum_all(x), 1.0f / static_cast<float>(x.numel()));
}

}  // namespace rloop
