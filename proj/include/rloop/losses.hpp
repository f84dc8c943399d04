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

// Segmentation losses and pixel metrics.
//
// The scalar kernels are templates so tests can run them in double; the Var
// wrappers use the float instantiation. Predictions are probabilities, masks
// are laid out [batch, 1, h, w] (or any shape whose leading axis is batch).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rloop/autograd.hpp"
#include "rloop/errors.hpp"

namespace rloop {

inline constexpr double kProbEps = 1e-7;
inline constexpr double kDiceSmooth = 1.0;

template <typename T>
T bce_value(std::span<const T> pred, std::span<const T> target) {
  if (pred.size() != target.size()) throw ShapeError("bce: pred/target size mismatch");
  if (pred.empty()) return T(0);
  double sum = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double p = std::clamp<double>(pred[i], kProbEps, 1.0 - kProbEps);
    const double t = target[i];
    sum -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
  }
  return static_cast<T>(sum / static_cast<double>(pred.size()));
}

// d(bce)/d(pred). Zero where the clamp is active.
template <typename T>
void bce_grad(std::span<const T> pred, std::span<const T> target, std::span<T> grad) {
  if (pred.size() != target.size() || grad.size() != pred.size()) {
    throw ShapeError("bce: pred/target size mismatch");
  }
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  for (size_t i = 0; i < pred.size(); ++i) {
    const double p = pred[i];
    if (p < kProbEps || p > 1.0 - kProbEps) {
      grad[i] = T(0);
      continue;
    }
    const double t = target[i];
    grad[i] = static_cast<T>((-t / p + (1.0 - t) / (1.0 - p)) * inv_n);
  }
}

// Mean over the batch of 1 - (2*sum(p*t) + s) / (sum(p) + sum(t) + s), each
// image being a contiguous block of pred.size() / batch values.
template <typename T>
T dice_value(std::span<const T> pred, std::span<const T> target, int64_t batch) {
  if (pred.size() != target.size()) throw ShapeError("dice: pred/target size mismatch");
  if (batch <= 0 || pred.size() % static_cast<size_t>(batch) != 0) {
    throw ShapeError("dice: size not divisible by batch");
  }
  const size_t per = pred.size() / static_cast<size_t>(batch);
  double total = 0.0;
  for (int64_t b = 0; b < batch; ++b) {
    double inter = 0.0, sp = 0.0, st = 0.0;
    for (size_t i = b * per; i < (b + 1) * per; ++i) {
      inter += double(pred[i]) * double(target[i]);
      sp += pred[i];
      st += target[i];
    }
    total += 1.0 - (2.0 * inter + kDiceSmooth) / (sp + st + kDiceSmooth);
  }
  return static_cast<T>(total / static_cast<double>(batch));
}

template <typename T>
void dice_grad(std::span<const T> pred, std::span<const T> target, int64_t batch,
               std::span<T> grad) {
  if (pred.size() != target.size() || grad.size() != pred.size()) {
    throw ShapeError("dice: pred/target size mismatch");
  }
  if (batch <= 0 || pred.size() % static_cast<size_t>(batch) != 0) {
    throw ShapeError("dice: size not divisible by batch");
  }
  const size_t per = pred.size() / static_cast<size_t>(batch);
  for (int64_t b = 0; b < batch; ++b) {
    double inter = 0.0, sp = 0.0, st = 0.0;
    for (size_t i = b * per; i < (b + 1) * per; ++i) {
      inter += double(pred[i]) * double(target[i]);
      sp += pred[i];
      st += target[i];
    }
    const double num = 2.0 * inter + kDiceSmooth;
    const double den = sp + st + kDiceSmooth;
    for (size_t i = b * per; i < (b + 1) * per; ++i) {
      const double d = -(2.0 * target[i] * den - num) / (den * den);
      grad[i] = static_cast<T>(d / static_cast<double>(batch));
    }
  }
}

// Differentiable wrappers; the gradient flows into `pred` only.
Var bce_loss(const Var& pred, const Tensor& target);
Var dice_loss(const Var& pred, const Tensor& target);
// bce_loss + dice_loss.
Var stage_loss(const Var& pred, const Tensor& target);

struct LossBreakdown {
  double l_crs = 0.0;
  double l_ref = 0.0;
  double l_total = 0.0;
  double alpha = 0.5;
};

LossBreakdown total_loss(double l_ref, double l_crs, double alpha = 0.5);

struct ImageScore {
  std::string image_id;
  double iou = 0.0;
  double f1 = 0.0;
};

struct MetricReport {
  double iou = 0.0;  // mean over images
  double f1 = 0.0;
  double threshold = 0.5;
  std::vector<ImageScore> per_image;
};

// Per-image IoU/F1 of a single binarized prediction; both empty scores 1.
ImageScore score_mask(std::span<const float> pred, std::span<const float> target,
                      double threshold = 0.5);

// pred/target: [batch, ...]. ids may be empty (then indices are used).
MetricReport iou_f1(const Tensor& pred, const Tensor& target, double threshold = 0.5,
                    const std::vector<std::string>& ids = {});

// Concatenates reports and recomputes the means.
MetricReport merge_reports(const std::vector<MetricReport>& parts);

// Rows `image_id,iou,f1,stage`.
void write_metrics_csv(std::ostream& os, const MetricReport& report, const std::string& stage,
                       bool header = true);

}  // namespace rloop
