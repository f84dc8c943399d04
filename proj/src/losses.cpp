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

#include "rloop/losses.hpp"

#include <ostream>

#include "rloop/ops.hpp"

namespace rloop {
namespace {

void check_shapes(const Var& pred, const Tensor& target, const char* what) {
  if (pred.shape() != target.shape()) {
    throw ShapeError(std::string(what) + ": pred " + shape_str(pred.shape()) + " vs target " +
                     shape_str(target.shape()));
  }
}

}  // namespace

Var bce_loss(const Var& pred, const Tensor& target) {
  check_shapes(pred, target, "bce_loss");
  Tensor out({1}, bce_value<float>(pred.value().values(), target.values()));
  return Var::from_op(std::move(out), {pred}, [target](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    Tensor g(p.value.shape());
    bce_grad<float>(p.value.values(), target.values(), g.values());
    Tensor& dst = p.grad_buffer();
    const float seed = n.grad[0];
    for (int64_t i = 0; i < g.numel(); ++i) dst[i] += seed * g[i];
  });
}

Var dice_loss(const Var& pred, const Tensor& target) {
  check_shapes(pred, target, "dice_loss");
  const int64_t batch = pred.dim(0);
  Tensor out({1}, dice_value<float>(pred.value().values(), target.values(), batch));
  return Var::from_op(std::move(out), {pred}, [target, batch](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    Tensor g(p.value.shape());
    dice_grad<float>(p.value.values(), target.values(), batch, g.values());
    Tensor& dst = p.grad_buffer();
    const float seed = n.grad[0];
    for (int64_t i = 0; i < g.numel(); ++i) dst[i] += seed * g[i];
  });
}

Var stage_loss(const Var& pred, const Tensor& target) {
  return add(bce_loss(pred, target), dice_loss(pred, target));
}

LossBreakdown total_loss(double l_ref, double l_crs, double alpha) {
  return LossBreakdown{l_crs, l_ref, l_ref + alpha * l_crs, alpha};
}

ImageScore score_mask(std::span<const float> pred, std::span<const float> target,
                      double threshold) {
  if (pred.size() != target.size()) throw ShapeError("score_mask: size mismatch");
  int64_t inter = 0, np = 0, nt = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] >= threshold;
    const bool t = target[i] >= 0.5f;
    inter += p && t;
    np += p;
    nt += t;
  }
  ImageScore s;
  const int64_t uni = np + nt - inter;
  if (uni == 0) {
    s.iou = 1.0;
    s.f1 = 1.0;
  } else {
    s.iou = static_cast<double>(inter) / static_cast<double>(uni);
    s.f1 = 2.0 * static_cast<double>(inter) / static_cast<double>(np + nt);
  }
  return s;
}

MetricReport iou_f1(const Tensor& pred, const Tensor& target, double threshold,
                    const std::vector<std::string>& ids) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("iou_f1: pred " + shape_str(pred.shape()) + " vs target " +
                     shape_str(target.shape()));
  }
  MetricReport report;
  report.threshold = threshold;
  if (pred.numel() == 0) return report;
  const int64_t batch = pred.dim(0);
  if (!ids.empty() && static_cast<int64_t>(ids.size()) != batch) {
    throw ShapeError("iou_f1: id count does not match batch");
  }
  const int64_t per = pred.numel() / batch;
  for (int64_t b = 0; b < batch; ++b) {
    ImageScore s = score_mask(pred.values().subspan(b * per, per),
                              target.values().subspan(b * per, per), threshold);
    s.image_id = ids.empty() ? std::to_string(b) : ids[b];
    report.per_image.push_back(std::move(s));
  }
  return merge_reports({report});
}

MetricReport merge_reports(const std::vector<MetricReport>& parts) {
  MetricReport out;
  if (!parts.empty()) out.threshold = parts.front().threshold;
  for (const auto& p : parts) {
    out.per_image.insert(out.per_image.end(), p.per_image.begin(), p.per_image.end());
  }
  double si = 0.0, sf = 0.0;
  for (const auto& s : out.per_image) {
    si += s.iou;
    sf += s.f1;
  }
  if (!out.per_image.empty()) {
    out.iou = si / static_cast<double>(out.per_image.size());
    out.f1 = sf / static_cast<double>(out.per_image.size());
  }
  return out;
}

void write_metrics_csv(std::ostream& os, const MetricReport& report, const std::string& stage,
                       bool header) {
  if (header) os << "image_id,iou,f1,stage\n";
  const auto old = os.precision(10);
  for (const auto& s : report.per_image) {
    os << s.image_id << ',' << s.iou << ',' << s.f1 << ',' << stage << '\n';
  }
  os.precision(old);
}

}  // namespace rloop
