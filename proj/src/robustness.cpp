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

#include "rloop/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <ostream>

#include "rloop/errors.hpp"
#include "rloop/image_io.hpp"

namespace rloop {
namespace {

Tensor perturb_one(const Tensor& image, PerturbKind kind, double level, double sigma_per_level) {
  switch (kind) {
    case PerturbKind::kNone:
      return image;
    case PerturbKind::kJpeg:
      return jpeg_round_trip(image, static_cast<int>(level));
    case PerturbKind::kBlur:
      return gaussian_blur_image(image, level * sigma_per_level);
  }
  throw ConfigError("perturb: unknown kind");
}

void check_level(PerturbKind kind, double level, double sigma_per_level) {
  switch (kind) {
    case PerturbKind::kNone:
      return;
    case PerturbKind::kJpeg:
      if (level < 1.0 || level > 100.0 || level != std::floor(level)) {
        throw ConfigError("perturb: jpeg quality must be an integer in [1, 100], got " +
                          std::to_string(level));
      }
      return;
    case PerturbKind::kBlur:
      if (!(level >= 0.0) || !(sigma_per_level >= 0.0)) {
        throw ConfigError("perturb: blur level and sigma_per_level must be >= 0");
      }
      return;
  }
}

}  // namespace

std::string to_string(PerturbKind kind) {
  switch (kind) {
    case PerturbKind::kNone:
      return "none";
    case PerturbKind::kJpeg:
      return "jpeg";
    case PerturbKind::kBlur:
      return "gaussian_blur";
  }
  return "?";
}

PerturbKind perturb_kind_from_string(const std::string& name) {
  if (name == "none") return PerturbKind::kNone;
  if (name == "jpeg") return PerturbKind::kJpeg;
  if (name == "gaussian_blur" || name == "blur") return PerturbKind::kBlur;
  throw ConfigError("unknown perturbation kind '" + name + "'");
}

void PerturbSpec::validate() const {
  if (levels.empty()) throw ConfigError("perturb: no levels given");
  for (double l : levels) check_level(kind, l, sigma_per_level);
}

PerturbSpec default_jpeg_spec() { return {PerturbKind::kJpeg, {100, 90, 80, 70, 60, 50}, 0.25}; }

PerturbSpec default_blur_spec() { return {PerturbKind::kBlur, {0, 3, 7, 11, 15, 19}, 0.25}; }

Tensor perturb(const Tensor& image, PerturbKind kind, double level, double sigma_per_level) {
  check_level(kind, level, sigma_per_level);
  if (image.rank() == 3) return perturb_one(image, kind, level, sigma_per_level);
  if (image.rank() != 4) throw ShapeError("perturb: expected [3,h,w] or [n,3,h,w]");
  const int64_t n = image.dim(0);
  const Shape one{image.dim(1), image.dim(2), image.dim(3)};
  const int64_t stride = shape_numel(one);
  Tensor out(image.shape());
  // Per-image work is independent; the first error is rethrown after the loop.
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (int64_t i = 0; i < n; ++i) {
    try {
      Tensor src(one, std::vector<float>(image.data() + i * stride, image.data() + (i + 1) * stride));
      const Tensor dst = perturb_one(src, kind, level, sigma_per_level);
      std::memcpy(out.data() + i * stride, dst.data(), sizeof(float) * static_cast<size_t>(stride));
    } catch (...) {
#pragma omp critical(rloop_perturb_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

RobustnessReport robustness_sweep(const LoopModel& model, const std::vector<ForgeryRecord>& records,
                                  const std::vector<PerturbSpec>& specs) {
  for (const auto& s : specs) s.validate();
  RobustnessReport report;
  std::vector<std::string> ids;
  for (const auto& r : records) ids.push_back(r.id);
  const Tensor images = records.empty() ? Tensor() : stack_images(records);
  const Tensor masks = records.empty() ? Tensor() : stack_masks(records);
  for (const auto& spec : specs) {
    for (double level : spec.levels) {
      RobustnessRow row;
      row.kind = spec.kind;
      row.level = level;
      row.n_images = static_cast<int64_t>(records.size());
      if (!records.empty()) {
        const Tensor x = perturb(images, spec.kind, level, spec.sigma_per_level);
        const PreparedSet set = prepare_set(model.mae, ids, x, masks);
        const EvalReport eval = evaluate(model, set);
        row.mean_iou = eval.refined.iou;
        row.mean_f1 = eval.refined.f1;
      }
      report.rows.push_back(row);
    }
  }
  return report;
}

void write_robustness_csv(std::ostream& os, const RobustnessReport& report) {
  os << "kind,level,mean_iou,mean_f1,n_images\n";
  os.precision(9);
  for (const auto& r : report.rows) {
    os << to_string(r.kind) << ',' << r.level << ',' << r.mean_iou << ',' << r.mean_f1 << ','
       << r.n_images << '\n';
  }
}

void write_robustness_svg(std::ostream& os, const RobustnessReport& report) {
  std::map<PerturbKind, std::vector<const RobustnessRow*>> panels;
  for (const auto& r : report.rows) panels[r.kind].push_back(&r);
  const int pw = 320;
  const int ph = 240;
  const int margin = 40;
  const int width = std::max<int>(1, static_cast<int>(panels.size())) * pw;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << ph
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  int panel = 0;
  for (const auto& [kind, rows] : panels) {
    const int x0 = panel * pw + margin;
    const int y0 = ph - margin;
    const int w = pw - 2 * margin;
    const int h = ph - 2 * margin;
    double lo = rows.front()->level;
    double hi = lo;
    for (const auto* r : rows) {
      lo = std::min(lo, r->level);
      hi = std::max(hi, r->level);
    }
    const double span = hi > lo ? hi - lo : 1.0;
    // JPEG quality falls left to right so degradation reads the same way in both panels.
    const bool reversed = kind == PerturbKind::kJpeg;
    auto px = [&](double level) {
      const double t = (level - lo) / span;
      return x0 + w * (reversed ? 1.0 - t : t);
    };
    auto py = [&](double f1) { return y0 - h * std::clamp(f1, 0.0, 1.0); };
    os << "<g>\n<text x=\"" << x0 + w / 2 << "\" y=\"" << margin / 2
       << "\" text-anchor=\"middle\">" << to_string(kind) << "</text>\n";
    os << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 + w << "\" y2=\"" << y0
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y0 - h
       << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
      const double v = k / 4.0;
      os << "<text x=\"" << x0 - 4 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">" << v
         << "</text>\n";
    }
    os << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
    std::vector<const RobustnessRow*> sorted = rows;
    std::sort(sorted.begin(), sorted.end(),
              [&](const auto* a, const auto* b) { return px(a->level) < px(b->level); });
    for (const auto* r : sorted) os << px(r->level) << ',' << py(r->mean_f1) << ' ';
    os << "\"/>\n";
    for (const auto* r : sorted) {
      os << "<circle cx=\"" << px(r->level) << "\" cy=\"" << py(r->mean_f1)
         << "\" r=\"3\" fill=\"#1f77b4\"/>\n";
      os << "<text x=\"" << px(r->level) << "\" y=\"" << y0 + 14 << "\" text-anchor=\"middle\">"
         << r->level << "</text>\n";
    }
    os << "<text x=\"" << x0 + w / 2 << "\" y=\"" << ph - 6 << "\" text-anchor=\"middle\">"
       << (reversed ? "quality" : "level") << " (mean F1)</text>\n</g>\n";
    ++panel;
  }
  os << "</svg>\n";
}

}  // namespace rloop
