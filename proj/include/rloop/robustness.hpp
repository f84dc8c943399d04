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

// Perturbation sweeps: JPEG re-encoding and Gaussian blur at increasing
// strength, scored on the refined mask.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rloop/pipeline.hpp"

namespace rloop {

enum class PerturbKind { kNone, kJpeg, kBlur };

std::string to_string(PerturbKind kind);
PerturbKind perturb_kind_from_string(const std::string& name);

struct PerturbSpec {
  PerturbKind kind = PerturbKind::kNone;
  // JPEG quality, or blur level (sigma = level * sigma_per_level).
  std::vector<double> levels;
  double sigma_per_level = 0.25;

  void validate() const;
};

PerturbSpec default_jpeg_spec();  // qualities 100, 90, ..., 50
PerturbSpec default_blur_spec();  // levels 0, 3, 7, 11, 15, 19

// image: [3, h, w] or [batch, 3, h, w]; masks are never touched.
Tensor perturb(const Tensor& image, PerturbKind kind, double level, double sigma_per_level = 0.25);

struct RobustnessRow {
  PerturbKind kind = PerturbKind::kNone;
  double level = 0.0;
  double mean_iou = 0.0;
  double mean_f1 = 0.0;
  int64_t n_images = 0;
};

struct RobustnessReport {
  std::vector<RobustnessRow> rows;
};

// Each level perturbs the images, recomputes the stage-1 reconstruction and
// runs the full loop.
RobustnessReport robustness_sweep(const LoopModel& model, const std::vector<ForgeryRecord>& records,
                                  const std::vector<PerturbSpec>& specs);

// Header `kind,level,mean_iou,mean_f1,n_images`.
void write_robustness_csv(std::ostream& os, const RobustnessReport& report);
// Line plot of mean F1 against level, one panel per perturbation kind.
void write_robustness_svg(std::ostream& os, const RobustnessReport& report);

}  // namespace rloop
