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

// Four-row component sweep: single-stream baseline, dual stream, prior
// injection with a frozen decoder, and the full loop.

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "rloop/pipeline.hpp"

namespace rloop {

struct AblationRow {
  std::string index;  // "I" .. "IV"
  AblationFlags flags;
  std::vector<double> val_iou_ref;  // one entry per seed
  std::vector<double> val_f1_ref;
  std::vector<double> val_iou_crs;
  double mean_iou_ref() const;
  double mean_f1_ref() const;
  double mean_iou_crs() const;
};

std::vector<AblationRow> ablation_rows();

struct AblationOptions {
  TrainConfig train;  // flags are replaced per row
  DssnConfig dssn;
  PromptEncoderConfig prompt;
  std::vector<uint64_t> seeds{0, 1, 2};
  std::function<void(const AblationRow&, uint64_t seed, const TrainResult&)> on_run;
};

// Each seed sets both the model init and the training order.
std::vector<AblationRow> run_ablation(const Mae& prior, const PreparedSet& train_set,
                                      const PreparedSet& val_set, const AblationOptions& options);

// Header `index,use_dssn_dual,use_tapi,use_adaptive_decoder,n_seeds,val_iou_crs,val_iou_ref,val_f1_ref`.
void write_ablation_csv(std::ostream& os, const std::vector<AblationRow>& rows);

}  // namespace rloop
