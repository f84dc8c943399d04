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

// Two-stage closed loop: the frozen prior reconstructs the image, the shared
// segmenter predicts a coarse mask from image and residual, the coarse mask
// steers a second reconstruction, and the same segmenter predicts the
// refined mask from the new residual.

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "rloop/dssn.hpp"
#include "rloop/losses.hpp"
#include "rloop/mae.hpp"
#include "rloop/synth_data.hpp"
#include "rloop/tapi.hpp"

namespace rloop {

struct AblationFlags {
  bool use_dssn_dual = true;
  bool use_tapi = true;
  bool use_adaptive_decoder = true;
  // Stops the gradient from the prompt encoder flowing back into stage 1.
  bool detach_prompt = false;

  void validate() const;
  friend bool operator==(const AblationFlags&, const AblationFlags&) = default;
};

struct TrainConfig {
  double lr = 2e-4;
  double weight_decay = 1e-5;
  int64_t batch_size = 8;
  int64_t max_epochs = 100;
  int64_t patience = 10;
  double alpha = 0.5;
  uint64_t seed = 0;
  double grad_clip = 1.0;
  // Epochs before this one train stage 1 only.
  int64_t stage2_start_epoch = 0;
  AblationFlags flags;

  void validate() const;
};

struct ModelConfig {
  MaeConfig mae;
  DssnConfig dssn;
  PromptEncoderConfig prompt;
  AblationFlags flags;
};

class LoopModel {
 public:
  LoopModel() = default;
  // Takes a deep copy of `prior` and freezes it. `dssn.dual` is overridden by
  // flags.use_dssn_dual.
  LoopModel(const Mae& prior, DssnConfig dssn, const PromptEncoderConfig& prompt,
            const AblationFlags& flags, uint64_t seed);

  ModelConfig config() const;
  // Groups active under the current flags, frozen ones first.
  ParamList params() const;
  ParamList trainable_params() const;

  Mae mae;
  Dssn dssn;
  Tapi tapi;
  AblationFlags flags;
  PromptEncoderConfig prompt_config;
};

// Images with masks and their (frozen) stage-1 reconstruction.
struct PreparedSet {
  std::vector<std::string> ids;
  Tensor images;  // [n, 3, h, w]
  Tensor masks;   // [n, 1, h, w]
  ReconResult s1;

  int64_t size() const { return static_cast<int64_t>(ids.size()); }
  PreparedSet subset(const std::vector<int64_t>& rows) const;
};

PreparedSet prepare_set(const Mae& prior, const std::vector<ForgeryRecord>& records);
PreparedSet prepare_set(const Mae& prior, std::vector<std::string> ids, Tensor images,
                        Tensor masks);

struct ForwardTrace {
  Tensor x;
  Tensor x_rec_s1;
  Tensor residual_s1;
  Var m_crs;
  bool has_stage2 = false;
  Var prompts;
  FilmParams film;
  Var x_rec_s2;
  Var residual_s2;
  Var m_ref;
  const Dssn* dssn_stage1 = nullptr;
  const Dssn* dssn_stage2 = nullptr;
};

// `s1` must be the stage-1 reconstruction of `x`. With run_stage2 = false (or
// use_tapi off) m_ref is m_crs.
ForwardTrace forward_two_stage(const LoopModel& model, const Tensor& x, const ReconResult& s1,
                               bool run_stage2 = true);
ForwardTrace forward_two_stage(const LoopModel& model, const Tensor& x);

struct EpochLog {
  int64_t epoch = 0;
  double l_crs = 0.0;
  double l_ref = 0.0;
  double l_total = 0.0;
  double val_iou_crs = 0.0;
  double val_iou_ref = 0.0;
  double val_f1_ref = 0.0;
  double val_f1_crs = 0.0;
};

struct TrainHooks {
  std::function<void(const EpochLog&)> on_epoch;
  // When set, the best-validation model is saved here whenever it improves.
  std::string checkpoint_path;
};

struct TrainResult {
  std::vector<EpochLog> log;
  int64_t best_epoch = -1;
  double best_val_iou = -1.0;
  bool stopped_early = false;
};

// Trains the active groups of `model` in place and leaves the best-validation
// weights loaded. Throws TrainingError on a non-finite loss.
TrainResult train(LoopModel& model, const PreparedSet& train_set, const PreparedSet& val_set,
                  const TrainConfig& config, const TrainHooks& hooks = {});

struct EvalReport {
  MetricReport coarse;
  MetricReport refined;
};

EvalReport evaluate(const LoopModel& model, const PreparedSet& set, int64_t batch_size = 16);

// Header `epoch,l_crs,l_ref,l_total,val_iou_crs,val_iou_ref,val_f1_ref,val_f1_crs`.
void write_train_log_csv(std::ostream& os, const std::vector<EpochLog>& log);

void save_model(const std::string& path, const LoopModel& model, const TrainConfig& train,
                const std::string& rng_state = "");
LoopModel load_model(const std::string& path);
void save_mae(const std::string& path, const Mae& mae);
Mae load_mae(const std::string& path);

}  // namespace rloop
