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

// JSON form of every configuration struct. Unknown keys are rejected; absent
// keys keep their defaults.

#include <string>

#include "json.hpp"
#include "rloop/pipeline.hpp"
#include "rloop/robustness.hpp"

namespace rloop {

struct RunConfig {
  DatasetSpec data;
  int64_t n_prior = 1000;
  MaeConfig mae;
  PretrainOptions pretrain;
  DssnConfig dssn;
  PromptEncoderConfig prompt;
  TrainConfig train;
  PerturbSpec jpeg = default_jpeg_spec();
  PerturbSpec blur = default_blur_spec();
  int64_t ablation_seeds = 3;
  // Epoch cap for each ablation run; 0 uses train.max_epochs.
  int64_t ablation_epochs = 0;
};

void to_json(nlohmann::json& j, const DatasetSpec& v);
void from_json(const nlohmann::json& j, DatasetSpec& v);
void to_json(nlohmann::json& j, const MaeConfig& v);
void from_json(const nlohmann::json& j, MaeConfig& v);
void to_json(nlohmann::json& j, const PretrainOptions& v);
void from_json(const nlohmann::json& j, PretrainOptions& v);
void to_json(nlohmann::json& j, const DssnConfig& v);
void from_json(const nlohmann::json& j, DssnConfig& v);
void to_json(nlohmann::json& j, const PromptEncoderConfig& v);
void from_json(const nlohmann::json& j, PromptEncoderConfig& v);
void to_json(nlohmann::json& j, const AblationFlags& v);
void from_json(const nlohmann::json& j, AblationFlags& v);
void to_json(nlohmann::json& j, const TrainConfig& v);
void from_json(const nlohmann::json& j, TrainConfig& v);
void to_json(nlohmann::json& j, const PerturbSpec& v);
void from_json(const nlohmann::json& j, PerturbSpec& v);
void to_json(nlohmann::json& j, const RunConfig& v);
void from_json(const nlohmann::json& j, RunConfig& v);

// Parses and validates; malformed input raises ConfigError naming the file.
RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const std::string& text);

}  // namespace rloop
