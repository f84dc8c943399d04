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

// Versioned binary checkpoint: magic, format version, a JSON header holding
// configs, RNG state and a parameter table, then raw little-endian float32
// data for every parameter in table order.

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "rloop/nn.hpp"

namespace rloop {

inline constexpr uint32_t kCheckpointVersion = 1;

struct StoredParam {
  std::string name;
  Tensor value;
  bool frozen = false;
};

struct CheckpointData {
  nlohmann::json configs;
  std::string rng_state;
  std::vector<StoredParam> params;

  const StoredParam* find(const std::string& name) const;
};

// A parameter is recorded as frozen when it does not require a gradient.
void write_checkpoint(const std::string& path, const nlohmann::json& configs,
                      const ParamList& params, const std::string& rng_state = "");
// Throws IngestionError on a missing, truncated or foreign file.
CheckpointData read_checkpoint(const std::string& path);

// Copies stored values into `params` by name and applies the stored frozen
// flags. Every entry of `params` must be present with the same shape.
void restore_params(const CheckpointData& data, const ParamList& params, const std::string& path);

}  // namespace rloop
