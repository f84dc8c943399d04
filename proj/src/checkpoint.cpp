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

#include "rloop/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "rloop/errors.hpp"

namespace rloop {
namespace {

constexpr char kMagic[8] = {'R', 'L', 'O', 'O', 'P', 'C', 'K', 'P'};

}  // namespace

const StoredParam* CheckpointData::find(const std::string& name) const {
  for (const auto& p : params) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

void write_checkpoint(const std::string& path, const nlohmann::json& configs,
                      const ParamList& params, const std::string& rng_state) {
  nlohmann::json header;
  header["configs"] = configs;
  header["rng_state"] = rng_state;
  header["params"] = nlohmann::json::array();
  int64_t offset = 0;
  for (const auto& p : params) {
    header["params"].push_back({{"name", p.name},
                                {"shape", p.var.shape()},
                                {"frozen", !p.var.requires_grad()},
                                {"offset", offset}});
    offset += p.var.numel();
  }
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IngestionError(path, "cannot write checkpoint");
  const uint32_t version = kCheckpointVersion;
  const uint64_t length = text.size();
  out.write(kMagic, sizeof(kMagic));
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  out.write(reinterpret_cast<const char*>(&length), sizeof(length));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& p : params) {
    out.write(reinterpret_cast<const char*>(p.var.value().data()),
              static_cast<std::streamsize>(p.var.numel() * sizeof(float)));
  }
  if (!out) throw IngestionError(path, "checkpoint write failed");
}

CheckpointData read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError(path, "cannot open checkpoint");
  char magic[sizeof(kMagic)];
  uint32_t version = 0;
  uint64_t length = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&length), sizeof(length));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IngestionError(path, "not a checkpoint file");
  }
  if (version != kCheckpointVersion) {
    throw IngestionError(path, "unsupported checkpoint version " + std::to_string(version));
  }
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  if (!in) throw IngestionError(path, "truncated checkpoint header");

  CheckpointData data;
  try {
    const auto header = nlohmann::json::parse(text);
    data.configs = header.at("configs");
    data.rng_state = header.at("rng_state").get<std::string>();
    for (const auto& p : header.at("params")) {
      StoredParam sp;
      sp.name = p.at("name").get<std::string>();
      sp.value = Tensor(p.at("shape").get<Shape>());
      sp.frozen = p.at("frozen").get<bool>();
      data.params.push_back(std::move(sp));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError(path, std::string("malformed checkpoint header: ") + e.what());
  }
  for (auto& p : data.params) {
    in.read(reinterpret_cast<char*>(p.value.data()),
            static_cast<std::streamsize>(p.value.numel() * sizeof(float)));
    if (!in) throw IngestionError(path, "truncated checkpoint data at " + p.name);
  }
  return data;
}

void restore_params(const CheckpointData& data, const ParamList& params, const std::string& path) {
  for (const auto& p : params) {
    const StoredParam* sp = data.find(p.name);
    if (!sp) throw IngestionError(path, "checkpoint lacks parameter " + p.name);
    if (sp->value.shape() != p.var.shape()) {
      throw IngestionError(path, "parameter " + p.name + " has shape " +
                                     shape_str(sp->value.shape()) + ", model expects " +
                                     shape_str(p.var.shape()));
    }
    Var v = p.var;
    v.mutable_value() = sp->value;
    v.node()->requires_grad = !sp->frozen;
    v.zero_grad();
  }
}

}  // namespace rloop
