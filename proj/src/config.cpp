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

#include "rloop/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include "rloop/errors.hpp"

namespace rloop {
namespace {

using json = nlohmann::json;

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known |= key == a;
    if (!known) throw ConfigError(std::string(what) + ": unknown key '" + key + "'");
  }
}

template <typename T>
void get(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void to_json(json& j, const DatasetSpec& v) {
  j = {{"seed", v.seed},       {"n_train", v.n_train},       {"n_val", v.n_val},
       {"n_test", v.n_test},   {"resolution", v.resolution}, {"forged_fraction", v.forged_fraction}};
}

void from_json(const json& j, DatasetSpec& v) {
  check_keys(j, {"seed", "n_train", "n_val", "n_test", "resolution", "forged_fraction"}, "data");
  get(j, "seed", v.seed);
  get(j, "n_train", v.n_train);
  get(j, "n_val", v.n_val);
  get(j, "n_test", v.n_test);
  get(j, "resolution", v.resolution);
  get(j, "forged_fraction", v.forged_fraction);
}

void to_json(json& j, const MaeConfig& v) {
  j = {{"image_size", v.image_size},   {"patch_size", v.patch_size},
       {"channels", v.channels},       {"dim", v.dim},
       {"decoder_dim", v.decoder_dim}, {"encoder_depth", v.encoder_depth},
       {"decoder_depth", v.decoder_depth}, {"heads", v.heads},
       {"decoder_heads", v.decoder_heads}, {"mlp_ratio", v.mlp_ratio},
       {"mask_ratio", v.mask_ratio}};
}

void from_json(const json& j, MaeConfig& v) {
  check_keys(j, {"image_size", "patch_size", "channels", "dim", "decoder_dim", "encoder_depth",
                 "decoder_depth", "heads", "decoder_heads", "mlp_ratio", "mask_ratio"},
             "mae");
  get(j, "image_size", v.image_size);
  get(j, "patch_size", v.patch_size);
  get(j, "channels", v.channels);
  get(j, "dim", v.dim);
  get(j, "decoder_dim", v.decoder_dim);
  get(j, "encoder_depth", v.encoder_depth);
  get(j, "decoder_depth", v.decoder_depth);
  get(j, "heads", v.heads);
  get(j, "decoder_heads", v.decoder_heads);
  get(j, "mlp_ratio", v.mlp_ratio);
  get(j, "mask_ratio", v.mask_ratio);
}

void to_json(json& j, const PretrainOptions& v) {
  j = {{"epochs", v.epochs},
       {"batch_size", v.batch_size},
       {"lr", v.lr},
       {"weight_decay", v.weight_decay},
       {"visible_weight", v.visible_weight},
       {"full_view_fraction", v.full_view_fraction},
       {"seed", v.seed}};
}

void from_json(const json& j, PretrainOptions& v) {
  check_keys(j, {"epochs", "batch_size", "lr", "weight_decay", "visible_weight",
                 "full_view_fraction", "seed"},
             "pretrain");
  get(j, "epochs", v.epochs);
  get(j, "batch_size", v.batch_size);
  get(j, "lr", v.lr);
  get(j, "weight_decay", v.weight_decay);
  get(j, "visible_weight", v.visible_weight);
  get(j, "full_view_fraction", v.full_view_fraction);
  get(j, "seed", v.seed);
}

void to_json(json& j, const DssnConfig& v) {
  j = {{"image_size", v.image_size},
       {"in_channels", v.in_channels},
       {"stage_dims", v.stage_dims},
       {"stage_downsample", v.stage_downsample},
       {"heads", v.heads},
       {"sr_ratios", v.sr_ratios},
       {"depths", v.depths},
       {"mlp_ratio", v.mlp_ratio},
       {"decoder_dim", v.decoder_dim},
       {"residual_scale", v.residual_scale},
       {"dual", v.dual},
       {"fusion_feedforward", v.fusion_feedforward}};
}

void from_json(const json& j, DssnConfig& v) {
  check_keys(j, {"image_size", "in_channels", "stage_dims", "stage_downsample", "heads",
                 "sr_ratios", "depths", "mlp_ratio", "decoder_dim", "residual_scale", "dual",
                 "fusion_feedforward"},
             "dssn");
  get(j, "image_size", v.image_size);
  get(j, "in_channels", v.in_channels);
  get(j, "stage_dims", v.stage_dims);
  get(j, "stage_downsample", v.stage_downsample);
  get(j, "heads", v.heads);
  get(j, "sr_ratios", v.sr_ratios);
  get(j, "depths", v.depths);
  get(j, "mlp_ratio", v.mlp_ratio);
  get(j, "decoder_dim", v.decoder_dim);
  get(j, "residual_scale", v.residual_scale);
  get(j, "dual", v.dual);
  get(j, "fusion_feedforward", v.fusion_feedforward);
}

void to_json(json& j, const PromptEncoderConfig& v) {
  j = {{"channels", v.channels}, {"downsample", v.downsample}, {"token_dim", v.token_dim}};
}

void from_json(const json& j, PromptEncoderConfig& v) {
  check_keys(j, {"channels", "downsample", "token_dim"}, "prompt");
  get(j, "channels", v.channels);
  get(j, "downsample", v.downsample);
  get(j, "token_dim", v.token_dim);
}

void to_json(json& j, const AblationFlags& v) {
  j = {{"use_dssn_dual", v.use_dssn_dual},
       {"use_tapi", v.use_tapi},
       {"use_adaptive_decoder", v.use_adaptive_decoder},
       {"detach_prompt", v.detach_prompt}};
}

void from_json(const json& j, AblationFlags& v) {
  check_keys(j, {"use_dssn_dual", "use_tapi", "use_adaptive_decoder", "detach_prompt"}, "flags");
  get(j, "use_dssn_dual", v.use_dssn_dual);
  get(j, "use_tapi", v.use_tapi);
  get(j, "use_adaptive_decoder", v.use_adaptive_decoder);
  get(j, "detach_prompt", v.detach_prompt);
}

void to_json(json& j, const TrainConfig& v) {
  j = {{"lr", v.lr},
       {"weight_decay", v.weight_decay},
       {"batch_size", v.batch_size},
       {"max_epochs", v.max_epochs},
       {"patience", v.patience},
       {"alpha", v.alpha},
       {"seed", v.seed},
       {"grad_clip", v.grad_clip},
       {"stage2_start_epoch", v.stage2_start_epoch},
       {"flags", v.flags}};
}

void from_json(const json& j, TrainConfig& v) {
  check_keys(j, {"lr", "weight_decay", "batch_size", "max_epochs", "patience", "alpha", "seed",
                 "grad_clip", "stage2_start_epoch", "flags"},
             "train");
  get(j, "lr", v.lr);
  get(j, "weight_decay", v.weight_decay);
  get(j, "batch_size", v.batch_size);
  get(j, "max_epochs", v.max_epochs);
  get(j, "patience", v.patience);
  get(j, "alpha", v.alpha);
  get(j, "seed", v.seed);
  get(j, "grad_clip", v.grad_clip);
  get(j, "stage2_start_epoch", v.stage2_start_epoch);
  get(j, "flags", v.flags);
}

void to_json(json& j, const PerturbSpec& v) {
  j = {{"kind", to_string(v.kind)}, {"levels", v.levels}, {"sigma_per_level", v.sigma_per_level}};
}

void from_json(const json& j, PerturbSpec& v) {
  check_keys(j, {"kind", "levels", "sigma_per_level"}, "perturb");
  if (j.contains("kind")) v.kind = perturb_kind_from_string(j.at("kind").get<std::string>());
  get(j, "levels", v.levels);
  get(j, "sigma_per_level", v.sigma_per_level);
}

void to_json(json& j, const RunConfig& v) {
  j = {{"data", v.data},
       {"n_prior", v.n_prior},
       {"mae", v.mae},
       {"pretrain", v.pretrain},
       {"dssn", v.dssn},
       {"prompt", v.prompt},
       {"train", v.train},
       {"jpeg", v.jpeg},
       {"blur", v.blur},
       {"ablation_seeds", v.ablation_seeds},
       {"ablation_epochs", v.ablation_epochs}};
}

void from_json(const json& j, RunConfig& v) {
  check_keys(j, {"data", "n_prior", "mae", "pretrain", "dssn", "prompt", "train", "jpeg", "blur",
                 "ablation_seeds", "ablation_epochs"},
             "config");
  get(j, "data", v.data);
  get(j, "n_prior", v.n_prior);
  get(j, "mae", v.mae);
  get(j, "pretrain", v.pretrain);
  get(j, "dssn", v.dssn);
  get(j, "prompt", v.prompt);
  get(j, "train", v.train);
  get(j, "jpeg", v.jpeg);
  get(j, "blur", v.blur);
  get(j, "ablation_seeds", v.ablation_seeds);
  get(j, "ablation_epochs", v.ablation_epochs);
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  try {
    cfg = json::parse(text).get<RunConfig>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  cfg.mae.validate();
  cfg.dssn.image_size = cfg.mae.image_size;
  cfg.dssn.validate();
  cfg.prompt.validate(cfg.mae.image_size);
  cfg.train.validate();
  cfg.jpeg.validate();
  cfg.blur.validate();
  if (cfg.ablation_seeds < 1) throw ConfigError("config: ablation_seeds must be >= 1");
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_run_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace rloop
