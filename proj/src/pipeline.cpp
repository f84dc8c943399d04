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

#include "rloop/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <ostream>
#include <sstream>

#include "rloop/checkpoint.hpp"
#include "rloop/config.hpp"
#include "rloop/errors.hpp"
#include "rloop/optim.hpp"

namespace rloop {
namespace {

constexpr int64_t kReconBatch = 32;

Tensor gather_rows(const Tensor& t, const std::vector<int64_t>& rows) {
  if (t.empty()) return t;
  Shape shape = t.shape();
  const int64_t n = shape[0];
  const int64_t stride = t.numel() / n;
  shape[0] = static_cast<int64_t>(rows.size());
  Tensor out(shape);
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= n) throw ShapeError("row index out of range");
    std::memcpy(out.data() + static_cast<int64_t>(i) * stride, t.data() + rows[i] * stride,
                sizeof(float) * static_cast<size_t>(stride));
  }
  return out;
}

Tensor row_range(const Tensor& t, int64_t begin, int64_t end) {
  std::vector<int64_t> rows(static_cast<size_t>(end - begin));
  std::iota(rows.begin(), rows.end(), begin);
  return gather_rows(t, rows);
}

void put_rows(Tensor& dst, const Tensor& src, int64_t begin) {
  const int64_t stride = src.numel() / src.dim(0);
  std::memcpy(dst.data() + begin * stride, src.data(), sizeof(float) * src.values().size());
}

std::vector<Tensor> snapshot(const ParamList& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.var.value());
  return out;
}

void restore(const ParamList& params, const std::vector<Tensor>& values) {
  for (size_t i = 0; i < params.size(); ++i) {
    Var v = params[i].var;
    v.mutable_value() = values[i];
  }
}

nlohmann::json model_configs(const LoopModel& model) {
  const ModelConfig c = model.config();
  return {{"mae", c.mae}, {"dssn", c.dssn}, {"prompt", c.prompt}, {"flags", c.flags}};
}

}  // namespace

void AblationFlags::validate() const {
  if (use_adaptive_decoder && !use_tapi) {
    throw ConfigError("flags: use_adaptive_decoder requires use_tapi");
  }
  if (detach_prompt && !use_tapi) throw ConfigError("flags: detach_prompt requires use_tapi");
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("train: lr must be > 0");
  if (weight_decay < 0.0) throw ConfigError("train: weight_decay must be >= 0");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
  if (patience < 1 || patience >= max_epochs) {
    throw ConfigError("train: patience must be in [1, max_epochs)");
  }
  if (alpha < 0.0) throw ConfigError("train: alpha must be >= 0");
  if (!(grad_clip > 0.0)) throw ConfigError("train: grad_clip must be > 0");
  if (stage2_start_epoch < 0) throw ConfigError("train: stage2_start_epoch must be >= 0");
  flags.validate();
}

LoopModel::LoopModel(const Mae& prior, DssnConfig dssn_config, const PromptEncoderConfig& prompt,
                     const AblationFlags& flags_in, uint64_t seed)
    : mae(prior.clone()), flags(flags_in), prompt_config(prompt) {
  flags.validate();
  mae.freeze_encoder();
  mae.freeze_decoder();
  dssn_config.dual = flags.use_dssn_dual;
  dssn_config.image_size = mae.config.image_size;
  dssn_config.validate();
  prompt.validate(mae.config.image_size);
  Rng rng(seed);
  dssn = Dssn(dssn_config, rng);
  tapi = Tapi(prompt, mae, rng);
}

ModelConfig LoopModel::config() const { return {mae.config, dssn.config, prompt_config, flags}; }

ParamList LoopModel::params() const {
  ParamList out = mae.params();
  for (auto& p : dssn.params()) out.push_back(p);
  if (flags.use_tapi) {
    for (auto& p : tapi.prompt_params()) out.push_back(p);
    for (auto& p : tapi.film_params()) out.push_back(p);
    if (flags.use_adaptive_decoder) {
      for (auto& p : tapi.decoder_params()) out.push_back(p);
    }
  }
  return out;
}

ParamList LoopModel::trainable_params() const {
  ParamList out;
  for (auto& p : params()) {
    if (p.var.requires_grad()) out.push_back(p);
  }
  return out;
}

PreparedSet PreparedSet::subset(const std::vector<int64_t>& rows) const {
  PreparedSet out;
  for (int64_t r : rows) out.ids.push_back(ids.at(static_cast<size_t>(r)));
  out.images = gather_rows(images, rows);
  out.masks = gather_rows(masks, rows);
  out.s1.x_rec = gather_rows(s1.x_rec, rows);
  out.s1.residual = gather_rows(s1.residual, rows);
  out.s1.tokens = gather_rows(s1.tokens, rows);
  return out;
}

PreparedSet prepare_set(const Mae& prior, const std::vector<ForgeryRecord>& records) {
  std::vector<std::string> ids;
  for (const auto& r : records) ids.push_back(r.id);
  if (records.empty()) return prepare_set(prior, std::move(ids), Tensor(), Tensor());
  return prepare_set(prior, std::move(ids), stack_images(records), stack_masks(records));
}

PreparedSet prepare_set(const Mae& prior, std::vector<std::string> ids, Tensor images,
                        Tensor masks) {
  PreparedSet out;
  out.ids = std::move(ids);
  out.images = std::move(images);
  out.masks = std::move(masks);
  const int64_t n = out.size();
  if (n == 0) return out;
  if (out.images.rank() != 4 || out.images.dim(0) != n || out.masks.rank() != 4 ||
      out.masks.dim(0) != n || out.masks.dim(1) != 1) {
    throw ShapeError("prepare_set: expected images [n,3,h,w] and masks [n,1,h,w]");
  }
  const MaeConfig& c = prior.config;
  out.s1.x_rec = Tensor(out.images.shape());
  out.s1.residual = Tensor(out.images.shape());
  out.s1.tokens = Tensor({n, c.num_patches(), c.dim});
  for (int64_t b = 0; b < n; b += kReconBatch) {
    const int64_t e = std::min(n, b + kReconBatch);
    ReconResult r = reconstruct(prior, row_range(out.images, b, e));
    put_rows(out.s1.x_rec, r.x_rec, b);
    put_rows(out.s1.residual, r.residual, b);
    put_rows(out.s1.tokens, r.tokens, b);
  }
  return out;
}

ForwardTrace forward_two_stage(const LoopModel& model, const Tensor& x, const ReconResult& s1,
                               bool run_stage2) {
  model.flags.validate();
  ForwardTrace t;
  t.x = x;
  t.x_rec_s1 = s1.x_rec;
  t.residual_s1 = s1.residual;
  const Var image(x);
  t.m_crs = model.dssn(image, Var(s1.residual)).mask;
  t.dssn_stage1 = &model.dssn;
  if (!model.flags.use_tapi || !run_stage2) {
    t.m_ref = t.m_crs;
    return t;
  }
  const Var prompt_in = model.flags.detach_prompt ? t.m_crs.detach() : t.m_crs;
  const MaeDecoder& decoder =
      model.flags.use_adaptive_decoder ? model.tapi.decoder : model.mae.decoder;
  GuidedRecon g = model.tapi.guided_reconstruct(model.mae, decoder, x, s1.tokens, prompt_in);
  t.has_stage2 = true;
  t.prompts = g.prompts;
  t.film = g.film;
  t.x_rec_s2 = g.x_rec;
  t.residual_s2 = g.residual;
  t.m_ref = model.dssn(image, g.residual).mask;
  t.dssn_stage2 = &model.dssn;
  return t;
}

ForwardTrace forward_two_stage(const LoopModel& model, const Tensor& x) {
  return forward_two_stage(model, x, reconstruct(model.mae, x));
}

EvalReport evaluate(const LoopModel& model, const PreparedSet& set, int64_t batch_size) {
  EvalReport report;
  const int64_t n = set.size();
  if (n == 0) return report;
  if (batch_size < 1) throw ConfigError("evaluate: batch_size must be >= 1");
  NoGradGuard no_grad;
  Tensor coarse(set.masks.shape());
  Tensor refined(set.masks.shape());
  for (int64_t b = 0; b < n; b += batch_size) {
    const int64_t e = std::min(n, b + batch_size);
    std::vector<int64_t> rows(static_cast<size_t>(e - b));
    std::iota(rows.begin(), rows.end(), b);
    const PreparedSet part = set.subset(rows);
    const ForwardTrace t = forward_two_stage(model, part.images, part.s1);
    put_rows(coarse, t.m_crs.value(), b);
    put_rows(refined, t.m_ref.value(), b);
  }
  report.coarse = iou_f1(coarse, set.masks, 0.5, set.ids);
  report.refined = iou_f1(refined, set.masks, 0.5, set.ids);
  return report;
}

TrainResult train(LoopModel& model, const PreparedSet& train_set, const PreparedSet& val_set,
                  const TrainConfig& config, const TrainHooks& hooks) {
  config.validate();
  if (!(config.flags == model.flags)) {
    throw ConfigError("train: config flags differ from the flags the model was built with");
  }
  if (train_set.size() == 0) throw ConfigError("train: empty training set");
  if (val_set.size() == 0) throw ConfigError("train: empty validation set");

  const ParamList trainable = model.trainable_params();
  AdamWOptions opt_options;
  opt_options.lr = config.lr;
  opt_options.weight_decay = config.weight_decay;
  AdamW optimizer(trainable, opt_options);
  Rng rng(config.seed);

  std::vector<int64_t> order(static_cast<size_t>(train_set.size()));
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  std::vector<Tensor> best = snapshot(trainable);
  for (int64_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    const bool run_stage2 = epoch >= config.stage2_start_epoch;
    double sum_crs = 0.0;
    double sum_ref = 0.0;
    int64_t batch_index = 0;
    for (size_t b = 0; b < order.size(); b += static_cast<size_t>(config.batch_size), ++batch_index) {
      const size_t e = std::min(order.size(), b + static_cast<size_t>(config.batch_size));
      const std::vector<int64_t> rows(order.begin() + static_cast<std::ptrdiff_t>(b),
                                      order.begin() + static_cast<std::ptrdiff_t>(e));
      const PreparedSet batch = train_set.subset(rows);
      optimizer.zero_grad();
      const ForwardTrace t = forward_two_stage(model, batch.images, batch.s1, run_stage2);
      const Var l_crs = stage_loss(t.m_crs, batch.masks);
      const Var l_ref = stage_loss(t.m_ref, batch.masks);
      const Var total = add_scaled(l_ref, l_crs, static_cast<float>(config.alpha));
      const double crs = l_crs.value()[0];
      const double ref = l_ref.value()[0];
      if (!std::isfinite(total.value()[0])) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch << ", batch " << batch_index
            << " (l_crs=" << crs << ", l_ref=" << ref << "), images:";
        for (const auto& id : batch.ids) msg << ' ' << id;
        throw TrainingError(msg.str());
      }
      backward(total);
      clip_grad_norm(trainable, config.grad_clip);
      optimizer.step();
      const auto weight = static_cast<double>(rows.size());
      sum_crs += crs * weight;
      sum_ref += ref * weight;
    }

    EpochLog log;
    log.epoch = epoch;
    log.l_crs = sum_crs / static_cast<double>(train_set.size());
    log.l_ref = sum_ref / static_cast<double>(train_set.size());
    log.l_total = total_loss(log.l_ref, log.l_crs, config.alpha).l_total;
    const EvalReport val = evaluate(model, val_set);
    log.val_iou_crs = val.coarse.iou;
    log.val_f1_crs = val.coarse.f1;
    log.val_iou_ref = val.refined.iou;
    log.val_f1_ref = val.refined.f1;
    result.log.push_back(log);

    if (log.val_iou_ref > result.best_val_iou) {
      result.best_val_iou = log.val_iou_ref;
      result.best_epoch = epoch;
      best = snapshot(trainable);
      if (!hooks.checkpoint_path.empty()) save_model(hooks.checkpoint_path, model, config);
    }
    if (hooks.on_epoch) hooks.on_epoch(log);
    if (epoch - result.best_epoch >= config.patience) {
      result.stopped_early = epoch + 1 < config.max_epochs;
      break;
    }
  }
  restore(trainable, best);
  return result;
}

void write_train_log_csv(std::ostream& os, const std::vector<EpochLog>& log) {
  os << "epoch,l_crs,l_ref,l_total,val_iou_crs,val_iou_ref,val_f1_ref,val_f1_crs\n";
  os.precision(9);
  for (const auto& e : log) {
    os << e.epoch << ',' << e.l_crs << ',' << e.l_ref << ',' << e.l_total << ',' << e.val_iou_crs
       << ',' << e.val_iou_ref << ',' << e.val_f1_ref << ',' << e.val_f1_crs << '\n';
  }
}

void save_model(const std::string& path, const LoopModel& model, const TrainConfig& train,
                const std::string& rng_state) {
  nlohmann::json configs = model_configs(model);
  configs["train"] = train;
  write_checkpoint(path, configs, model.params(), rng_state);
}

LoopModel load_model(const std::string& path) {
  const CheckpointData data = read_checkpoint(path);
  ModelConfig c;
  try {
    c.mae = data.configs.at("mae").get<MaeConfig>();
    c.dssn = data.configs.at("dssn").get<DssnConfig>();
    c.prompt = data.configs.at("prompt").get<PromptEncoderConfig>();
    c.flags = data.configs.at("flags").get<AblationFlags>();
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError(path, std::string("bad model configs: ") + e.what());
  }
  c.mae.validate();
  Rng rng(0);
  const Mae prior(c.mae, rng);
  LoopModel model(prior, c.dssn, c.prompt, c.flags, 0);
  restore_params(data, model.params(), path);
  return model;
}

void save_mae(const std::string& path, const Mae& mae) {
  write_checkpoint(path, {{"mae", mae.config}}, mae.params());
}

Mae load_mae(const std::string& path) {
  const CheckpointData data = read_checkpoint(path);
  MaeConfig c;
  try {
    c = data.configs.at("mae").get<MaeConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError(path, std::string("bad MAE config: ") + e.what());
  }
  c.validate();
  Rng rng(0);
  Mae mae(c, rng);
  restore_params(data, mae.params(), path);
  return mae;
}

}  // namespace rloop
