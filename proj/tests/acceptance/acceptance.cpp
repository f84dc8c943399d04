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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails.
//
//   acceptance [--cache DIR] [--only N,N,...]
//
// The pretrained prior and the generated dataset are cached in DIR; every
// training run is repeated on each invocation.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rloop/ablation.hpp"
#include "rloop/config.hpp"
#include "rloop/losses.hpp"
#include "rloop/optim.hpp"
#include "rloop/pipeline.hpp"
#include "rloop/robustness.hpp"

namespace fs = std::filesystem;
using namespace rloop;

namespace {

// Fixed experiment settings.
constexpr uint64_t kDataSeed = 2026;
constexpr int64_t kPriorImages = 1000;
constexpr int64_t kTrainImages = 200;
constexpr int64_t kValImages = 50;
constexpr int64_t kMainEpochs = 50;
constexpr int64_t kOverfitImages = 8;
constexpr int64_t kOverfitMaxEpochs = 500;
constexpr int64_t kAblationEpochs = 50;
constexpr double kTrainLr = 2e-4;

// Tolerances.
constexpr double kFdStep = 1e-4;
constexpr double kFdRelTol = 1e-4;
constexpr double kValIouTarget = 0.70;
constexpr double kOverfitIouTarget = 0.90;
constexpr double kAblationGapTol = -0.02;
constexpr double kAmplifyFraction = 0.80;
constexpr double kRobustNoise = 0.03;
constexpr double kRobustIdentityTol = 0.02;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void log(const std::string& msg) {
  std::fprintf(stderr, "[acceptance] %s\n", msg.c_str());
  std::fflush(stderr);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

PretrainOptions prior_options() {
  PretrainOptions o;
  o.seed = kDataSeed;
  return o;
}

TrainConfig main_config(const AblationFlags& flags, uint64_t seed) {
  TrainConfig c;
  c.lr = kTrainLr;
  c.max_epochs = kMainEpochs;
  c.patience = kMainEpochs - 1;
  c.seed = seed;
  c.flags = flags;
  return c;
}

struct Context {
  fs::path cache;
  Mae prior;
  Mae prior_snapshot;  // untouched copy for checksum comparison
  std::vector<ForgeryRecord> train_records;
  std::vector<ForgeryRecord> val_records;
  PreparedSet train_set;
  PreparedSet val_set;

  std::optional<LoopModel> main_model;
  TrainResult main_result;
  double main_seconds = 0.0;

  void load() {
    fs::create_directories(cache);
    const fs::path manifest = cache / "data" / "manifest.json";
    const fs::path prior_manifest = cache / "data" / "prior" / "manifest.json";
    if (!fs::exists(manifest) || !fs::exists(prior_manifest)) {
      log("generating dataset");
      DatasetSpec spec;
      spec.seed = kDataSeed;
      spec.n_train = kTrainImages;
      spec.n_val = kValImages;
      spec.n_test = 0;
      write_dataset(generate_dataset(spec), manifest.string());
      write_dataset(generate_prior_set(kDataSeed, kPriorImages, 64), prior_manifest.string());
    }
    train_records = load_dataset(manifest.string(), Split::kTrain);
    val_records = load_dataset(manifest.string(), Split::kVal);

    const fs::path mae_path = cache / "mae.ckpt";
    const fs::path stamp_path = cache / "mae.stamp";
    const PretrainOptions opts = prior_options();
    const std::string stamp = nlohmann::json{{"mae", MaeConfig{}}, {"pretrain", opts}}.dump();
    std::string old_stamp;
    if (std::ifstream in(stamp_path); in) std::getline(in, old_stamp);
    if (fs::exists(mae_path) && old_stamp == stamp) {
      prior = load_mae(mae_path.string());
    } else {
      log("pretraining the prior");
      const auto t0 = Clock::now();
      const auto prior_records = load_dataset(prior_manifest.string(), Split::kPrior);
      Rng rng(opts.seed);
      prior = Mae(MaeConfig{}, rng);
      PretrainOptions o = opts;
      o.on_epoch = [](int64_t e, double l) { log("prior epoch " + std::to_string(e) + fmt(" loss %.5f", l)); };
      pretrain_mae(prior, prior_records, o);
      save_mae(mae_path.string(), prior);
      std::ofstream(stamp_path) << stamp << "\n";
      log("prior pretraining took " + fmt("%.0f s", seconds_since(t0)));
    }
    prior_snapshot = prior.clone();
    train_set = prepare_set(prior, train_records);
    val_set = prepare_set(prior, val_records);
  }

  // Main 200/50 run with every component enabled.
  LoopModel& main() {
    if (!main_model) {
      log("main run: " + std::to_string(kMainEpochs) + " epochs");
      const auto t0 = Clock::now();
      main_model.emplace(prior, DssnConfig{}, PromptEncoderConfig{}, AblationFlags{}, 1);
      TrainHooks hooks;
      hooks.on_epoch = [](const EpochLog& e) {
        log("main epoch " + std::to_string(e.epoch) + fmt(" l_total %.4f", e.l_total) +
            fmt(" val_iou_crs %.4f", e.val_iou_crs) + fmt(" val_iou_ref %.4f", e.val_iou_ref));
      };
      main_result = train(*main_model, train_set, val_set, main_config(AblationFlags{}, 1), hooks);
      main_seconds = seconds_since(t0);
      std::ofstream csv(cache / "main_train_log.csv");
      write_train_log_csv(csv, main_result.log);
    }
    return *main_model;
  }
};

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ---- independent oracles ----

double oracle_bce(const std::vector<double>& p, const std::vector<double>& t) {
  double s = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    const double q = std::clamp(p[i], kProbEps, 1.0 - kProbEps);
    s -= t[i] * std::log(q) + (1.0 - t[i]) * std::log(1.0 - q);
  }
  return s / static_cast<double>(p.size());
}

double oracle_dice(const std::vector<double>& p, const std::vector<double>& t) {
  double inter = 0.0, sp = 0.0, st = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    inter += p[i] * t[i];
    sp += p[i];
    st += t[i];
  }
  return 1.0 - (2.0 * inter + kDiceSmooth) / (sp + st + kDiceSmooth);
}

struct Counts {
  int64_t tp = 0, fp = 0, fn = 0;
};

Counts count_pixels(const float* pred, const float* target, int64_t n) {
  Counts c;
  for (int64_t i = 0; i < n; ++i) {
    const bool p = pred[i] >= 0.5f;
    const bool t = target[i] >= 0.5f;
    c.tp += p && t;
    c.fp += p && !t;
    c.fn += !p && t;
  }
  return c;
}

// Mean channel-averaged residual inside / outside the mask.
double in_out_ratio(const Tensor& residual, const Tensor& masks, int64_t image) {
  const int64_t c = residual.dim(1);
  const int64_t hw = residual.dim(2) * residual.dim(3);
  double in = 0.0, out = 0.0;
  int64_t n_in = 0, n_out = 0;
  for (int64_t j = 0; j < hw; ++j) {
    double r = 0.0;
    for (int64_t ch = 0; ch < c; ++ch) r += residual[(image * c + ch) * hw + j];
    if (masks[image * hw + j] >= 0.5f) {
      in += r;
      ++n_in;
    } else {
      out += r;
      ++n_out;
    }
  }
  if (n_in == 0 || n_out == 0) return 1.0;
  return (in / static_cast<double>(n_in)) / std::max(out / static_cast<double>(n_out), 1e-12);
}

// ---- criteria ----

Outcome identity_at_init(Context& ctx) {
  const auto t0 = Clock::now();
  const LoopModel model(ctx.prior, DssnConfig{}, PromptEncoderConfig{}, AblationFlags{}, 7);
  NoGradGuard no_grad;
  const PreparedSet part = ctx.val_set.subset({0, 1, 2, 3, 4, 5, 6, 7});
  const ForwardTrace t = forward_two_stage(model, part.images, part.s1);
  const bool residual_equal = t.has_stage2 && t.residual_s2.value() == t.residual_s1;
  const bool mask_equal = t.m_ref.value() == t.m_crs.value();
  const double secs = seconds_since(t0);
  return {residual_equal && mask_equal && secs < 10.0,
          std::string("residual_s2==residual_s1 ") + (residual_equal ? "yes" : "no") +
              ", m_ref==m_crs " + (mask_equal ? "yes" : "no") + fmt(", %.2f s", secs)};
}

Outcome frozen_prior(Context& ctx) {
  LoopModel& model = ctx.main();
  const bool enc = params_checksum(model.mae.encoder_params()) ==
                   params_checksum(ctx.prior_snapshot.encoder_params());
  const bool dec = params_checksum(model.mae.decoder_params()) ==
                   params_checksum(ctx.prior_snapshot.decoder_params());
  const bool full = static_cast<int64_t>(ctx.main_result.log.size()) == kMainEpochs;
  return {enc && dec && full, std::to_string(ctx.main_result.log.size()) + " epochs, encoder " +
                                  (enc ? "unchanged" : "CHANGED") + ", stage-1 decoder " +
                                  (dec ? "unchanged" : "CHANGED")};
}

Outcome gradients(Context& ctx) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst_bce = 0.0, worst_dice = 0.0;
  auto rel = [](double a, double b) {
    const double s = std::max(std::fabs(a), std::fabs(b));
    return s == 0.0 ? 0.0 : std::fabs(a - b) / s;
  };
  for (int inst = 0; inst < 20; ++inst) {
    std::vector<double> p(64), t(64);
    for (int i = 0; i < 64; ++i) {
      p[i] = 0.02 + 0.96 * unit(rng);
      t[i] = unit(rng) < 0.4 ? 1.0 : 0.0;
    }
    std::vector<double> gb(64), gd(64);
    bce_grad<double>(p, t, gb);
    dice_grad<double>(p, t, 1, gd);
    for (int i = 0; i < 64; ++i) {
      auto hi = p, lo = p;
      hi[i] += kFdStep;
      lo[i] -= kFdStep;
      worst_bce = std::max(worst_bce, rel(gb[i], (oracle_bce(hi, t) - oracle_bce(lo, t)) / (2 * kFdStep)));
      worst_dice = std::max(worst_dice, rel(gd[i], (oracle_dice(hi, t) - oracle_dice(lo, t)) / (2 * kFdStep)));
    }
  }
  const bool fd_ok = worst_bce < kFdRelTol && worst_dice < kFdRelTol;

  // End to end: two optimizer steps move every zero-initialized map off zero,
  // then one more backward pass is inspected group by group.
  LoopModel model(ctx.prior, DssnConfig{}, PromptEncoderConfig{}, AblationFlags{}, 3);
  const PreparedSet batch = ctx.train_set.subset({0, 1, 2, 3});
  AdamWOptions o;
  o.lr = 1e-3;
  AdamW opt(model.trainable_params(), o);
  auto step = [&] {
    opt.zero_grad();
    const ForwardTrace t = forward_two_stage(model, batch.images, batch.s1);
    backward(add_scaled(stage_loss(t.m_ref, batch.masks), stage_loss(t.m_crs, batch.masks), 0.5f));
  };
  step();
  opt.step();
  step();
  opt.step();
  step();
  // Groups are the first two name components, e.g. "dssn.fusion", "tapi.film".
  std::map<std::string, double> norms;
  for (const auto& p : model.params()) {
    const std::string group = p.name.substr(0, p.name.find('.', p.name.find('.') + 1));
    double sq = 0.0;
    if (p.var.has_grad()) {
      for (float g : p.var.grad().values()) sq += static_cast<double>(g) * g;
    }
    norms[(p.var.requires_grad() ? "" : "frozen:") + group] += sq;
  }
  bool groups_ok = true;
  std::string detail;
  for (const auto& [g, sq] : norms) {
    const bool frozen = g.starts_with("frozen:");
    const bool ok = frozen ? sq == 0.0 : sq > 0.0;
    groups_ok = groups_ok && ok;
    detail += " " + g + (ok ? "" : "!") + fmt("=%.2e", std::sqrt(sq));
  }
  const double secs = seconds_since(t0);
  return {fd_ok && groups_ok && secs < 30.0,
          fmt("bce rel err %.2e", worst_bce) + fmt(", dice rel err %.2e", worst_dice) + ";" + detail +
              fmt("; %.1f s", secs)};
}

Outcome metric_oracle(Context&) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  int mismatches = 0, identity_failures = 0, empty_cases = 0;
  const int64_t n = 100, hw = 32 * 32;
  Tensor pred({n, 1, 32, 32}), target({n, 1, 32, 32});
  for (int64_t i = 0; i < n; ++i) {
    const float dp = i % 10 == 0 ? 0.0f : unit(rng);
    const float dt = i % 10 == 0 || i % 17 == 0 ? 0.0f : unit(rng);
    for (int64_t j = 0; j < hw; ++j) {
      pred[i * hw + j] = unit(rng) < dp ? unit(rng) * 0.5f + 0.5f : unit(rng) * 0.4999f;
      target[i * hw + j] = unit(rng) < dt ? 1.0f : 0.0f;
    }
  }
  std::vector<std::string> ids;
  for (int64_t i = 0; i < n; ++i) ids.push_back("m" + std::to_string(i));
  const MetricReport r = iou_f1(pred, target, 0.5, ids);
  double sum_iou = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const Counts c = count_pixels(pred.data() + i * hw, target.data() + i * hw, hw);
    const int64_t denom = c.tp + c.fp + c.fn;
    double iou = 1.0, f1 = 1.0;
    if (denom > 0) {
      iou = static_cast<double>(c.tp) / static_cast<double>(denom);
      f1 = 2.0 * static_cast<double>(c.tp) / static_cast<double>(2 * c.tp + c.fp + c.fn);
    } else {
      ++empty_cases;
    }
    sum_iou += iou;
    const ImageScore& s = r.per_image[static_cast<size_t>(i)];
    if (s.iou != iou || s.f1 != f1 || s.image_id != ids[static_cast<size_t>(i)]) ++mismatches;
    if (std::fabs(s.f1 - 2.0 * s.iou / (1.0 + s.iou)) > 1e-12) ++identity_failures;
  }
  if (r.iou != sum_iou / n) ++mismatches;
  const double secs = seconds_since(t0);
  return {mismatches == 0 && identity_failures == 0 && empty_cases > 0 && secs < 10.0,
          std::to_string(mismatches) + " mismatches, " + std::to_string(identity_failures) +
              " F1/IoU identity failures, " + std::to_string(empty_cases) + " empty/empty pairs" +
              fmt(", %.2f s", secs)};
}

Outcome desk_learning(Context& ctx) {
  LoopModel& model = ctx.main();
  const double val_iou = evaluate(model, ctx.val_set).refined.iou;
  const bool main_ok = val_iou >= kValIouTarget;

  const auto t0 = Clock::now();
  std::vector<int64_t> rows(kOverfitImages);
  for (int64_t i = 0; i < kOverfitImages; ++i) rows[static_cast<size_t>(i)] = i;
  const PreparedSet small = ctx.train_set.subset(rows);
  LoopModel over(ctx.prior, DssnConfig{}, PromptEncoderConfig{}, AblationFlags{}, 2);
  TrainConfig c = main_config(AblationFlags{}, 2);
  c.max_epochs = kOverfitMaxEpochs;
  c.patience = kOverfitMaxEpochs - 1;
  int64_t reached = -1;
  double best_train_iou = 0.0;
  TrainHooks hooks;
  // Validation on the training images themselves; stop once the target is met.
  struct Reached {};
  hooks.on_epoch = [&](const EpochLog& e) {
    best_train_iou = std::max(best_train_iou, e.val_iou_ref);
    if (e.epoch % 25 == 0) log("overfit epoch " + std::to_string(e.epoch) + fmt(" train_iou %.4f", e.val_iou_ref));
    if (e.val_iou_ref >= kOverfitIouTarget) {
      reached = e.epoch;
      throw Reached{};
    }
  };
  try {
    train(over, small, small, c, hooks);
  } catch (const Reached&) {
  }
  const double overfit_secs = seconds_since(t0);
  const double total = ctx.main_seconds + overfit_secs;
  const bool over_ok = reached >= 0;
  return {main_ok && over_ok && total <= 30 * 60.0,
          fmt("val refined IoU %.4f", val_iou) + fmt(" (target %.2f)", kValIouTarget) +
              "; overfit " + (over_ok ? "reached " + fmt("%.2f", kOverfitIouTarget) + " at epoch " + std::to_string(reached)
                                      : "best train IoU " + fmt("%.4f", best_train_iou)) +
              fmt("; main %.0f s", ctx.main_seconds) + fmt(" + overfit %.0f s", overfit_secs)};
}

Outcome ablation(Context& ctx) {
  AblationOptions opts;
  opts.train = main_config(AblationFlags{}, 0);
  opts.train.max_epochs = kAblationEpochs;
  opts.train.patience = kAblationEpochs - 1;
  opts.seeds = {1, 2, 3};
  opts.on_run = [](const AblationRow& row, uint64_t seed, const TrainResult& r) {
    log("ablation row " + row.index + " seed " + std::to_string(seed) +
        fmt(" val_iou_ref %.4f", row.val_iou_ref.back()) + " best epoch " + std::to_string(r.best_epoch));
  };
  const auto rows = run_ablation(ctx.prior, ctx.train_set, ctx.val_set, opts);
  std::ofstream csv(ctx.cache / "ablation.csv");
  write_ablation_csv(csv, rows);
  bool ok = true;
  std::string detail;
  for (size_t i = 0; i < rows.size(); ++i) {
    detail += (i ? ", " : "") + rows[i].index + fmt("=%.4f", rows[i].mean_iou_ref());
    if (i > 0) ok = ok && rows[i].mean_iou_ref() - rows[i - 1].mean_iou_ref() >= kAblationGapTol;
  }
  return {ok, detail + " (mean val refined IoU over 3 seeds)"};
}

Outcome amplification(Context& ctx) {
  LoopModel& model = ctx.main();
  NoGradGuard no_grad;
  int64_t forged = 0, amplified = 0;
  double sum_s1 = 0.0, sum_s2 = 0.0;
  for (int64_t b = 0; b < ctx.val_set.size(); b += 16) {
    std::vector<int64_t> rows;
    for (int64_t i = b; i < std::min(ctx.val_set.size(), b + 16); ++i) rows.push_back(i);
    const PreparedSet part = ctx.val_set.subset(rows);
    const ForwardTrace t = forward_two_stage(model, part.images, part.s1);
    for (int64_t i = 0; i < part.size(); ++i) {
      if (ctx.val_records[static_cast<size_t>(rows[static_cast<size_t>(i)])].kind == ForgeryKind::kNone) continue;
      ++forged;
      const double r1 = in_out_ratio(t.residual_s1, part.masks, i);
      const double r2 = in_out_ratio(t.residual_s2.value(), part.masks, i);
      sum_s1 += r1;
      sum_s2 += r2;
      amplified += r2 > r1;
    }
  }
  const double frac = forged ? static_cast<double>(amplified) / static_cast<double>(forged) : 0.0;
  return {frac >= kAmplifyFraction, std::to_string(amplified) + "/" + std::to_string(forged) +
                                        fmt(" forged val images amplified (%.2f,", frac) +
                                        fmt(" need %.2f)", kAmplifyFraction) +
                                        fmt("; mean in/out ratio stage 1 %.3f,", sum_s1 / std::max<int64_t>(forged, 1)) +
                                        fmt(" stage 2 %.3f", sum_s2 / std::max<int64_t>(forged, 1))};
}

Outcome robustness(Context& ctx) {
  LoopModel& model = ctx.main();
  const double clean_f1 = evaluate(model, ctx.val_set).refined.f1;
  const RobustnessReport rep =
      robustness_sweep(model, ctx.val_records, {default_jpeg_spec(), default_blur_spec()});
  std::ofstream csv(ctx.cache / "robustness.csv");
  write_robustness_csv(csv, rep);
  std::ofstream svg(ctx.cache / "robustness_f1.svg");
  write_robustness_svg(svg, rep);
  bool ok = true;
  std::string detail;
  for (PerturbKind kind : {PerturbKind::kJpeg, PerturbKind::kBlur}) {
    std::vector<const RobustnessRow*> rows;
    for (const auto& r : rep.rows) {
      if (r.kind == kind) rows.push_back(&r);
    }
    // Rows are ordered from mildest to strongest.
    bool monotone = true;
    for (size_t i = 1; i < rows.size(); ++i) {
      monotone = monotone && rows[i]->mean_f1 <= rows[i - 1]->mean_f1 + kRobustNoise;
    }
    const bool identity = std::fabs(rows.front()->mean_f1 - clean_f1) <= kRobustIdentityTol;
    ok = ok && monotone && identity;
    detail += to_string(kind) + ":";
    for (const auto* r : rows) detail += fmt(" %.3f", r->mean_f1);
    detail += std::string(monotone ? "" : " NOT-MONOTONE") + (identity ? "" : " IDENTITY-OFF") + "; ";
  }
  return {ok, detail + fmt("clean F1 %.3f", clean_f1)};
}

Outcome determinism(Context& ctx) {
  // Seeded runs: two fresh single-epoch runs on a 32-image subset.
  std::vector<int64_t> rows;
  for (int64_t i = 0; i < 32; ++i) rows.push_back(i);
  const PreparedSet sub = ctx.train_set.subset(rows);
  const PreparedSet val = ctx.val_set.subset({0, 1, 2, 3, 4, 5, 6, 7});
  std::vector<EpochLog> first;
  for (int r = 0; r < 2; ++r) {
    LoopModel m(ctx.prior, DssnConfig{}, PromptEncoderConfig{}, AblationFlags{}, 5);
    TrainConfig c = main_config(AblationFlags{}, 5);
    c.max_epochs = 2;
    c.patience = 1;
    first.push_back(train(m, sub, val, c).log.front());
  }
  const bool losses_equal = first[0].l_crs == first[1].l_crs && first[0].l_ref == first[1].l_ref &&
                            first[0].l_total == first[1].l_total;

  // Checkpoint round trip of the main model.
  LoopModel& model = ctx.main();
  const fs::path ckpt = ctx.cache / "main.ckpt";
  save_model(ckpt.string(), model, main_config(AblationFlags{}, 1));
  const LoopModel back = load_model(ckpt.string());
  const EvalReport a = evaluate(model, ctx.val_set);
  const EvalReport b = evaluate(back, ctx.val_set);
  bool metrics_equal = a.refined.iou == b.refined.iou && a.refined.f1 == b.refined.f1 &&
                       a.coarse.iou == b.coarse.iou && a.coarse.f1 == b.coarse.f1;
  for (size_t i = 0; i < a.refined.per_image.size(); ++i) {
    metrics_equal = metrics_equal && a.refined.per_image[i].iou == b.refined.per_image[i].iou;
  }

  // Dataset write -> load.
  DatasetSpec spec;
  spec.seed = 99;
  spec.n_train = 6;
  spec.n_val = 3;
  spec.n_test = 3;
  const auto records = generate_dataset(spec);
  const fs::path dir = ctx.cache / "roundtrip";
  fs::remove_all(dir);
  write_dataset(records, (dir / "manifest.json").string());
  const auto loaded = load_dataset((dir / "manifest.json").string());
  bool data_equal = loaded.size() == records.size();
  for (size_t i = 0; data_equal && i < records.size(); ++i) {
    const auto& x = records[i].record;
    const auto& y = loaded[i];
    data_equal = x.id == y.id && x.image == y.image && x.mask == y.mask && x.kind == y.kind &&
                 x.source_seed == y.source_seed && x.forge_seed == y.forge_seed;
  }
  fs::remove_all(dir);
  return {losses_equal && metrics_equal && data_equal,
          std::string("epoch-0 losses ") + (losses_equal ? "identical" : "DIFFER") +
              fmt(" (l_total %.6f)", first[0].l_total) + ", checkpoint metrics " +
              (metrics_equal ? "bit-identical" : "DIFFER") + ", dataset round trip " +
              (data_equal ? "lossless" : "LOSSY")};
}

}  // namespace

int main(int argc, char** argv) {
  Context ctx;
  ctx.cache = "acceptance_cache";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--cache" && i + 1 < argc) {
      ctx.cache = argv[++i];
    } else if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string tok; std::getline(ss, tok, ',');) only.insert(std::stoi(tok));
    } else {
      std::fprintf(stderr, "usage: acceptance [--cache DIR] [--only N,N,...]\n");
      return 2;
    }
  }

  const std::vector<std::pair<std::string, std::function<Outcome(Context&)>>> criteria = {
      {"identity at init", identity_at_init},
      {"frozen prior invariance", frozen_prior},
      {"gradient correctness", gradients},
      {"metric oracle equivalence", metric_oracle},
      {"desk-scale learning", desk_learning},
      {"ablation ordering", ablation},
      {"residual amplification", amplification},
      {"robustness degradation direction", robustness},
      {"determinism and persistence", determinism},
  };

  const auto t0 = Clock::now();
  ctx.load();
  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.contains(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  log(fmt("total %.0f s", seconds_since(t0)));
  return failures == 0 ? 0 : 1;
}
