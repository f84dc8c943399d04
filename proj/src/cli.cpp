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

#include "rloop/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>

#include "CLI11.hpp"
#include "rloop/ablation.hpp"
#include "rloop/config.hpp"
#include "rloop/errors.hpp"

namespace rloop {
namespace {

namespace fs = std::filesystem;

struct Common {
  std::string config_path;
  std::optional<uint64_t> seed;
};

RunConfig resolve_config(const Common& common) {
  RunConfig cfg = common.config_path.empty() ? RunConfig{} : load_run_config(common.config_path);
  if (common.seed) {
    cfg.data.seed = *common.seed;
    cfg.pretrain.seed = *common.seed;
    cfg.train.seed = *common.seed;
  }
  return cfg;
}

std::string manifest_path(const std::string& data) {
  return fs::is_directory(data) ? (fs::path(data) / "manifest.json").string() : data;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw IngestionError(path.string(), "cannot open for writing");
  return os;
}

void add_common(CLI::App* sub, Common& common) {
  sub->add_option("--config", common.config_path, "JSON config file");
  sub->add_option("--seed", common.seed, "Seed for data, initialization and training order");
}

int gen_data(const Common& common, const std::string& out_dir, std::ostream& out) {
  const RunConfig cfg = resolve_config(common);
  const auto records = generate_dataset(cfg.data);
  write_dataset(records, (fs::path(out_dir) / "manifest.json").string());
  const auto prior = generate_prior_set(cfg.data.seed, cfg.n_prior, cfg.data.resolution);
  write_dataset(prior, (fs::path(out_dir) / "prior" / "manifest.json").string());
  out << "wrote " << records.size() << " records and " << prior.size() << " prior images to "
      << out_dir << "\n";
  return 0;
}

int pretrain(const Common& common, const std::string& data, const std::string& out_path,
             std::ostream& out) {
  RunConfig cfg = resolve_config(common);
  const fs::path prior_manifest =
      fs::is_directory(data) ? fs::path(data) / "prior" / "manifest.json" : fs::path(data);
  const auto records = load_dataset(prior_manifest.string(), Split::kPrior);
  Rng rng(cfg.pretrain.seed);
  Mae mae(cfg.mae, rng);
  cfg.pretrain.on_epoch = [&out](int64_t epoch, double loss) {
    out << "epoch " << epoch << " loss " << loss << "\n" << std::flush;
  };
  pretrain_mae(mae, records, cfg.pretrain);
  save_mae(out_path, mae);
  out << "saved " << out_path << "\n";
  return 0;
}

int train_cmd(const Common& common, const std::string& data, const std::string& mae_path,
              const std::string& out_dir, std::ostream& out) {
  const RunConfig cfg = resolve_config(common);
  const Mae prior = load_mae(mae_path);
  const std::string manifest = manifest_path(data);
  const PreparedSet train_set = prepare_set(prior, load_dataset(manifest, Split::kTrain));
  const PreparedSet val_set = prepare_set(prior, load_dataset(manifest, Split::kVal));
  LoopModel model(prior, cfg.dssn, cfg.prompt, cfg.train.flags, cfg.train.seed);
  fs::create_directories(out_dir);
  TrainHooks hooks;
  hooks.checkpoint_path = (fs::path(out_dir) / "model.ckpt").string();
  hooks.on_epoch = [&out](const EpochLog& e) {
    out << "epoch " << e.epoch << " l_total " << e.l_total << " val_iou_crs " << e.val_iou_crs
        << " val_iou_ref " << e.val_iou_ref << "\n"
        << std::flush;
  };
  const TrainResult result = train(model, train_set, val_set, cfg.train, hooks);
  auto log = open_out(fs::path(out_dir) / "train_log.csv");
  write_train_log_csv(log, result.log);
  out << "best epoch " << result.best_epoch << " val_iou_ref " << result.best_val_iou << "\n";
  return 0;
}

std::optional<Split> parse_split(const std::string& name) {
  if (name == "all") return std::nullopt;
  return split_from_string(name);
}

int eval_cmd(const std::string& data, const std::string& ckpt, const std::string& split,
             const std::string& out_path, std::ostream& out) {
  const LoopModel model = load_model(ckpt);
  const auto records = load_dataset(manifest_path(data), parse_split(split));
  const EvalReport r = evaluate(model, prepare_set(model.mae, records));
  auto os = open_out(out_path);
  write_metrics_csv(os, r.coarse, "coarse", true);
  write_metrics_csv(os, r.refined, "refined", false);
  out << std::setprecision(4) << "n=" << records.size() << " coarse iou " << r.coarse.iou
      << " f1 " << r.coarse.f1 << " | refined iou " << r.refined.iou << " f1 " << r.refined.f1
      << "\n";
  return 0;
}

int robustness_cmd(const Common& common, const std::string& data, const std::string& ckpt,
                   const std::string& split, const std::string& out_dir, std::ostream& out) {
  const RunConfig cfg = resolve_config(common);
  const LoopModel model = load_model(ckpt);
  const auto records = load_dataset(manifest_path(data), parse_split(split));
  const RobustnessReport report = robustness_sweep(model, records, {cfg.jpeg, cfg.blur});
  auto csv = open_out(fs::path(out_dir) / "robustness.csv");
  write_robustness_csv(csv, report);
  auto svg = open_out(fs::path(out_dir) / "robustness_f1.svg");
  write_robustness_svg(svg, report);
  write_robustness_csv(out, report);
  return 0;
}

int ablate_cmd(const Common& common, const std::string& data, const std::string& mae_path,
               const std::string& out_dir, std::ostream& out) {
  const RunConfig cfg = resolve_config(common);
  const Mae prior = load_mae(mae_path);
  const std::string manifest = manifest_path(data);
  const PreparedSet train_set = prepare_set(prior, load_dataset(manifest, Split::kTrain));
  const PreparedSet val_set = prepare_set(prior, load_dataset(manifest, Split::kVal));
  AblationOptions opts;
  opts.train = cfg.train;
  if (cfg.ablation_epochs > 0) {
    opts.train.max_epochs = cfg.ablation_epochs;
    opts.train.patience = std::min(opts.train.patience, cfg.ablation_epochs - 1);
  }
  opts.dssn = cfg.dssn;
  opts.prompt = cfg.prompt;
  opts.seeds.clear();
  for (int64_t k = 0; k < cfg.ablation_seeds; ++k) opts.seeds.push_back(cfg.train.seed + k);
  opts.on_run = [&out](const AblationRow& row, uint64_t seed, const TrainResult& r) {
    out << "row " << row.index << " seed " << seed << " val_iou_ref " << row.val_iou_ref.back()
        << " (best epoch " << r.best_epoch << ")\n"
        << std::flush;
  };
  const auto rows = run_ablation(prior, train_set, val_set, opts);
  auto csv = open_out(fs::path(out_dir) / "ablation.csv");
  write_ablation_csv(csv, rows);
  write_ablation_csv(out, rows);
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Reconstruction-prior forgery localization toolkit", "rloop"};
  app.require_subcommand(1);
  Common common;
  std::string out_path, data, mae_path, ckpt, split = "test";

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic dataset and prior set");
  add_common(gen, common);
  gen->add_option("--out", out_path, "Output directory")->required();

  auto* pre = app.add_subcommand("pretrain-mae", "Pretrain the reconstruction prior");
  add_common(pre, common);
  pre->add_option("--data", data, "Dataset directory or prior manifest")->required();
  pre->add_option("--out", out_path, "Checkpoint to write")->required();

  auto* tr = app.add_subcommand("train", "Train the two-stage model");
  add_common(tr, common);
  tr->add_option("--data", data, "Dataset directory or manifest")->required();
  tr->add_option("--mae", mae_path, "Pretrained prior checkpoint")->required();
  tr->add_option("--out", out_path, "Output directory")->required();

  auto* ev = app.add_subcommand("eval", "Score a checkpoint, writing metrics.csv");
  add_common(ev, common);
  ev->add_option("--data", data, "Dataset directory or manifest")->required();
  ev->add_option("--checkpoint", ckpt, "Model checkpoint")->required();
  ev->add_option("--split", split, "train, val, test or all")->capture_default_str();
  ev->add_option("--out", out_path, "Metrics CSV to write")->required();

  auto* rb = app.add_subcommand("robustness", "JPEG and blur sweeps");
  add_common(rb, common);
  rb->add_option("--data", data, "Dataset directory or manifest")->required();
  rb->add_option("--checkpoint", ckpt, "Model checkpoint")->required();
  rb->add_option("--split", split, "train, val, test or all")->capture_default_str();
  rb->add_option("--out", out_path, "Output directory")->required();

  auto* ab = app.add_subcommand("ablate", "Train and score the four component rows");
  add_common(ab, common);
  ab->add_option("--data", data, "Dataset directory or manifest")->required();
  ab->add_option("--mae", mae_path, "Pretrained prior checkpoint")->required();
  ab->add_option("--out", out_path, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (gen->parsed()) return gen_data(common, out_path, out);
    if (pre->parsed()) return pretrain(common, data, out_path, out);
    if (tr->parsed()) return train_cmd(common, data, mae_path, out_path, out);
    if (ev->parsed()) return eval_cmd(data, ckpt, split, out_path, out);
    if (rb->parsed()) return robustness_cmd(common, data, ckpt, split, out_path, out);
    if (ab->parsed()) return ablate_cmd(common, data, mae_path, out_path, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace rloop
