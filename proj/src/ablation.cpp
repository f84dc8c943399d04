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

#include "rloop/ablation.hpp"

#include <numeric>
#include <ostream>

namespace rloop {
namespace {

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

AblationFlags make_flags(bool dual, bool tapi, bool adaptive) {
  AblationFlags f;
  f.use_dssn_dual = dual;
  f.use_tapi = tapi;
  f.use_adaptive_decoder = adaptive;
  return f;
}

}  // namespace

double AblationRow::mean_iou_ref() const { return mean(val_iou_ref); }
double AblationRow::mean_f1_ref() const { return mean(val_f1_ref); }
double AblationRow::mean_iou_crs() const { return mean(val_iou_crs); }

std::vector<AblationRow> ablation_rows() {
  return {{"I", make_flags(false, false, false), {}, {}, {}},
          {"II", make_flags(true, false, false), {}, {}, {}},
          {"III", make_flags(true, true, false), {}, {}, {}},
          {"IV", make_flags(true, true, true), {}, {}, {}}};
}

std::vector<AblationRow> run_ablation(const Mae& prior, const PreparedSet& train_set,
                                      const PreparedSet& val_set, const AblationOptions& options) {
  std::vector<AblationRow> rows = ablation_rows();
  for (auto& row : rows) {
    for (uint64_t seed : options.seeds) {
      TrainConfig tc = options.train;
      tc.flags = row.flags;
      tc.seed = seed;
      LoopModel model(prior, options.dssn, options.prompt, row.flags, seed);
      const TrainResult result = train(model, train_set, val_set, tc);
      const EvalReport eval = evaluate(model, val_set);
      row.val_iou_ref.push_back(eval.refined.iou);
      row.val_f1_ref.push_back(eval.refined.f1);
      row.val_iou_crs.push_back(eval.coarse.iou);
      if (options.on_run) options.on_run(row, seed, result);
    }
  }
  return rows;
}

void write_ablation_csv(std::ostream& os, const std::vector<AblationRow>& rows) {
  os << "index,use_dssn_dual,use_tapi,use_adaptive_decoder,n_seeds,val_iou_crs,val_iou_ref,"
        "val_f1_ref\n";
  os.precision(9);
  for (const auto& r : rows) {
    os << r.index << ',' << r.flags.use_dssn_dual << ',' << r.flags.use_tapi << ','
       << r.flags.use_adaptive_decoder << ',' << r.val_iou_ref.size() << ',' << r.mean_iou_crs()
       << ',' << r.mean_iou_ref() << ',' << r.mean_f1_ref() << '\n';
  }
}

}  // namespace rloop
