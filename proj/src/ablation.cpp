// Copyright 2026 The mmer Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mmer/ablation.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>

#include "mmer/errors.hpp"

namespace mmer {

std::vector<AblationVariant> ablation_variants() {
  std::vector<AblationVariant> out;
  auto add = [&](std::string name, auto edit) {
    AblationFlags flags;
    edit(flags);
    out.push_back({std::move(name), flags});
  };
  add("w/o AMR", [](AblationFlags& f) { f.disable_amr = true; });
  add("psi=vtac", [](AblationFlags& f) { f.fusion_order = FusionOrder::parse("v,t,a,c"); });
  add("psi=atvc", [](AblationFlags& f) { f.fusion_order = FusionOrder::parse("a,t,v,c"); });
  add("w/o MTE", [](AblationFlags& f) { f.disable_token_embeddings = true; });
  add("identical head", [](AblationFlags& f) { f.identical_head = true; });
  add("w/ LE", [](AblationFlags& f) {
    f.disable_label_correlation = true;
    f.disable_label_modal_attention = true;
  });
  add("w/ LE+LC", [](AblationFlags& f) { f.disable_label_modal_attention = true; });
  add("full", [](AblationFlags&) {});
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ContractError("median: no values");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

template <typename T>
std::vector<AblationRun> run_ablation(const Dataset& data, const ModelConfig& base,
                                      std::span<const std::uint64_t> seeds,
                                      std::span<const AblationVariant> variants) {
  if (seeds.empty()) throw ContractError("run_ablation: no seeds");
  std::vector<AblationRun> runs;
  for (const auto& variant : variants) {
    for (auto seed : seeds) {
      ModelConfig config = base;
      config.ablation = variant.flags;
      config.seed = seed;
      MultimodalModel<T> model(config, data.manifest.shape());
      const auto result = train(model, data);
      AblationRun run;
      run.variant = variant.name;
      run.seed = seed;
      run.best_epoch = result.best_epoch;
      run.valid = evaluate(model, std::span<const ModalityBundle>(data.valid), config.accuracy);
      run.test = evaluate(model, std::span<const ModalityBundle>(data.test), config.accuracy);
      runs.push_back(run);
    }
  }
  return runs;
}

std::vector<AblationSummary> summarize(std::span<const AblationRun> runs) {
  std::vector<AblationSummary> out;
  for (const auto& run : runs) {
    if (std::none_of(out.begin(), out.end(), [&](const auto& s) { return s.variant == run.variant; })) {
      out.push_back({run.variant, 0, {}, {}});
    }
  }
  for (auto& s : out) {
    std::vector<double> cols[8];
    for (const auto& r : runs) {
      if (r.variant != s.variant) continue;
      ++s.runs;
      const double vals[8] = {r.valid.accuracy, r.valid.precision, r.valid.recall, r.valid.micro_f1,
                              r.test.accuracy,  r.test.precision,  r.test.recall,  r.test.micro_f1};
      for (int k = 0; k < 8; ++k) cols[k].push_back(vals[k]);
    }
    s.valid = {median(cols[0]), median(cols[1]), median(cols[2]), median(cols[3])};
    s.test = {median(cols[4]), median(cols[5]), median(cols[6]), median(cols[7])};
  }
  return out;
}

namespace {

std::ostream& operator<<(std::ostream& os, const MetricReport& m) {
  return os << m.accuracy << "," << m.precision << "," << m.recall << "," << m.micro_f1;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError(DataErrorKind::kIo, "cannot write " + path.string());
  out << std::setprecision(10);
  return out;
}

}  // namespace

void write_ablation_runs(std::span<const AblationRun> runs, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "variant,seed,best_epoch,val_acc,val_p,val_r,val_microf1,test_acc,test_p,test_r,test_microf1\n";
  for (const auto& r : runs) {
    out << r.variant << "," << r.seed << "," << r.best_epoch << "," << r.valid << "," << r.test << "\n";
  }
  if (!out) throw DataError(DataErrorKind::kIo, "failed writing " + path.string());
}

void write_ablation_summary(std::span<const AblationSummary> rows, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "variant,runs,val_acc,val_p,val_r,val_microf1,test_acc,test_p,test_r,test_microf1\n";
  for (const auto& s : rows) out << s.variant << "," << s.runs << "," << s.valid << "," << s.test << "\n";
  if (!out) throw DataError(DataErrorKind::kIo, "failed writing " + path.string());
}

template std::vector<AblationRun> run_ablation<float>(const Dataset&, const ModelConfig&,
                                                      std::span<const std::uint64_t>,
                                                      std::span<const AblationVariant>);
template std::vector<AblationRun> run_ablation<double>(const Dataset&, const ModelConfig&,
                                                       std::span<const std::uint64_t>,
                                                       std::span<const AblationVariant>);

}  // namespace mmer
