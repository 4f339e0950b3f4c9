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

// Command-line front end.
//
// Exit codes: 0 success, 1 usage error, 2 data or configuration error,
// 3 numerical failure (non-finite loss, failed gradient check).

#include <CLI11.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mmer/ablation.hpp"
#include "mmer/errors.hpp"
#include "mmer/gradcheck.hpp"
#include "mmer/labelhead.hpp"
#include "mmer/ops.hpp"
#include "mmer/trainer.hpp"

namespace fs = std::filesystem;
using namespace mmer;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

struct Globals {
  std::optional<std::uint64_t> seed;
  fs::path out_dir = ".";
  std::string precision = "f32";
};

std::array<std::size_t, 3> parse_triple(const std::string& flag, const std::string& text) {
  std::array<std::size_t, 3> out{};
  std::istringstream in(text);
  std::string part;
  std::size_t n = 0;
  while (std::getline(in, part, ',')) {
    if (n == 3) break;
    try {
      out[n++] = std::stoull(part);
    } catch (const std::exception&) {
      n = 4;
      break;
    }
  }
  if (n != 3) throw ConfigError(flag + ": expected three comma-separated integers, got '" + text + "'");
  return out;
}

ModelConfig resolve_config(const fs::path& path, const Globals& g) {
  ModelConfig config = load_config(path);
  if (g.seed) config.seed = *g.seed;
  config.validate();
  return config;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError(DataErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());
}

template <typename T>
MultimodalModel<T> model_from_checkpoint(const ModelConfig& config, const DatasetManifest& manifest,
                                         const fs::path& checkpoint) {
  MultimodalModel<T> model(config, manifest.shape());
  restore(Checkpoint::load(checkpoint), model);
  return model;
}

template <typename T>
int cmd_train(const Globals& g, const fs::path& config_path, const fs::path& manifest,
              bool train_metrics) {
  const auto config = resolve_config(config_path, g);
  const auto data = load_dataset(manifest);
  ensure_dir(g.out_dir);
  {
    std::ofstream out(g.out_dir / "config.cfg");
    out << to_text(config);
  }
  MultimodalModel<T> model(config, data.manifest.shape());
  TrainOptions options;
  options.out_dir = g.out_dir;
  options.train_metrics = train_metrics;
  options.on_epoch = [](const EpochRecord& r) {
    std::cout << "epoch " << r.epoch << " L_All=" << r.loss.total << " val_microf1=" << r.valid.micro_f1;
    if (r.train) std::cout << " train_microf1=" << r.train->micro_f1;
    std::cout << "\n";
  };
  const auto started = std::chrono::steady_clock::now();
  const auto result = train(model, data, options);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  std::cout << "best epoch " << result.best_epoch << " val_microf1=" << result.best_valid_f1 << " ("
            << std::fixed << std::setprecision(1) << seconds << " s)\n";
  return kExitOk;
}

template <typename T>
int cmd_eval(const Globals& g, const fs::path& config_path, const fs::path& manifest,
             const fs::path& checkpoint, const std::string& split) {
  const auto config = resolve_config(config_path, g);
  const auto handle = DatasetHandle::open(manifest);
  const auto samples = handle.read_all(split);
  const auto model = model_from_checkpoint<T>(config, handle.manifest(), checkpoint);
  const auto report = evaluate(model, std::span<const ModalityBundle>(samples), config.accuracy);
  ensure_dir(g.out_dir);
  const auto path = g.out_dir / ("eval_" + split + ".csv");
  std::ofstream out(path);
  if (!out) throw DataError(DataErrorKind::kIo, "cannot write " + path.string());
  out << "split,acc,p,r,microf1\n" << std::setprecision(10) << split << "," << report.accuracy << ","
      << report.precision << "," << report.recall << "," << report.micro_f1 << "\n";
  std::cout << split << ": acc=" << report.accuracy << " p=" << report.precision
            << " r=" << report.recall << " microf1=" << report.micro_f1 << "\n";
  return kExitOk;
}

template <typename T>
int cmd_ablate(const Globals& g, const fs::path& config_path, const fs::path& manifest,
               std::size_t seed_count) {
  const auto config = resolve_config(config_path, g);
  const auto data = load_dataset(manifest);
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < seed_count; ++i) seeds.push_back(config.seed + i);
  const auto variants = ablation_variants();
  const auto runs = run_ablation<T>(data, config, seeds, variants);
  const auto rows = summarize(runs);
  ensure_dir(g.out_dir);
  write_ablation_runs(runs, g.out_dir / "ablate_runs.csv");
  write_ablation_summary(rows, g.out_dir / "ablate.csv");
  for (const auto& r : rows) {
    std::cout << std::left << std::setw(16) << r.variant << " median val_microf1=" << r.valid.micro_f1
              << " test_microf1=" << r.test.micro_f1 << "\n";
  }
  return kExitOk;
}

template <typename T>
int cmd_export_correlations(const Globals& g, const fs::path& config_path, const fs::path& manifest,
                            const fs::path& checkpoint, bool raw) {
  const auto config = resolve_config(config_path, g);
  if (config.ablation.identical_head || config.ablation.disable_label_correlation) {
    throw ConfigError("export-correlations: the configured head has no label self-attention");
  }
  const auto m = read_manifest(manifest);
  const auto model = model_from_checkpoint<T>(config, m, checkpoint);
  const auto& decoder = model.decoder();
  const auto sa = decoder.label_self_attention(decoder.embeddings(), RunMode::eval());
  const auto written = export_correlations(std::span<const Tensor<T>>(sa.correlations),
                                           std::span<const std::string>(m.label_names),
                                           config.d_model / config.heads_label, g.out_dir, raw);
  for (const auto& p : written) std::cout << p.string() << "\n";
  return kExitOk;
}

template <typename T>
int cmd_export_embeddings(const Globals& g, const fs::path& config_path, const fs::path& manifest,
                          const fs::path& checkpoint, const std::string& split) {
  const auto config = resolve_config(config_path, g);
  const auto handle = DatasetHandle::open(manifest);
  const auto model = model_from_checkpoint<T>(config, handle.manifest(), checkpoint);
  ensure_dir(g.out_dir);
  const auto path = g.out_dir / ("embeddings_" + split + ".csv");
  std::ofstream out(path);
  if (!out) throw DataError(DataErrorKind::kIo, "cannot write " + path.string());
  out << "sample,rep_kind,modality,labels";
  for (std::size_t k = 0; k < config.d_model; ++k) out << ",f" << k;
  out << "\n" << std::setprecision(8);
  auto emit = [&](std::size_t i, const char* kind, std::size_t m, const std::string& labels,
                  const Tensor<T>& x) {
    const auto pooled = ops::mean(x, 1);
    out << i << "," << kind << "," << modality_name(kModalities[m]) << "," << labels;
    for (T v : pooled.values()) out << "," << v;
    out << "\n";
  };
  auto reader = handle.reader(split);
  std::size_t i = 0;
  while (auto sample = reader.next()) {
    std::string labels;
    for (float y : sample->labels) labels += y > 0.5f ? '1' : '0';
    const auto fwd = model.forward(to_tensors<T>(*sample), RunMode::eval());
    for (std::size_t m = 0; m < 3; ++m) {
      emit(i, "unimodal", m, labels, fwd.embeddings[m]);
      emit(i, "common", m, labels, fwd.reps.common[m]);
      emit(i, "private", m, labels, fwd.reps.priv[m]);
    }
    ++i;
  }
  std::cout << path.string() << " (" << i << " samples)\n";
  return kExitOk;
}

int cmd_grad_check(const Globals& g, double tolerance, std::size_t max_per_tensor) {
  GradCheckOptions options;
  options.seed = g.seed.value_or(0);
  bool ok = true;
  for (const auto& check : primitive_gradient_suite(options)) {
    const double err = check.report.max_rel_error();
    const bool pass = err < tolerance;
    ok = ok && pass;
    std::cout << (pass ? "PASS " : "FAIL ") << std::left << std::setw(22) << check.name
              << " max_rel_error=" << err << "\n";
  }
  options.max_per_tensor = max_per_tensor;
  const auto composite = composite_gradient_check(options);
  const double err = composite.max_rel_error();
  const bool pass = err < tolerance;
  ok = ok && pass;
  std::cout << (pass ? "PASS " : "FAIL ") << std::left << std::setw(22) << "composite_loss"
            << " max_rel_error=" << err << " over " << composite.checked() << " coordinates\n";
  return ok ? kExitOk : kExitNumerical;
}

int cmd_gen_synth(const Globals& g, SyntheticSpec spec, const std::string& dims,
                  const std::string& lengths) {
  if (g.seed) spec.seed = *g.seed;
  spec.dims = parse_triple("--dims", dims);
  spec.lengths = parse_triple("--lengths", lengths);
  const auto data = generate_synthetic(spec);
  write_dataset(data, g.out_dir);
  std::cout << (g.out_dir / "manifest.json").string() << "\n";
  return kExitOk;
}

template <typename F>
int dispatch(const std::string& precision, F&& body) {
  if (precision == "f64") return body(double{});
  return body(float{});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal multi-label emotion recognition: data, training and diagnostics"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Seed overriding the config or generator seed");
  app.add_option("--out-dir", g.out_dir, "Directory for all outputs")->capture_default_str();
  app.add_option("--precision", g.precision, "Floating-point precision")
      ->check(CLI::IsMember({"f32", "f64"}))
      ->capture_default_str();

  fs::path config_path, manifest, checkpoint;
  std::string split = "test";

  SyntheticSpec spec;
  std::string dims = "8,8,12", lengths = "10,10,10";
  bool unaligned = false;
  auto* gen = app.add_subcommand("gen-synth", "Write a seeded synthetic dataset into --out-dir");
  gen->add_flag("--unaligned", unaligned, "Variable-length sequences up to --lengths");
  gen->add_option("--dims", dims, "Feature dims v,a,t")->capture_default_str();
  gen->add_option("--lengths", lengths, "Sequence lengths v,a,t")->capture_default_str();
  gen->add_option("--n-train", spec.n_train)->capture_default_str();
  gen->add_option("--n-valid", spec.n_valid)->capture_default_str();
  gen->add_option("--n-test", spec.n_test)->capture_default_str();
  gen->add_option("--noise", spec.noise, "Gaussian noise scale")->capture_default_str();
  gen->add_option("--amplitude", spec.amplitude, "Label pattern amplitude")->capture_default_str();
  gen->add_option("--name", spec.name)->capture_default_str();

  auto add_model_inputs = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Config file (key = value)")->required()->check(CLI::ExistingFile);
    sub->add_option("--manifest", manifest, "Dataset manifest.json")->required();
  };
  auto add_checkpoint = [&](CLI::App* sub) {
    sub->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  };

  bool train_metrics = false;
  auto* train_cmd = app.add_subcommand("train", "Train and write logs and checkpoints to --out-dir");
  add_model_inputs(train_cmd);
  train_cmd->add_flag("--train-metrics", train_metrics, "Also evaluate the train split each epoch");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on one split");
  add_model_inputs(eval_cmd);
  add_checkpoint(eval_cmd);
  eval_cmd->add_option("--split", split)->capture_default_str();

  std::size_t seed_count = 5;
  auto* ablate_cmd = app.add_subcommand("ablate", "Train every ablation variant over several seeds");
  add_model_inputs(ablate_cmd);
  ablate_cmd->add_option("--seeds", seed_count, "Number of consecutive seeds")->capture_default_str();

  bool raw = false;
  auto* corr_cmd = app.add_subcommand("export-correlations", "Write label correlation matrices per head");
  add_model_inputs(corr_cmd);
  add_checkpoint(corr_cmd);
  corr_cmd->add_flag("--raw", raw, "Write pre-softmax scores instead of row-softmax probabilities");

  auto* emb_cmd = app.add_subcommand("export-embeddings", "Write time-averaged representations");
  add_model_inputs(emb_cmd);
  add_checkpoint(emb_cmd);
  emb_cmd->add_option("--split", split)->capture_default_str();

  double tolerance = 1e-4;
  std::size_t max_per_tensor = 0;
  auto* grad_cmd = app.add_subcommand("grad-check", "Finite-difference gradient checks");
  grad_cmd->add_option("--tolerance", tolerance, "Maximum relative error")->capture_default_str();
  grad_cmd->add_option("--max-per-tensor", max_per_tensor,
                       "Coordinates per parameter in the composite check (0 = all)")
      ->capture_default_str();

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (*seed_opt) g.seed = seed;

  try {
    if (*gen) {
      spec.aligned = !unaligned;
      return cmd_gen_synth(g, spec, dims, lengths);
    }
    if (*train_cmd) {
      return dispatch(g.precision, [&](auto tag) {
        return cmd_train<decltype(tag)>(g, config_path, manifest, train_metrics);
      });
    }
    if (*eval_cmd) {
      return dispatch(g.precision, [&](auto tag) {
        return cmd_eval<decltype(tag)>(g, config_path, manifest, checkpoint, split);
      });
    }
    if (*ablate_cmd) {
      return dispatch(g.precision, [&](auto tag) {
        return cmd_ablate<decltype(tag)>(g, config_path, manifest, seed_count);
      });
    }
    if (*corr_cmd) {
      return dispatch(g.precision, [&](auto tag) {
        return cmd_export_correlations<decltype(tag)>(g, config_path, manifest, checkpoint, raw);
      });
    }
    if (*emb_cmd) {
      return dispatch(g.precision, [&](auto tag) {
        return cmd_export_embeddings<decltype(tag)>(g, config_path, manifest, checkpoint, split);
      });
    }
    if (*grad_cmd) return cmd_grad_check(g, tolerance, max_per_tensor);
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitData;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
