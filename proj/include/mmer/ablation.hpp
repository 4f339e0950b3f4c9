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

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mmer/trainer.hpp"

namespace mmer {

struct AblationVariant {
  std::string name;
  AblationFlags flags;
};

// The eight configured variants, ending with the full model:
//   w/o AMR, psi=vtac, psi=atvc, w/o MTE, identical head, w/ LE,
//   w/ LE+LC, full
std::vector<AblationVariant> ablation_variants();

struct AblationRun {
  std::string variant;
  std::uint64_t seed = 0;
  std::size_t best_epoch = 0;
  MetricReport valid;
  MetricReport test;
};

struct AblationSummary {
  std::string variant;
  std::size_t runs = 0;
  // Medians over seeds.
  MetricReport valid;
  MetricReport test;
};

double median(std::vector<double> values);

// Trains every variant (base config with the variant's flags) once per seed.
template <typename T>
std::vector<AblationRun> run_ablation(const Dataset& data, const ModelConfig& base,
                                      std::span<const std::uint64_t> seeds,
                                      std::span<const AblationVariant> variants);

std::vector<AblationSummary> summarize(std::span<const AblationRun> runs);

// One line per run.
void write_ablation_runs(std::span<const AblationRun> runs, const std::filesystem::path& path);
// One line per variant with medians over seeds.
void write_ablation_summary(std::span<const AblationSummary> rows, const std::filesystem::path& path);

}  // namespace mmer
