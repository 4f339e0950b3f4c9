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

// Multi-label evaluation.
//
//   example accuracy   mean_i |Y n P| / |Y u P|          (both empty -> 1)
//   example precision  mean_i |Y n P| / |P|              (P empty -> 1 if Y empty else 0)
//   example recall     mean_i |Y n P| / |Y|              (Y empty -> 1)
//   micro-F1           2TP / (2TP + FP + FN) over all cells (0/0 -> 0)
//
// Y is the true label set of a sample, P the predicted one.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mmer/config.hpp"

namespace mmer {

// n x l matrix of 0/1 decisions.
struct LabelMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> cells;

  LabelMatrix() = default;
  LabelMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), cells(r * c, 0) {}

  std::uint8_t at(std::size_t i, std::size_t j) const { return cells[i * cols + j]; }
  void set(std::size_t i, std::size_t j, bool v) { cells[i * cols + j] = v ? 1 : 0; }

  // p >= threshold -> 1.
  static LabelMatrix binarize(std::span<const double> probs, std::size_t rows, std::size_t cols,
                              double threshold = 0.5);
};

inline constexpr double kDecisionThreshold = 0.5;

double example_accuracy(const LabelMatrix& pred, const LabelMatrix& truth);
// Fraction of samples whose predicted set equals the true set exactly.
double subset_accuracy(const LabelMatrix& pred, const LabelMatrix& truth);

struct PrecisionRecall {
  double precision = 0;
  double recall = 0;
};

PrecisionRecall example_precision_recall(const LabelMatrix& pred, const LabelMatrix& truth);
double micro_f1(const LabelMatrix& pred, const LabelMatrix& truth);

struct MetricReport {
  double accuracy = 0;
  double precision = 0;
  double recall = 0;
  double micro_f1 = 0;
};

MetricReport evaluate_predictions(const LabelMatrix& pred, const LabelMatrix& truth,
                                  AccuracyMode accuracy = AccuracyMode::kJaccard);

}  // namespace mmer
