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

#include "mmer/metrics.hpp"

#include "mmer/errors.hpp"

namespace mmer {

LabelMatrix LabelMatrix::binarize(std::span<const double> probs, std::size_t rows,
                                  std::size_t cols, double threshold) {
  if (probs.size() != rows * cols) {
    throw DimensionError("binarize: " + std::to_string(probs.size()) + " probabilities for " +
                         std::to_string(rows) + "x" + std::to_string(cols));
  }
  LabelMatrix m(rows, cols);
  for (std::size_t i = 0; i < probs.size(); ++i) m.cells[i] = probs[i] >= threshold ? 1 : 0;
  return m;
}

namespace {

void check(const LabelMatrix& pred, const LabelMatrix& truth) {
  if (pred.rows != truth.rows || pred.cols != truth.cols) {
    throw DimensionError("metrics: prediction [" + std::to_string(pred.rows) + "x" +
                         std::to_string(pred.cols) + "] vs truth [" +
                         std::to_string(truth.rows) + "x" + std::to_string(truth.cols) + "]");
  }
  if (pred.rows == 0 || pred.cols == 0) throw ContractError("metrics: empty batch");
  for (auto c : truth.cells)
    if (c > 1) throw ContractError("metrics: ground truth must be binary");
  for (auto c : pred.cells)
    if (c > 1) throw ContractError("metrics: predictions must be binary");
}

struct RowCounts {
  std::size_t inter = 0, pred = 0, truth = 0;
};

RowCounts row_counts(const LabelMatrix& pred, const LabelMatrix& truth, std::size_t i) {
  RowCounts c;
  for (std::size_t j = 0; j < pred.cols; ++j) {
    const bool p = pred.at(i, j), t = truth.at(i, j);
    c.inter += p && t;
    c.pred += p;
    c.truth += t;
  }
  return c;
}

}  // namespace

double example_accuracy(const LabelMatrix& pred, const LabelMatrix& truth) {
  check(pred, truth);
  double acc = 0;
  for (std::size_t i = 0; i < pred.rows; ++i) {
    const auto c = row_counts(pred, truth, i);
    const std::size_t uni = c.pred + c.truth - c.inter;
    acc += uni == 0 ? 1.0 : static_cast<double>(c.inter) / static_cast<double>(uni);
  }
  return acc / static_cast<double>(pred.rows);
}

double subset_accuracy(const LabelMatrix& pred, const LabelMatrix& truth) {
  check(pred, truth);
  std::size_t exact = 0;
  for (std::size_t i = 0; i < pred.rows; ++i) {
    const auto c = row_counts(pred, truth, i);
    exact += (c.inter == c.pred && c.inter == c.truth);
  }
  return static_cast<double>(exact) / static_cast<double>(pred.rows);
}

PrecisionRecall example_precision_recall(const LabelMatrix& pred, const LabelMatrix& truth) {
  check(pred, truth);
  PrecisionRecall pr;
  for (std::size_t i = 0; i < pred.rows; ++i) {
    const auto c = row_counts(pred, truth, i);
    pr.precision += c.pred == 0 ? (c.truth == 0 ? 1.0 : 0.0)
                                : static_cast<double>(c.inter) / static_cast<double>(c.pred);
    pr.recall += c.truth == 0 ? 1.0 : static_cast<double>(c.inter) / static_cast<double>(c.truth);
  }
  pr.precision /= static_cast<double>(pred.rows);
  pr.recall /= static_cast<double>(pred.rows);
  return pr;
}

double micro_f1(const LabelMatrix& pred, const LabelMatrix& truth) {
  check(pred, truth);
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t k = 0; k < pred.cells.size(); ++k) {
    const bool p = pred.cells[k], t = truth.cells[k];
    tp += p && t;
    fp += p && !t;
    fn += !p && t;
  }
  const std::size_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

MetricReport evaluate_predictions(const LabelMatrix& pred, const LabelMatrix& truth,
                                  AccuracyMode accuracy) {
  MetricReport r;
  r.accuracy = accuracy == AccuracyMode::kJaccard ? example_accuracy(pred, truth)
                                                  : subset_accuracy(pred, truth);
  const auto pr = example_precision_recall(pred, truth);
  r.precision = pr.precision;
  r.recall = pr.recall;
  r.micro_f1 = micro_f1(pred, truth);
  return r;
}

}  // namespace mmer
