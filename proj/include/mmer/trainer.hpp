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

// Objective, optimizer, schedule and the training loop.

#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "mmer/checkpoint.hpp"
#include "mmer/dataio.hpp"
#include "mmer/metrics.hpp"
#include "mmer/model.hpp"

namespace mmer {

// L_ml + alpha (L_C + L_P) + beta L_diff + gamma L_cml.
// disable_amr drops the alpha, beta and gamma terms; disable_diff and
// disable_cml drop one term each.
double total_loss(double ml, double common, double priv, double diff, double cml,
                  const ModelConfig& config);

template <typename T>
Tensor<T> total_loss(const Tensor<T>& ml, const Tensor<T>& common, const Tensor<T>& priv,
                     const Tensor<T>& diff, const Tensor<T>& cml, const ModelConfig& config);

// Linear ramp from 0 to base_lr over the first warmup_fraction * total_steps
// steps, then linear decay to 0 at total_steps.
double lr_at(std::size_t step, std::size_t total_steps, double base_lr, double warmup_fraction);

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Decoupled decay, scaled by the learning rate.
  double weight_decay = 0.0;
  // Global gradient-norm clip; 0 disables.
  double grad_clip = 0.0;
};

template <typename T>
class Adam {
 public:
  Adam(ParamList<T> params, AdamSettings settings = {});

  // Applies one update from the gradients currently held by the parameters.
  // Non-finite gradient -> NumericalError naming the parameter.
  void step(double lr);

  std::size_t steps() const { return steps_; }
  const ParamList<T>& params() const { return params_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

  void restore(std::size_t steps, std::vector<std::vector<double>> m,
               std::vector<std::vector<double>> v);

 private:
  ParamList<T> params_;
  AdamSettings settings_;
  std::size_t steps_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

template <typename T>
struct BatchLoss {
  Tensor<T> ml, common, priv, diff, cml, total;
  std::vector<Tensor<T>> probs;
};

struct LossValues {
  double ml = 0, common = 0, priv = 0, diff = 0, cml = 0, total = 0;
};

template <typename T>
LossValues loss_values(const BatchLoss<T>& loss);

// Forward pass over a batch and every loss component. With
// `reversal == false` the common-representation loss skips gradient
// reversal, which makes the composite gradient a true derivative (used by
// gradient checks).
template <typename T>
BatchLoss<T> batch_loss(const MultimodalModel<T>& model, std::span<const ModalityBundle> batch,
                        const RunMode& mode, bool reversal = true);

// Per-sample label probabilities in eval mode, row-major [n x labels].
template <typename T>
std::vector<double> predict(const MultimodalModel<T>& model, std::span<const ModalityBundle> samples);

LabelMatrix truth_matrix(std::span<const ModalityBundle> samples);

template <typename T>
MetricReport evaluate(const MultimodalModel<T>& model, std::span<const ModalityBundle> samples,
                      AccuracyMode accuracy = AccuracyMode::kJaccard);

// Mean discriminator output on common and private representations.
struct ProbeReport {
  // [modality][class]
  std::array<std::array<double, 3>, 3> common{};
  std::array<std::array<double, 3>, 3> priv{};
  // Per modality: fraction of samples whose time-averaged private
  // distribution ranks the true modality first.
  std::array<double, 3> private_accuracy{};
};

template <typename T>
ProbeReport probe_discriminator(const MultimodalModel<T>& model,
                                std::span<const ModalityBundle> samples);

// sum over samples and modalities of ||C^T P||_F^2 in eval mode.
template <typename T>
double orthogonality(const MultimodalModel<T>& model, std::span<const ModalityBundle> samples);

template <typename T>
Checkpoint capture(const MultimodalModel<T>& model, const Adam<T>* optimizer, std::size_t epoch,
                   const std::map<std::string, std::string>& rng = {});

// Copies parameter (and, when given, optimizer) state into place. Missing
// or mis-shaped blocks -> DataError(kShapeMismatch).
template <typename T>
void restore(const Checkpoint& checkpoint, MultimodalModel<T>& model, Adam<T>* optimizer = nullptr);

struct EpochRecord {
  std::size_t epoch = 0;
  LossValues loss;
  MetricReport valid;
  std::optional<MetricReport> train;
  double lr = 0;
};

struct TrainOptions {
  // Where train_log.csv, amr_probe.csv, best.ckpt and last.ckpt go. Empty
  // path writes nothing.
  std::filesystem::path out_dir;
  bool train_metrics = false;
  // Stop as soon as train micro-F1 reaches this value (needs train_metrics).
  std::optional<double> target_train_f1;
  // Validation samples used for the discriminator probe; 0 disables it.
  std::size_t probe_samples = 64;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_valid_f1 = -1;
  Checkpoint best;
  Checkpoint last;
};

// Mini-batch training with per-epoch validation. Model selection and early
// stopping (config.patience, 0 disables) follow validation micro-F1; `model`
// holds the best parameters on return. A non-finite loss throws
// NumericalError, leaving the last completed epoch's checkpoint on disk.
template <typename T>
TrainResult train(MultimodalModel<T>& model, const Dataset& data, const TrainOptions& options = {});

}  // namespace mmer
