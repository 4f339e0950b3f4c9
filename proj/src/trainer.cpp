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

#include "mmer/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "mmer/errors.hpp"
#include "mmer/labelhead.hpp"
#include "mmer/ops.hpp"
#include "mmer/rng.hpp"

namespace mmer {

double total_loss(double ml, double common, double priv, double diff, double cml,
                  const ModelConfig& config) {
  double total = ml;
  if (config.ablation.disable_amr) return total;
  total += config.alpha * (common + priv);
  if (!config.ablation.disable_diff) total += config.beta * diff;
  if (!config.ablation.disable_cml) total += config.gamma * cml;
  return total;
}

template <typename T>
Tensor<T> total_loss(const Tensor<T>& ml, const Tensor<T>& common, const Tensor<T>& priv,
                     const Tensor<T>& diff, const Tensor<T>& cml, const ModelConfig& config) {
  Tensor<T> total = ml;
  if (config.ablation.disable_amr) return total;
  total = ops::add(total, ops::scale(ops::add(common, priv), static_cast<T>(config.alpha)));
  if (!config.ablation.disable_diff) total = ops::add(total, ops::scale(diff, static_cast<T>(config.beta)));
  if (!config.ablation.disable_cml) total = ops::add(total, ops::scale(cml, static_cast<T>(config.gamma)));
  return total;
}

double lr_at(std::size_t step, std::size_t total_steps, double base_lr, double warmup_fraction) {
  if (step > total_steps) {
    throw ContractError("lr_at: step " + std::to_string(step) + " beyond " + std::to_string(total_steps));
  }
  if (total_steps == 0) return 0.0;
  const double warmup = warmup_fraction * static_cast<double>(total_steps);
  const double s = static_cast<double>(step);
  if (s < warmup) return base_lr * s / warmup;
  const double remaining = static_cast<double>(total_steps) - warmup;
  if (remaining <= 0) return base_lr;
  return base_lr * (static_cast<double>(total_steps) - s) / remaining;
}

template <typename T>
Adam<T>::Adam(ParamList<T> params, AdamSettings settings)
    : params_(std::move(params)), settings_(settings) {
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

template <typename T>
void Adam<T>::step(double lr) {
  std::vector<std::vector<T>> grads;
  grads.reserve(params_.size());
  double norm_sq = 0;
  for (const auto& p : params_) {
    grads.push_back(p.tensor.grad());
    for (T g : grads.back()) {
      if (!std::isfinite(static_cast<double>(g))) {
        throw NumericalError("non-finite gradient in parameter " + p.name);
      }
      norm_sq += static_cast<double>(g) * static_cast<double>(g);
    }
  }
  double clip_scale = 1.0;
  if (settings_.grad_clip > 0) {
    const double norm = std::sqrt(norm_sq);
    if (norm > settings_.grad_clip) clip_scale = settings_.grad_clip / norm;
  }
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(settings_.beta1, t);
  const double c2 = 1.0 - std::pow(settings_.beta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto values = params_[i].tensor.mutable_values();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double g = static_cast<double>(grads[i][k]) * clip_scale;
      m[k] = settings_.beta1 * m[k] + (1.0 - settings_.beta1) * g;
      v[k] = settings_.beta2 * v[k] + (1.0 - settings_.beta2) * g * g;
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      double w = static_cast<double>(values[k]);
      w -= lr * m_hat / (std::sqrt(v_hat) + settings_.eps);
      if (settings_.weight_decay > 0) w -= lr * settings_.weight_decay * static_cast<double>(values[k]);
      values[k] = static_cast<T>(w);
    }
    params_[i].tensor.zero_grad();
  }
}

template <typename T>
void Adam<T>::restore(std::size_t steps, std::vector<std::vector<double>> m,
                      std::vector<std::vector<double>> v) {
  if (m.size() != params_.size() || v.size() != params_.size()) {
    throw ContractError("Adam::restore: moment count does not match parameter count");
  }
  steps_ = steps;
  m_ = std::move(m);
  v_ = std::move(v);
}

template <typename T>
LossValues loss_values(const BatchLoss<T>& loss) {
  return {static_cast<double>(loss.ml.item()),   static_cast<double>(loss.common.item()),
          static_cast<double>(loss.priv.item()), static_cast<double>(loss.diff.item()),
          static_cast<double>(loss.cml.item()),  static_cast<double>(loss.total.item())};
}

template <typename T>
BatchLoss<T> batch_loss(const MultimodalModel<T>& model, std::span<const ModalityBundle> batch,
                        const RunMode& mode, bool reversal) {
  if (batch.empty()) throw ContractError("batch_loss: empty batch");
  std::vector<RefinedRepresentations<T>> reps;
  std::vector<std::vector<float>> labels;
  BatchLoss<T> out;
  for (const auto& sample : batch) {
    auto fwd = model.forward(to_tensors<T>(sample), mode);
    out.probs.push_back(fwd.probs);
    reps.push_back(std::move(fwd.reps));
    labels.push_back(sample.labels);
  }
  const auto& refiner = model.refiner();
  const std::span<const RefinedRepresentations<T>> rep_span(reps);
  const std::span<const std::vector<float>> label_span(labels);
  out.ml = loss_ml(std::span<const Tensor<T>>(out.probs), label_span);
  out.common = loss_common(refiner.discriminator(), rep_span, reversal);
  out.priv = loss_private(refiner.discriminator(), rep_span);
  out.diff = loss_diff(rep_span, model.config().diff_sign);
  out.cml = loss_cml(refiner.semantic_head(), rep_span, label_span);
  out.total = total_loss(out.ml, out.common, out.priv, out.diff, out.cml, model.config());
  return out;
}

template <typename T>
std::vector<double> predict(const MultimodalModel<T>& model, std::span<const ModalityBundle> samples) {
  std::vector<double> out;
  out.reserve(samples.size() * model.shape().labels);
  for (const auto& s : samples) {
    const auto probs = model.forward(to_tensors<T>(s), RunMode::eval()).probs;
    for (T p : probs.values()) out.push_back(static_cast<double>(p));
  }
  return out;
}

LabelMatrix truth_matrix(std::span<const ModalityBundle> samples) {
  const std::size_t cols = samples.empty() ? 0 : samples.front().labels.size();
  LabelMatrix truth(samples.size(), cols);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].labels.size() != cols) throw DimensionError("truth_matrix: ragged label vectors");
    for (std::size_t j = 0; j < cols; ++j) truth.set(i, j, samples[i].labels[j] > 0.5f);
  }
  return truth;
}

template <typename T>
MetricReport evaluate(const MultimodalModel<T>& model, std::span<const ModalityBundle> samples,
                      AccuracyMode accuracy) {
  const auto probs = predict(model, samples);
  const auto pred = LabelMatrix::binarize(probs, samples.size(), model.shape().labels, kDecisionThreshold);
  return evaluate_predictions(pred, truth_matrix(samples), accuracy);
}

template <typename T>
ProbeReport probe_discriminator(const MultimodalModel<T>& model,
                                std::span<const ModalityBundle> samples) {
  if (samples.empty()) throw ContractError("probe_discriminator: no samples");
  ProbeReport report;
  const auto& disc = model.refiner().discriminator();
  auto time_mean = [](const Tensor<T>& probs) {
    std::array<double, 3> mean{};
    for (std::size_t t = 0; t < probs.rows(); ++t)
      for (std::size_t k = 0; k < 3; ++k) mean[k] += static_cast<double>(probs.at(t, k));
    for (auto& x : mean) x /= static_cast<double>(probs.rows());
    return mean;
  };
  for (const auto& s : samples) {
    const auto reps = model.forward(to_tensors<T>(s), RunMode::eval()).reps;
    for (std::size_t m = 0; m < 3; ++m) {
      const auto c = time_mean(disc(reps.common[m]));
      const auto p = time_mean(disc(reps.priv[m]));
      for (std::size_t k = 0; k < 3; ++k) {
        report.common[m][k] += c[k];
        report.priv[m][k] += p[k];
      }
      const auto best = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
      if (best == m) report.private_accuracy[m] += 1.0;
    }
  }
  const double n = static_cast<double>(samples.size());
  for (std::size_t m = 0; m < 3; ++m) {
    for (std::size_t k = 0; k < 3; ++k) {
      report.common[m][k] /= n;
      report.priv[m][k] /= n;
    }
    report.private_accuracy[m] /= n;
  }
  return report;
}

template <typename T>
double orthogonality(const MultimodalModel<T>& model, std::span<const ModalityBundle> samples) {
  double total = 0;
  for (const auto& s : samples) {
    const std::array<RefinedRepresentations<T>, 1> reps = {
        model.forward(to_tensors<T>(s), RunMode::eval()).reps};
    total += static_cast<double>(loss_diff(std::span<const RefinedRepresentations<T>>(reps),
                                           DiffSign::kPositive)
                                     .item());
  }
  return total;
}

template <typename T>
Checkpoint capture(const MultimodalModel<T>& model, const Adam<T>* optimizer, std::size_t epoch,
                   const std::map<std::string, std::string>& rng) {
  Checkpoint c;
  c.dtype = dtype_name<T>();
  c.epoch = epoch;
  c.step = optimizer ? optimizer->steps() : 0;
  c.rng = rng;
  const auto params = model.parameters();
  for (const auto& p : params) {
    c.blocks.push_back({p.name, BlockKind::kParam, p.tensor.shape(),
                        std::vector<double>(p.tensor.values().begin(), p.tensor.values().end())});
  }
  if (optimizer) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      c.blocks.push_back({params[i].name, BlockKind::kAdamFirst, params[i].tensor.shape(),
                          optimizer->first_moments()[i]});
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      c.blocks.push_back({params[i].name, BlockKind::kAdamSecond, params[i].tensor.shape(),
                          optimizer->second_moments()[i]});
    }
  }
  return c;
}

template <typename T>
void restore(const Checkpoint& checkpoint, MultimodalModel<T>& model, Adam<T>* optimizer) {
  auto fetch = [&](const NamedParam<T>& p, BlockKind kind) -> const CheckpointBlock& {
    const auto* b = checkpoint.find(p.name, kind);
    if (!b) throw DataError(DataErrorKind::kShapeMismatch, "checkpoint lacks block " + p.name);
    if (b->shape != p.tensor.shape()) {
      throw DataError(DataErrorKind::kShapeMismatch, "checkpoint block " + p.name + " has shape " +
                                                         shape_str(b->shape) + ", model expects " +
                                                         shape_str(p.tensor.shape()));
    }
    return *b;
  };
  auto params = model.parameters();
  for (auto& p : params) {
    const auto& b = fetch(p, BlockKind::kParam);
    auto dst = p.tensor.mutable_values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(b.values[i]);
  }
  if (optimizer) {
    std::vector<std::vector<double>> m, v;
    for (const auto& p : params) {
      m.push_back(fetch(p, BlockKind::kAdamFirst).values);
      v.push_back(fetch(p, BlockKind::kAdamSecond).values);
    }
    optimizer->restore(checkpoint.step, std::move(m), std::move(v));
  }
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path, const char* header) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError(DataErrorKind::kIo, "cannot write " + path.string());
  out << header << "\n" << std::setprecision(12);
  return out;
}

}  // namespace

template <typename T>
TrainResult train(MultimodalModel<T>& model, const Dataset& data, const TrainOptions& options) {
  const ModelConfig& config = model.config();
  if (data.train.empty()) throw DataError(DataErrorKind::kShapeMismatch, "train split is empty");
  if (data.valid.empty()) throw DataError(DataErrorKind::kShapeMismatch, "valid split is empty");

  const RngStreams streams(config.seed);
  auto shuffle_engine = streams.stream("shuffle");
  auto dropout_engine = streams.stream("dropout");
  AdamSettings settings;
  settings.weight_decay = config.weight_decay;
  settings.grad_clip = config.grad_clip;
  Adam<T> optimizer(model.parameters(), settings);
  for (const auto& p : optimizer.params()) p.tensor.node()->grad.clear();

  const std::size_t n = data.train.size();
  const std::size_t batches = (n + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = config.epochs * batches;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  const bool write = !options.out_dir.empty();
  std::ofstream log, probe_log;
  if (write) {
    std::error_code ec;
    std::filesystem::create_directories(options.out_dir, ec);
    log = open_csv(options.out_dir / "train_log.csv",
                   "epoch,L_ml,L_C,L_P,L_diff,L_cml,L_All,val_acc,val_p,val_r,val_microf1");
    if (options.probe_samples > 0) {
      probe_log = open_csv(options.out_dir / "amr_probe.csv",
                           "epoch,rep_kind,modality,p_visual,p_audio,p_text");
    }
  }
  const std::size_t probe_n = std::min(options.probe_samples, data.valid.size());
  const std::span<const ModalityBundle> probe_set(data.valid.data(), probe_n);

  TrainResult result;
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_engine);
    EpochRecord record;
    record.epoch = epoch;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t lo = b * config.batch_size;
      const std::size_t hi = std::min(n, lo + config.batch_size);
      std::vector<ModalityBundle> batch;
      batch.reserve(hi - lo);
      for (std::size_t i = lo; i < hi; ++i) batch.push_back(data.train[order[i]]);

      auto fail = [&](const std::string& what) {
        return NumericalError(what + " at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(b) + "; last good checkpoint is from epoch " +
                              std::to_string(result.last.epoch));
      };
      Tape<T> tape;
      const RunMode mode{true, config.dropout, &dropout_engine};
      LossValues values;
      try {
        const auto loss = batch_loss(model, std::span<const ModalityBundle>(batch), mode);
        values = loss_values(loss);
        if (!std::isfinite(values.total)) throw fail("non-finite loss");
        tape.backward(loss.total);
        record.lr = lr_at(optimizer.steps() + 1, total_steps, config.base_lr, config.warmup_fraction);
        optimizer.step(record.lr);
      } catch (const NumericalError& e) {
        if (std::string_view(e.what()).find("last good checkpoint") != std::string_view::npos) throw;
        throw fail(e.what());
      }

      record.loss.ml += values.ml;
      record.loss.common += values.common;
      record.loss.priv += values.priv;
      record.loss.diff += values.diff;
      record.loss.cml += values.cml;
      record.loss.total += values.total;
    }
    const double nb = static_cast<double>(batches);
    for (double* x : {&record.loss.ml, &record.loss.common, &record.loss.priv, &record.loss.diff,
                      &record.loss.cml, &record.loss.total}) {
      *x /= nb;
    }

    record.valid = evaluate(model, std::span<const ModalityBundle>(data.valid), config.accuracy);
    if (options.train_metrics) {
      record.train = evaluate(model, std::span<const ModalityBundle>(data.train), config.accuracy);
    }

    const std::map<std::string, std::string> rng = {{"dropout", engine_state(dropout_engine)},
                                                    {"shuffle", engine_state(shuffle_engine)}};
    result.last = capture(model, &optimizer, epoch, rng);
    const bool improved = record.valid.micro_f1 > result.best_valid_f1;
    if (improved) {
      result.best = result.last;
      result.best_epoch = epoch;
      result.best_valid_f1 = record.valid.micro_f1;
      since_best = 0;
    } else {
      ++since_best;
    }

    if (write) {
      const auto& l = record.loss;
      const auto& v = record.valid;
      log << epoch << "," << l.ml << "," << l.common << "," << l.priv << "," << l.diff << ","
          << l.cml << "," << l.total << "," << v.accuracy << "," << v.precision << "," << v.recall
          << "," << v.micro_f1 << "\n";
      log.flush();
      if (probe_n > 0) {
        const auto probe = probe_discriminator(model, probe_set);
        for (std::size_t m = 0; m < 3; ++m) {
          const auto name = modality_name(kModalities[m]);
          const auto& c = probe.common[m];
          const auto& p = probe.priv[m];
          probe_log << epoch << ",common," << name << "," << c[0] << "," << c[1] << "," << c[2] << "\n";
          probe_log << epoch << ",private," << name << "," << p[0] << "," << p[1] << "," << p[2] << "\n";
        }
        probe_log.flush();
      }
      result.last.save(options.out_dir / "last.ckpt");
      if (improved) result.best.save(options.out_dir / "best.ckpt");
    }

    result.history.push_back(record);
    if (options.on_epoch) options.on_epoch(record);
    if (options.target_train_f1 && record.train && record.train->micro_f1 >= *options.target_train_f1) break;
    if (config.patience > 0 && since_best >= config.patience) break;
  }
  restore(result.best, model);
  return result;
}

#define MMER_INSTANTIATE_TRAINER(T)                                                              \
  template Tensor<T> total_loss(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,            \
                                const Tensor<T>&, const Tensor<T>&, const ModelConfig&);         \
  template class Adam<T>;                                                                        \
  template LossValues loss_values(const BatchLoss<T>&);                                          \
  template BatchLoss<T> batch_loss(const MultimodalModel<T>&, std::span<const ModalityBundle>,   \
                                   const RunMode&, bool);                                        \
  template std::vector<double> predict(const MultimodalModel<T>&,                                \
                                       std::span<const ModalityBundle>);                         \
  template MetricReport evaluate(const MultimodalModel<T>&, std::span<const ModalityBundle>,     \
                                 AccuracyMode);                                                  \
  template ProbeReport probe_discriminator(const MultimodalModel<T>&,                            \
                                           std::span<const ModalityBundle>);                     \
  template double orthogonality(const MultimodalModel<T>&, std::span<const ModalityBundle>);     \
  template Checkpoint capture(const MultimodalModel<T>&, const Adam<T>*, std::size_t,            \
                              const std::map<std::string, std::string>&);                        \
  template void restore(const Checkpoint&, MultimodalModel<T>&, Adam<T>*);                       \
  template TrainResult train(MultimodalModel<T>&, const Dataset&, const TrainOptions&);

MMER_INSTANTIATE_TRAINER(float)
MMER_INSTANTIATE_TRAINER(double)

}  // namespace mmer
