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

#include "mmer/amr.hpp"

#include "mmer/errors.hpp"
#include "mmer/ops.hpp"

namespace mmer {

template <typename T>
PointwiseNet<T>::PointwiseNet(std::size_t d, std::size_t hidden_layers, Initializer<T>& init) {
  for (std::size_t i = 0; i <= hidden_layers; ++i) layers_.emplace_back(d, d, true, init);
}

template <typename T>
Tensor<T> PointwiseNet<T>::operator()(const Tensor<T>& x) const {
  auto h = ops::transpose(x);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i](h);
    if (i + 1 < layers_.size()) h = ops::gelu(h);
  }
  return ops::transpose(h);
}

template <typename T>
void PointwiseNet<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].collect(prefix + ".fc" + std::to_string(i), out);
  }
}

template <typename T>
ModalityDiscriminator<T>::ModalityDiscriminator(std::size_t d, DiscriminatorBias bias,
                                                std::size_t steps, Initializer<T>& init)
    : mode_(bias), weight_(init.xavier(d, 3)) {
  bias_ = bias == DiscriminatorBias::kBroadcast ? init.zeros({3}) : init.zeros({steps, 3});
}

template <typename T>
Tensor<T> ModalityDiscriminator<T>::operator()(const Tensor<T>& input) const {
  if (input.dim() != 2 || input.rows() != weight_.rows()) {
    throw DimensionError("discriminator: expected [" + std::to_string(weight_.rows()) +
                         "x steps] input, got " + shape_str(input.shape()));
  }
  if (mode_ == DiscriminatorBias::kPerPosition && input.cols() != bias_.rows()) {
    throw ConfigError("discriminator: per-position bias is fixed to " +
                      std::to_string(bias_.rows()) + " steps, input has " +
                      std::to_string(input.cols()));
  }
  auto logits = ops::matmul(ops::transpose(input), weight_);
  return ops::softmax_rows(ops::add(logits, bias_));
}

template <typename T>
void ModalityDiscriminator<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  out.push_back({prefix + ".weight", weight_});
  out.push_back({prefix + ".bias", bias_});
}

template <typename T>
CommonSemanticHead<T>::CommonSemanticHead(std::size_t d, std::size_t labels, Initializer<T>& init)
    : labels_(labels), affine_(d, labels, true, init) {}

template <typename T>
Tensor<T> CommonSemanticHead<T>::operator()(const Tensor<T>& common) const {
  auto pooled = ops::reshape(ops::mean(common, 1), {1, common.rows()});
  return ops::reshape(ops::sigmoid(affine_(pooled)), {labels_});
}

template <typename T>
void CommonSemanticHead<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  affine_.collect(prefix, out);
}

template <typename T>
AdversarialRefiner<T>::AdversarialRefiner(const RefinerConfig& config, Initializer<T>& init)
    : config_(config),
      generator_(config.d, config.hidden_layers, init),
      private_{PointwiseNet<T>(config.d, config.hidden_layers, init),
               PointwiseNet<T>(config.d, config.hidden_layers, init),
               PointwiseNet<T>(config.d, config.hidden_layers, init)},
      discriminator_(config.d, config.bias, config.steps, init),
      semantic_(config.d, config.labels, init) {}

template <typename T>
RefinedRepresentations<T> AdversarialRefiner<T>::refine(const Tensor<T>& visual,
                                                        const Tensor<T>& audio,
                                                        const Tensor<T>& text) const {
  const std::array<const Tensor<T>*, 3> inputs = {&visual, &audio, &text};
  RefinedRepresentations<T> out;
  for (std::size_t m = 0; m < 3; ++m) {
    const auto& x = *inputs[m];
    if (x.dim() != 2 || x.rows() != config_.d) {
      throw DimensionError("refine: " + std::string(modality_name(kModalities[m])) +
                           " embedding must be [" + std::to_string(config_.d) +
                           "x steps], got " + shape_str(x.shape()));
    }
    auto common = generator_(x);
    if (config_.common_length != 0) common = pool_time(common, config_.common_length);
    out.common[m] = common;
    out.priv[m] = private_[m](x);
  }
  return out;
}

template <typename T>
void AdversarialRefiner<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  generator_.collect(prefix + ".generator", out);
  for (auto m : kModalities) {
    private_[static_cast<std::size_t>(m)].collect(
        prefix + ".private_" + std::string(modality_name(m)), out);
  }
  discriminator_.collect(prefix + ".discriminator", out);
  semantic_.collect(prefix + ".semantic", out);
}

template <typename T>
Tensor<T> modality_labels(Modality m, std::size_t steps) {
  std::vector<T> v(steps * 3, T(0));
  for (std::size_t i = 0; i < steps; ++i) v[i * 3 + static_cast<std::size_t>(m)] = T(1);
  return Tensor<T>::from({steps, 3}, std::move(v));
}

template <typename T>
Tensor<T> modality_cross_entropy(const Tensor<T>& probs, Modality truth) {
  auto clamped = ops::clamp(probs, T(kProbClamp), T(1 - kProbClamp));
  auto picked = ops::mul(modality_labels<T>(truth, probs.rows()), ops::log(clamped));
  return ops::scale(ops::sum(picked), T(-1));
}

namespace {

template <typename T>
Tensor<T> adversarial_loss(const ModalityDiscriminator<T>& disc,
                           std::span<const RefinedRepresentations<T>> batch, bool use_common,
                           bool reversal) {
  if (batch.empty()) throw ContractError("adversarial loss: empty batch");
  Tensor<T> total;
  for (const auto& reps : batch) {
    for (auto m : kModalities) {
      const auto& x = use_common ? reps.common[static_cast<std::size_t>(m)]
                                 : reps.priv[static_cast<std::size_t>(m)];
      auto input = reversal ? ops::grad_reversal(x) : x;
      auto ce = modality_cross_entropy(disc(input), m);
      total = total.defined() ? ops::add(total, ce) : ce;
    }
  }
  return ops::scale(total, T(1) / static_cast<T>(batch.size()));
}

}  // namespace

template <typename T>
Tensor<T> loss_common(const ModalityDiscriminator<T>& disc,
                      std::span<const RefinedRepresentations<T>> batch, bool reversal) {
  return adversarial_loss(disc, batch, true, reversal);
}

template <typename T>
Tensor<T> loss_private(const ModalityDiscriminator<T>& disc,
                       std::span<const RefinedRepresentations<T>> batch) {
  return adversarial_loss(disc, batch, false, false);
}

template <typename T>
Tensor<T> loss_diff(std::span<const RefinedRepresentations<T>> batch, DiffSign sign) {
  if (batch.empty()) throw ContractError("loss_diff: empty batch");
  Tensor<T> total;
  for (const auto& reps : batch) {
    for (std::size_t m = 0; m < 3; ++m) {
      const auto& c = reps.common[m];
      const auto& p = reps.priv[m];
      if (c.rows() != p.rows()) {
        throw DimensionError("loss_diff: common " + shape_str(c.shape()) + " and private " +
                             shape_str(p.shape()) + " differ in feature extent");
      }
      auto term = ops::frobenius_sq(ops::matmul(ops::transpose(c), p));
      total = total.defined() ? ops::add(total, term) : term;
    }
  }
  return sign == DiffSign::kPositive ? total : ops::scale(total, T(-1));
}

template <typename T>
Tensor<T> binary_cross_entropy(const Tensor<T>& probs, std::span<const float> targets) {
  if (probs.numel() != targets.size()) {
    throw ContractError("binary_cross_entropy: " + std::to_string(targets.size()) +
                        " labels for " + std::to_string(probs.numel()) + " predictions");
  }
  std::vector<T> y(targets.begin(), targets.end());
  std::vector<T> not_y(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) not_y[i] = T(1) - y[i];
  auto p = ops::clamp(probs, T(kProbClamp), T(1 - kProbClamp));
  auto pos = ops::mul(Tensor<T>::from(probs.shape(), std::move(y)), ops::log(p));
  auto neg = ops::mul(Tensor<T>::from(probs.shape(), std::move(not_y)),
                      ops::log(ops::add_scalar(ops::scale(p, T(-1)), T(1))));
  return ops::scale(ops::sum(ops::add(pos, neg)), T(-1));
}

template <typename T>
Tensor<T> loss_cml(const CommonSemanticHead<T>& head,
                   std::span<const RefinedRepresentations<T>> batch,
                   std::span<const std::vector<float>> labels) {
  if (batch.empty()) throw ContractError("loss_cml: empty batch");
  if (labels.size() != batch.size()) {
    throw ContractError("loss_cml: " + std::to_string(labels.size()) + " label vectors for " +
                        std::to_string(batch.size()) + " samples");
  }
  Tensor<T> total;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (labels[i].size() != head.labels()) {
      throw ContractError("loss_cml: label vector has " + std::to_string(labels[i].size()) +
                          " entries, expected " + std::to_string(head.labels()));
    }
    for (const auto& c : batch[i].common) {
      auto term = binary_cross_entropy(head(c), std::span<const float>(labels[i]));
      total = total.defined() ? ops::add(total, term) : term;
    }
  }
  return total;
}

#define MMER_INSTANTIATE_AMR(T)                                                                \
  template class PointwiseNet<T>;                                                              \
  template class ModalityDiscriminator<T>;                                                     \
  template class CommonSemanticHead<T>;                                                        \
  template class AdversarialRefiner<T>;                                                        \
  template Tensor<T> modality_labels<T>(Modality, std::size_t);                                \
  template Tensor<T> modality_cross_entropy(const Tensor<T>&, Modality);                       \
  template Tensor<T> loss_common(const ModalityDiscriminator<T>&,                              \
                                 std::span<const RefinedRepresentations<T>>, bool);            \
  template Tensor<T> loss_private(const ModalityDiscriminator<T>&,                             \
                                  std::span<const RefinedRepresentations<T>>);                 \
  template Tensor<T> loss_diff(std::span<const RefinedRepresentations<T>>, DiffSign);          \
  template Tensor<T> binary_cross_entropy(const Tensor<T>&, std::span<const float>);           \
  template Tensor<T> loss_cml(const CommonSemanticHead<T>&,                                    \
                              std::span<const RefinedRepresentations<T>>,                      \
                              std::span<const std::vector<float>>);

MMER_INSTANTIATE_AMR(float)
MMER_INSTANTIATE_AMR(double)

}  // namespace mmer
