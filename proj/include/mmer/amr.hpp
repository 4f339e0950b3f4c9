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

// Adversarial refinement: a shared generator maps every modality into a
// common space, per-modality extractors keep private features, and one
// modality discriminator is trained against both (through gradient reversal
// for the common side).
//
// All sequences here are feature-major: [d x steps].

#pragma once

#include <array>
#include <span>
#include <vector>

#include "mmer/config.hpp"
#include "mmer/nn.hpp"

namespace mmer {

template <typename T>
struct RefinedRepresentations {
  // Indexed by Modality. Common parts share one length.
  std::array<Tensor<T>, 3> common;
  std::array<Tensor<T>, 3> priv;
};

// Per-timestep network: affine, gelu, ..., affine (all d -> d).
template <typename T>
class PointwiseNet {
 public:
  PointwiseNet() = default;
  PointwiseNet(std::size_t d, std::size_t hidden_layers, Initializer<T>& init);

  Tensor<T> operator()(const Tensor<T>& x) const;
  void collect(const std::string& prefix, ParamList<T>& out) const;

 private:
  std::vector<Linear<T>> layers_;
};

// softmax(I^T W + b): one distribution over {visual, audio, text} per step.
template <typename T>
class ModalityDiscriminator {
 public:
  ModalityDiscriminator() = default;
  // `steps` is required (and fixed) for the per-position bias.
  ModalityDiscriminator(std::size_t d, DiscriminatorBias bias, std::size_t steps,
                        Initializer<T>& init);

  // [d x steps] -> [steps x 3]
  Tensor<T> operator()(const Tensor<T>& input) const;
  void collect(const std::string& prefix, ParamList<T>& out) const;

  const Tensor<T>& weight() const { return weight_; }
  const Tensor<T>& bias() const { return bias_; }

 private:
  DiscriminatorBias mode_ = DiscriminatorBias::kBroadcast;
  Tensor<T> weight_;
  Tensor<T> bias_;
};

// Temporal mean-pool, shared affine d -> l, sigmoid.
template <typename T>
class CommonSemanticHead {
 public:
  CommonSemanticHead() = default;
  CommonSemanticHead(std::size_t d, std::size_t labels, Initializer<T>& init);

  // [d x steps] -> [labels] probabilities
  Tensor<T> operator()(const Tensor<T>& common) const;
  void collect(const std::string& prefix, ParamList<T>& out) const;
  std::size_t labels() const { return labels_; }

 private:
  std::size_t labels_ = 0;
  Linear<T> affine_;
};

struct RefinerConfig {
  std::size_t d = 1;
  std::size_t labels = 1;
  std::size_t hidden_layers = 1;
  // Common sequences are pooled to this length; 0 keeps native lengths.
  std::size_t common_length = 0;
  DiscriminatorBias bias = DiscriminatorBias::kBroadcast;
  // Sequence length seen by the discriminator in per-position mode.
  std::size_t steps = 1;
};

template <typename T>
class AdversarialRefiner {
 public:
  AdversarialRefiner() = default;
  AdversarialRefiner(const RefinerConfig& config, Initializer<T>& init);

  RefinedRepresentations<T> refine(const Tensor<T>& visual, const Tensor<T>& audio,
                                   const Tensor<T>& text) const;
  void collect(const std::string& prefix, ParamList<T>& out) const;

  const PointwiseNet<T>& generator() const { return generator_; }
  const PointwiseNet<T>& private_net(Modality m) const {
    return private_[static_cast<std::size_t>(m)];
  }
  const ModalityDiscriminator<T>& discriminator() const { return discriminator_; }
  const CommonSemanticHead<T>& semantic_head() const { return semantic_; }

 private:
  RefinerConfig config_;
  PointwiseNet<T> generator_;
  std::array<PointwiseNet<T>, 3> private_;
  ModalityDiscriminator<T> discriminator_;
  CommonSemanticHead<T> semantic_;
};

// One-hot ground truth [steps x 3] for modality m.
template <typename T>
Tensor<T> modality_labels(Modality m, std::size_t steps);

// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] before any log.
inline constexpr double kProbClamp = 1e-7;

// -sum(O .* log D), summed over all steps and the three classes.
template <typename T>
Tensor<T> modality_cross_entropy(const Tensor<T>& probs, Modality truth);

// (1/n) sum_m sum_i CE(D(R(C_i^m)), O^m) where R is gradient reversal when
// `reversal` is set. Empty batch -> ContractError.
template <typename T>
Tensor<T> loss_common(const ModalityDiscriminator<T>& disc,
                      std::span<const RefinedRepresentations<T>> batch, bool reversal = true);

// Same form over the private representations, no reversal.
template <typename T>
Tensor<T> loss_private(const ModalityDiscriminator<T>& disc,
                       std::span<const RefinedRepresentations<T>> batch);

// sum_m sum_i ||(C_i^m)^T P_i^m||_F^2, negated for DiffSign::kNegative.
template <typename T>
Tensor<T> loss_diff(std::span<const RefinedRepresentations<T>> batch,
                    DiffSign sign = DiffSign::kPositive);

// Summed binary cross-entropy of `probs` against 0/1 `targets`.
template <typename T>
Tensor<T> binary_cross_entropy(const Tensor<T>& probs, std::span<const float> targets);

// sum_m sum_i BCE(head(C_i^m), y_i). labels[i] must have head.labels() entries.
template <typename T>
Tensor<T> loss_cml(const CommonSemanticHead<T>& head,
                   std::span<const RefinedRepresentations<T>> batch,
                   std::span<const std::vector<float>> labels);

}  // namespace mmer
