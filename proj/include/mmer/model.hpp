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

#include <array>
#include <optional>
#include <vector>

#include "mmer/amr.hpp"
#include "mmer/config.hpp"
#include "mmer/fusion.hpp"
#include "mmer/labelhead.hpp"
#include "mmer/unimodal.hpp"

namespace mmer {

// Input geometry the model is built for.
struct DataShape {
  std::array<std::size_t, 3> dims{};
  // Maximum sequence lengths (exact lengths when aligned).
  std::array<std::size_t, 3> lengths{};
  std::size_t labels = 0;
  bool aligned = true;

  // Length every common representation is pooled to before summation.
  std::size_t common_length(const ModelConfig& config) const;
};

// Full pipeline: uni-modal encoders -> adversarial refinement ->
// hierarchical fusion -> label-guided decoder (or a dense head when
// identical_head is set).
template <typename T>
class MultimodalModel {
 public:
  struct Output {
    Tensor<T> probs;                       // [l]
    std::array<Tensor<T>, 3> embeddings;   // V, A, T: [d x steps]
    RefinedRepresentations<T> reps;
    Tensor<T> fused;                       // M: [d x total steps]
    std::vector<Tensor<T>> correlations;   // per label-attention head
  };

  // Parameters are drawn from the "init" stream of config.seed.
  MultimodalModel(const ModelConfig& config, const DataShape& shape);

  // features[m] is [dims[m] x steps_m].
  Output forward(const std::array<Tensor<T>, 3>& features, const RunMode& mode) const;

  // Every trainable tensor, in a stable order with stable names.
  ParamList<T> parameters() const;

  const ModelConfig& config() const { return config_; }
  const DataShape& shape() const { return shape_; }
  const UnimodalEncoder<T>& encoder(Modality m) const {
    return encoders_[static_cast<std::size_t>(m)];
  }
  const AdversarialRefiner<T>& refiner() const { return refiner_; }
  const HierarchicalFusion<T>& fusion() const { return fusion_; }
  const LabelGuidedDecoder<T>& decoder() const { return decoder_; }

 private:
  ModelConfig config_;
  DataShape shape_;
  std::array<UnimodalEncoder<T>, 3> encoders_;
  AdversarialRefiner<T> refiner_;
  HierarchicalFusion<T> fusion_;
  LabelGuidedDecoder<T> decoder_;
  Linear<T> dense_head_;
};

}  // namespace mmer
