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
#include <vector>

#include "mmer/config.hpp"
#include "mmer/nn.hpp"

namespace mmer {

struct CrossModalConfig {
  std::size_t d = 1;
  std::size_t heads = 1;
  std::size_t ffn_dim = 4;
  std::size_t layers = 1;
  bool use_tokens = true;
  TokenEmbedding token_mode = TokenEmbedding::kVector;
  // Stream lengths; only consulted (and then required) in scalar token mode.
  std::size_t length_a = 0;
  std::size_t length_b = 0;
};

// Concatenates two feature-major streams along time, adds sinusoidal
// positions and one learned token embedding per stream, then runs a stack of
// encoder layers over the joint sequence.
template <typename T>
class CrossModalEncoder {
 public:
  CrossModalEncoder() = default;
  CrossModalEncoder(const CrossModalConfig& config, Initializer<T>& init);

  // [d x len_a], [d x len_b] -> [d x (len_a + len_b)]
  Tensor<T> operator()(const Tensor<T>& a, const Tensor<T>& b, const RunMode& mode) const;
  void collect(const std::string& prefix, ParamList<T>& out) const;

  // Concatenated input with positions and tokens added, time-major.
  Tensor<T> embed(const Tensor<T>& a, const Tensor<T>& b) const;

 private:
  CrossModalConfig config_;
  Tensor<T> token_a_;
  Tensor<T> token_b_;
  std::vector<EncoderLayer<T>> layers_;
};

// Three chained cross-modal encoders following a fusion order; each level
// owns its parameters. Inputs and output are feature-major.
template <typename T>
class HierarchicalFusion {
 public:
  HierarchicalFusion() = default;
  // lengths = {visual, audio, text, common}; needed for scalar tokens only.
  HierarchicalFusion(const CrossModalConfig& level_config, const FusionOrder& order,
                     std::array<std::size_t, 4> lengths, Initializer<T>& init);

  Tensor<T> operator()(const Tensor<T>& priv_visual, const Tensor<T>& priv_audio,
                       const Tensor<T>& priv_text, const Tensor<T>& common,
                       const RunMode& mode) const;
  void collect(const std::string& prefix, ParamList<T>& out) const;

  const FusionOrder& order() const { return order_; }
  const CrossModalEncoder<T>& level(std::size_t i) const { return levels_[i]; }

 private:
  FusionOrder order_;
  std::array<CrossModalEncoder<T>, 3> levels_;
};

}  // namespace mmer
