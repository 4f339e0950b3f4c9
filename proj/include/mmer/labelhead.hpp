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

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mmer/nn.hpp"

namespace mmer {

struct LabelDecoderConfig {
  std::size_t labels = 1;
  std::size_t d = 1;
  std::size_t heads_label = 1;
  std::size_t heads_modal = 1;
  std::size_t ffn_dim = 4;
  // Label self-attention over the embeddings (label correlations).
  bool use_label_correlation = true;
  // Cross-attention from labels into the fused sequence; when off, every
  // label receives the time-averaged fused representation instead.
  bool use_modal_attention = true;
};

// Learned label embeddings refined by label self-attention, then used as
// queries into the fused multimodal sequence to build one tailored row per
// label, each scored by its own logistic unit.
template <typename T>
class LabelGuidedDecoder {
 public:
  struct SelfAttention {
    Tensor<T> labels;  // [l x d]
    // Raw query-key products r, one [l x l] matrix per head.
    std::vector<Tensor<T>> correlations;
  };

  struct Output {
    Tensor<T> probs;     // [l]
    Tensor<T> tailored;  // [l x d]
    std::vector<Tensor<T>> correlations;
  };

  LabelGuidedDecoder() = default;
  LabelGuidedDecoder(const LabelDecoderConfig& config, Initializer<T>& init);

  SelfAttention label_self_attention(const Tensor<T>& embeddings, const RunMode& mode) const;
  // label_states [l x d], fused [d x steps] -> tailored [l x d]
  Tensor<T> decode(const Tensor<T>& label_states, const Tensor<T>& fused,
                   const RunMode& mode) const;
  // tailored [l x d] -> probabilities [l]
  Tensor<T> classify(const Tensor<T>& tailored) const;
  Output operator()(const Tensor<T>& fused, const RunMode& mode) const;

  const Tensor<T>& embeddings() const { return embeddings_; }
  const Tensor<T>& classifier_weight() const { return cls_weight_; }
  const Tensor<T>& classifier_bias() const { return cls_bias_; }
  const MultiHeadAttention<T>& self_attention() const { return self_attention_; }
  const LabelDecoderConfig& config() const { return config_; }
  void collect(const std::string& prefix, ParamList<T>& out) const;

 private:
  LabelDecoderConfig config_;
  Tensor<T> embeddings_;
  MultiHeadAttention<T> self_attention_;
  LayerNorm<T> self_norm_;
  MultiHeadAttention<T> cross_attention_;
  LayerNorm<T> cross_norm_;
  FeedForward<T> ffn_;
  LayerNorm<T> out_norm_;
  Tensor<T> cls_weight_;
  Tensor<T> cls_bias_;
};

// One head's semantic embedding computed through the pivot partition
// [k | not-k] of queries, keys and values: each row's softmax is normalised
// jointly over its two blocks. q, k, v are [l x dh]. Plain arithmetic, no tape.
template <typename T>
Tensor<T> semantic_embedding_blocks(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                                    std::size_t pivot);

// softmax(r / sqrt(head_dim)) row-wise.
template <typename T>
Tensor<T> correlation_probabilities(const Tensor<T>& raw, std::size_t head_dim);

// Sum over the batch of per-sample binary cross-entropy.
template <typename T>
Tensor<T> loss_ml(std::span<const Tensor<T>> probs, std::span<const std::vector<float>> labels);

// Writes correlations_head{h}.csv for every head; row label -> column label.
// Row-softmaxed scores unless `raw` is set. Returns the written paths.
template <typename T>
std::vector<std::filesystem::path> export_correlations(
    std::span<const Tensor<T>> correlations, std::span<const std::string> label_names,
    std::size_t head_dim, const std::filesystem::path& dir, bool raw = false);

}  // namespace mmer
