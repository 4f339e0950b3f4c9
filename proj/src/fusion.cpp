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

#include "mmer/fusion.hpp"

#include "mmer/errors.hpp"
#include "mmer/ops.hpp"

namespace mmer {

template <typename T>
CrossModalEncoder<T>::CrossModalEncoder(const CrossModalConfig& config, Initializer<T>& init)
    : config_(config) {
  if (config.use_tokens) {
    if (config.token_mode == TokenEmbedding::kVector) {
      token_a_ = init.normal({config.d}, 0.02);
      token_b_ = init.normal({config.d}, 0.02);
    } else {
      if (config.length_a == 0 || config.length_b == 0) {
        throw ConfigError("token_embedding: scalar tokens need fixed stream lengths");
      }
      token_a_ = init.normal({config.length_a}, 0.02);
      token_b_ = init.normal({config.length_b}, 0.02);
    }
  }
  layers_.reserve(config.layers);
  for (std::size_t i = 0; i < config.layers; ++i) {
    layers_.emplace_back(config.d, config.heads, config.ffn_dim, init);
  }
}

template <typename T>
Tensor<T> CrossModalEncoder<T>::embed(const Tensor<T>& a, const Tensor<T>& b) const {
  if (a.rows() != config_.d || b.rows() != config_.d) {
    throw DimensionError("cross-modal encoder: streams " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " must both have feature extent " +
                         std::to_string(config_.d));
  }
  Tensor<T> ta = a, tb = b;
  if (config_.use_tokens) {
    if (config_.token_mode == TokenEmbedding::kVector) {
      ta = ops::add_col(a, token_a_);
      tb = ops::add_col(b, token_b_);
    } else {
      if (a.cols() != config_.length_a || b.cols() != config_.length_b) {
        throw ConfigError("cross-modal encoder: scalar tokens fixed to lengths " +
                          std::to_string(config_.length_a) + "/" +
                          std::to_string(config_.length_b) + ", got " +
                          std::to_string(a.cols()) + "/" + std::to_string(b.cols()));
      }
      ta = ops::add(a, token_a_);
      tb = ops::add(b, token_b_);
    }
  }
  auto joint = ops::transpose(ops::concat<T>({ta, tb}, 1));
  return ops::add(joint, sinusoidal_positions<T>(joint.rows(), config_.d));
}

template <typename T>
Tensor<T> CrossModalEncoder<T>::operator()(const Tensor<T>& a, const Tensor<T>& b,
                                           const RunMode& mode) const {
  auto h = apply_dropout(embed(a, b), mode);
  for (const auto& layer : layers_) h = layer(h, mode);
  return ops::transpose(h);
}

template <typename T>
void CrossModalEncoder<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  if (config_.use_tokens) {
    out.push_back({prefix + ".token_a", token_a_});
    out.push_back({prefix + ".token_b", token_b_});
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].collect(prefix + ".layer" + std::to_string(i), out);
  }
}

namespace {

std::size_t stream_index(Stream s) {
  switch (s) {
    case Stream::kVisual: return 0;
    case Stream::kAudio: return 1;
    case Stream::kText: return 2;
    case Stream::kCommon: return 3;
  }
  return 0;
}

}  // namespace

template <typename T>
HierarchicalFusion<T>::HierarchicalFusion(const CrossModalConfig& level_config,
                                          const FusionOrder& order,
                                          std::array<std::size_t, 4> lengths,
                                          Initializer<T>& init)
    : order_(order) {
  const auto& s = order.streams();
  std::size_t fused = lengths[stream_index(s[0])];
  for (std::size_t level = 0; level < 3; ++level) {
    CrossModalConfig c = level_config;
    c.length_a = fused;
    c.length_b = lengths[stream_index(s[level + 1])];
    levels_[level] = CrossModalEncoder<T>(c, init);
    fused += c.length_b;
  }
}

template <typename T>
Tensor<T> HierarchicalFusion<T>::operator()(const Tensor<T>& priv_visual,
                                            const Tensor<T>& priv_audio,
                                            const Tensor<T>& priv_text, const Tensor<T>& common,
                                            const RunMode& mode) const {
  const std::array<const Tensor<T>*, 4> operands = {&priv_visual, &priv_audio, &priv_text,
                                                    &common};
  const auto& s = order_.streams();
  Tensor<T> z = *operands[stream_index(s[0])];
  for (std::size_t level = 0; level < 3; ++level) {
    z = levels_[level](z, *operands[stream_index(s[level + 1])], mode);
  }
  return z;
}

template <typename T>
void HierarchicalFusion<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  for (std::size_t i = 0; i < 3; ++i) levels_[i].collect(prefix + ".level" + std::to_string(i), out);
}

template class CrossModalEncoder<float>;
template class CrossModalEncoder<double>;
template class HierarchicalFusion<float>;
template class HierarchicalFusion<double>;

}  // namespace mmer
