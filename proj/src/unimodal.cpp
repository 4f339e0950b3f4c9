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

#include "mmer/unimodal.hpp"

#include "mmer/errors.hpp"
#include "mmer/ops.hpp"

namespace mmer {

void ModalityConfig::validate() const {
  const std::string who(modality_name(modality));
  if (input_dim == 0) throw ConfigError(who + ": input_dim must be positive");
  if (seq_len == 0) throw ConfigError(who + ": seq_len must be positive");
  if (layers == 0) throw ConfigError(who + ": layers must be at least 1");
  if (heads == 0 || model_dim % heads != 0) {
    throw ConfigError(who + ": model_dim " + std::to_string(model_dim) +
                      " not divisible by heads " + std::to_string(heads));
  }
}

template <typename T>
UnimodalEncoder<T>::UnimodalEncoder(const ModalityConfig& config, Initializer<T>& init)
    : config_(config) {
  config_.validate();
  projection_ = Linear<T>(config.input_dim, config.model_dim, true, init);
  layers_.reserve(config.layers);
  for (std::size_t i = 0; i < config.layers; ++i) {
    layers_.emplace_back(config.model_dim, config.heads, config.ffn_dim, init);
  }
}

template <typename T>
Tensor<T> UnimodalEncoder<T>::encode(const Tensor<T>& features, const RunMode& mode) const {
  if (features.dim() != 2 || features.rows() != config_.input_dim ||
      features.cols() > config_.seq_len) {
    throw ConfigError(std::string(modality_name(config_.modality)) + ": expected features [" +
                      std::to_string(config_.input_dim) + "x<=" +
                      std::to_string(config_.seq_len) + "], got " +
                      shape_str(features.shape()));
  }
  const std::size_t steps = features.cols();
  auto h = projection_(ops::transpose(features));
  h = ops::add(h, sinusoidal_positions<T>(steps, config_.model_dim));
  h = apply_dropout(h, mode);
  for (const auto& layer : layers_) h = layer(h, mode);
  return ops::transpose(h);
}

template <typename T>
void UnimodalEncoder<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  projection_.collect(prefix + ".proj", out);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].collect(prefix + ".layer" + std::to_string(i), out);
  }
}

template class UnimodalEncoder<float>;
template class UnimodalEncoder<double>;

}  // namespace mmer
