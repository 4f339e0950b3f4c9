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

#include "mmer/model.hpp"

#include <algorithm>

#include "mmer/errors.hpp"
#include "mmer/ops.hpp"
#include "mmer/rng.hpp"

namespace mmer {

std::size_t DataShape::common_length(const ModelConfig& config) const {
  if (config.common_length != 0) return config.common_length;
  return *std::min_element(lengths.begin(), lengths.end());
}

template <typename T>
MultimodalModel<T>::MultimodalModel(const ModelConfig& config, const DataShape& shape)
    : config_(config), shape_(shape) {
  config_.validate();
  if (shape.labels == 0) throw ConfigError("labels: dataset must define at least one label");
  auto engine = RngStreams(config.seed).stream("init");
  Initializer<T> init(engine);
  const std::array<std::size_t, 3> layers = {config.layers_visual, config.layers_audio,
                                             config.layers_text};
  for (auto m : kModalities) {
    const auto i = static_cast<std::size_t>(m);
    ModalityConfig mc;
    mc.modality = m;
    mc.input_dim = shape.dims[i];
    mc.seq_len = shape.lengths[i];
    mc.layers = layers[i];
    mc.heads = config.encoder_heads;
    mc.ffn_dim = config.ffn_width();
    mc.model_dim = config.d_model;
    encoders_[i] = UnimodalEncoder<T>(mc, init);
  }

  const std::size_t common_len = shape.common_length(config);
  const bool equal_lengths =
      shape.lengths[0] == shape.lengths[1] && shape.lengths[1] == shape.lengths[2];
  if (config.discriminator_bias == DiscriminatorBias::kPerPosition &&
      (!shape.aligned || !equal_lengths || common_len != shape.lengths[0])) {
    throw ConfigError("discriminator_bias: per_position requires aligned data with one length");
  }
  RefinerConfig rc;
  rc.d = config.d_model;
  rc.labels = shape.labels;
  rc.hidden_layers = config.amr_hidden_layers;
  rc.common_length = (shape.aligned && equal_lengths && common_len == shape.lengths[0])
                         ? 0
                         : common_len;
  rc.bias = config.discriminator_bias;
  rc.steps = shape.lengths[0];
  refiner_ = AdversarialRefiner<T>(rc, init);

  CrossModalConfig cc;
  cc.d = config.d_model;
  cc.heads = config.encoder_heads;
  cc.ffn_dim = config.ffn_width();
  cc.layers = config.layers_cross;
  cc.use_tokens = !config.ablation.disable_token_embeddings;
  cc.token_mode = config.token_embedding;
  if (cc.use_tokens && cc.token_mode == TokenEmbedding::kScalar && !shape.aligned) {
    throw ConfigError("token_embedding: scalar tokens require aligned data");
  }
  fusion_ = HierarchicalFusion<T>(
      cc, config.ablation.fusion_order,
      {shape.lengths[0], shape.lengths[1], shape.lengths[2], common_len}, init);

  if (config.ablation.identical_head) {
    dense_head_ = Linear<T>(config.d_model, shape.labels, true, init);
  } else {
    LabelDecoderConfig dc;
    dc.labels = shape.labels;
    dc.d = config.d_model;
    dc.heads_label = config.heads_label;
    dc.heads_modal = config.heads_modal;
    dc.ffn_dim = config.ffn_width();
    dc.use_label_correlation = !config.ablation.disable_label_correlation;
    dc.use_modal_attention = !config.ablation.disable_label_modal_attention;
    decoder_ = LabelGuidedDecoder<T>(dc, init);
  }
}

template <typename T>
typename MultimodalModel<T>::Output MultimodalModel<T>::forward(
    const std::array<Tensor<T>, 3>& features, const RunMode& mode) const {
  Output out;
  for (std::size_t m = 0; m < 3; ++m) out.embeddings[m] = encoders_[m].encode(features[m], mode);
  out.reps = refiner_.refine(out.embeddings[0], out.embeddings[1], out.embeddings[2]);
  auto common = ops::add(ops::add(out.reps.common[0], out.reps.common[1]), out.reps.common[2]);
  out.fused = fusion_(out.reps.priv[0], out.reps.priv[1], out.reps.priv[2], common, mode);
  if (config_.ablation.identical_head) {
    auto pooled = ops::reshape(ops::mean(out.fused, 1), {1, config_.d_model});
    out.probs = ops::reshape(ops::sigmoid(dense_head_(pooled)), {shape_.labels});
  } else {
    auto decoded = decoder_(out.fused, mode);
    out.probs = decoded.probs;
    out.correlations = std::move(decoded.correlations);
  }
  return out;
}

template <typename T>
ParamList<T> MultimodalModel<T>::parameters() const {
  ParamList<T> out;
  for (auto m : kModalities) {
    encoders_[static_cast<std::size_t>(m)].collect("unimodal." + std::string(modality_name(m)),
                                                   out);
  }
  refiner_.collect("amr", out);
  fusion_.collect("fusion", out);
  if (config_.ablation.identical_head) {
    dense_head_.collect("head.dense", out);
  } else {
    decoder_.collect("labelhead", out);
  }
  return out;
}

template class MultimodalModel<float>;
template class MultimodalModel<double>;

}  // namespace mmer
