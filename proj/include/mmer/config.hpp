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
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace mmer {

enum class Modality : std::size_t { kVisual = 0, kAudio = 1, kText = 2 };

inline constexpr std::array<Modality, 3> kModalities = {Modality::kVisual, Modality::kAudio,
                                                        Modality::kText};

std::string_view modality_name(Modality m);

// Operand of the hierarchical fusion: a private stream or the summed common one.
enum class Stream { kVisual, kAudio, kText, kCommon };

class FusionOrder {
 public:
  FusionOrder() = default;
  explicit FusionOrder(std::array<Stream, 4> order);

  // Accepts "v,a,t,c" or "vatc" (any permutation of the four symbols).
  static FusionOrder parse(std::string_view text);

  const std::array<Stream, 4>& streams() const { return order_; }
  std::string str() const;
  bool operator==(const FusionOrder&) const = default;

 private:
  std::array<Stream, 4> order_ = {Stream::kVisual, Stream::kAudio, Stream::kText,
                                  Stream::kCommon};
};

enum class DiffSign { kPositive, kNegative };
enum class TokenEmbedding { kVector, kScalar };
enum class DiscriminatorBias { kBroadcast, kPerPosition };
enum class AccuracyMode { kJaccard, kSubset };

struct AblationFlags {
  bool disable_amr = false;
  bool disable_diff = false;
  bool disable_cml = false;
  FusionOrder fusion_order{};
  bool disable_token_embeddings = false;
  bool identical_head = false;
  bool disable_label_correlation = false;
  bool disable_label_modal_attention = false;
};

// Architecture and training hyperparameters. Defaults are the full-scale
// CMU-MOSEI settings; see configs/ for the desk-scale toy configuration.
struct ModelConfig {
  std::size_t d_model = 256;
  std::size_t encoder_heads = 8;
  // 0 means 4 * d_model.
  std::size_t ffn_dim = 0;
  std::size_t heads_label = 8;
  std::size_t heads_modal = 8;
  std::size_t layers_visual = 4;
  std::size_t layers_audio = 4;
  std::size_t layers_text = 6;
  std::size_t layers_cross = 3;
  std::size_t amr_hidden_layers = 1;
  // 0 means the minimum of the three native sequence lengths.
  std::size_t common_length = 0;

  double alpha = 0.01;
  double beta = 5e-6;
  double gamma = 0.5;

  std::size_t batch_size = 64;
  double base_lr = 1e-5;
  double warmup_fraction = 0.1;
  std::size_t epochs = 100;
  // Epochs without validation micro-F1 improvement before stopping; 0 disables.
  std::size_t patience = 20;
  std::uint64_t seed = 0;
  double dropout = 0.1;
  double weight_decay = 0.0;
  // Global gradient-norm clip; 0 disables.
  double grad_clip = 0.0;

  DiffSign diff_sign = DiffSign::kPositive;
  TokenEmbedding token_embedding = TokenEmbedding::kVector;
  DiscriminatorBias discriminator_bias = DiscriminatorBias::kBroadcast;
  AccuracyMode accuracy = AccuracyMode::kJaccard;

  AblationFlags ablation{};

  std::size_t ffn_width() const { return ffn_dim == 0 ? 4 * d_model : ffn_dim; }
  // Throws ConfigError naming the offending key.
  void validate() const;
};

// key = value lines; '#' starts a comment. Unknown keys and malformed values
// raise ConfigError naming the key.
ModelConfig parse_config(std::string_view text);
ModelConfig load_config(const std::filesystem::path& path);
// Emits every key, so parse_config(to_text(c)) reproduces c.
std::string to_text(const ModelConfig& config);

}  // namespace mmer
