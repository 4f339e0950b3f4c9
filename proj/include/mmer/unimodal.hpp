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

#include <vector>

#include "mmer/config.hpp"
#include "mmer/nn.hpp"

namespace mmer {

struct ModalityConfig {
  Modality modality = Modality::kVisual;
  std::size_t input_dim = 1;
  // Maximum sequence length; shorter (unaligned) sequences are accepted.
  std::size_t seq_len = 1;
  std::size_t layers = 1;
  std::size_t heads = 1;
  std::size_t ffn_dim = 4;
  std::size_t model_dim = 1;

  void validate() const;
};

// Input projection + sinusoidal positions + a stack of post-norm
// transformer layers. Takes and returns feature-major sequences.
template <typename T>
class UnimodalEncoder {
 public:
  UnimodalEncoder() = default;
  UnimodalEncoder(const ModalityConfig& config, Initializer<T>& init);

  // [input_dim x steps] -> [model_dim x steps]
  Tensor<T> encode(const Tensor<T>& features, const RunMode& mode) const;
  void collect(const std::string& prefix, ParamList<T>& out) const;
  const ModalityConfig& config() const { return config_; }

 private:
  ModalityConfig config_;
  Linear<T> projection_;
  std::vector<EncoderLayer<T>> layers_;
};

}  // namespace mmer
