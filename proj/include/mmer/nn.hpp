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

// Parameterised building blocks shared by the encoders, the refinement
// networks and the label decoder. All blocks here operate on time-major
// matrices ([steps x features]); callers holding feature-major data
// transpose at the boundary.

#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mmer/tensor.hpp"

namespace mmer {

template <typename T>
struct NamedParam {
  std::string name;
  Tensor<T> tensor;
};

template <typename T>
using ParamList = std::vector<NamedParam<T>>;

// Whether the current forward pass trains (dropout on) and where dropout
// draws its masks from.
struct RunMode {
  bool training = false;
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;

  static RunMode eval() { return {}; }
};

template <typename T>
Tensor<T> apply_dropout(const Tensor<T>& x, const RunMode& mode);

// Deterministic parameter initialisation from one engine.
template <typename T>
class Initializer {
 public:
  explicit Initializer(std::mt19937_64& engine) : engine_(engine) {}

  // Glorot-uniform for a [fan_in x fan_out] weight.
  Tensor<T> xavier(std::size_t fan_in, std::size_t fan_out);
  Tensor<T> normal(Shape shape, double stddev);
  Tensor<T> zeros(Shape shape);
  Tensor<T> ones(Shape shape);

 private:
  std::mt19937_64& engine_;
};

// y = x W (+ b); W is [in x out].
template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out, bool with_bias, Initializer<T>& init);

  Tensor<T> operator()(const Tensor<T>& x) const;
  void collect(const std::string& prefix, ParamList<T>& out) const;

  const Tensor<T>& weight() const { return weight_; }
  const std::optional<Tensor<T>>& bias() const { return bias_; }

 private:
  Tensor<T> weight_;
  std::optional<Tensor<T>> bias_;
};

template <typename T>
class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(std::size_t d, Initializer<T>& init);

  Tensor<T> operator()(const Tensor<T>& x) const;
  void collect(const std::string& prefix, ParamList<T>& out) const;

 private:
  Tensor<T> gain_;
  Tensor<T> bias_;
};

// gelu(x W1 + b1) W2 + b2
template <typename T>
class FeedForward {
 public:
  FeedForward() = default;
  FeedForward(std::size_t d, std::size_t hidden, Initializer<T>& init);

  Tensor<T> operator()(const Tensor<T>& x, const RunMode& mode) const;
  void collect(const std::string& prefix, ParamList<T>& out) const;

 private:
  Linear<T> in_;
  Linear<T> out_;
};

// Scaled dot-product attention split over `heads` column blocks.
template <typename T>
class MultiHeadAttention {
 public:
  struct Output {
    Tensor<T> value;
    // Per head, unscaled query-key products ([queries x keys]).
    std::vector<Tensor<T>> scores;
  };

  MultiHeadAttention() = default;
  MultiHeadAttention(std::size_t d, std::size_t heads, bool with_bias, Initializer<T>& init);

  Output operator()(const Tensor<T>& queries, const Tensor<T>& keys_values,
                    const RunMode& mode) const;
  void collect(const std::string& prefix, ParamList<T>& out) const;

  std::size_t heads() const { return heads_; }

 private:
  std::size_t d_ = 0;
  std::size_t heads_ = 1;
  Linear<T> wq_, wk_, wv_, wo_;
};

// Post-norm transformer layer: LN(x + MHA(x)), then LN(h + FFN(h)).
template <typename T>
class EncoderLayer {
 public:
  EncoderLayer() = default;
  EncoderLayer(std::size_t d, std::size_t heads, std::size_t ffn_dim, Initializer<T>& init);

  Tensor<T> operator()(const Tensor<T>& x, const RunMode& mode) const;
  void collect(const std::string& prefix, ParamList<T>& out) const;

 private:
  MultiHeadAttention<T> attention_;
  LayerNorm<T> norm1_;
  FeedForward<T> ffn_;
  LayerNorm<T> norm2_;
};

// Fixed sinusoidal table, time-major [length x d].
template <typename T>
Tensor<T> sinusoidal_positions(std::size_t length, std::size_t d);

// Averages a feature-major [d x length] sequence into `target` equal-width
// time bins (adaptive average pooling). Identity when length == target.
template <typename T>
Tensor<T> pool_time(const Tensor<T>& x, std::size_t target);

}  // namespace mmer
