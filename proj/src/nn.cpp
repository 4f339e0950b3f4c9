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

#include "mmer/nn.hpp"

#include <cmath>

#include "mmer/errors.hpp"
#include "mmer/ops.hpp"

namespace mmer {

template <typename T>
Tensor<T> apply_dropout(const Tensor<T>& x, const RunMode& mode) {
  if (!mode.training || mode.dropout <= 0.0) return x;
  if (mode.rng == nullptr) throw ContractError("training with dropout requires an RNG");
  return ops::dropout(x, mode.dropout, *mode.rng);
}

template <typename T>
Tensor<T> Initializer<T>::xavier(std::size_t fan_in, std::size_t fan_out) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<T> v(fan_in * fan_out);
  for (auto& x : v) x = static_cast<T>(dist(engine_));
  return Tensor<T>::from({fan_in, fan_out}, std::move(v)).set_requires_grad(true);
}

template <typename T>
Tensor<T> Initializer<T>::normal(Shape shape, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<T>(dist(engine_));
  return Tensor<T>::from(std::move(shape), std::move(v)).set_requires_grad(true);
}

template <typename T>
Tensor<T> Initializer<T>::zeros(Shape shape) {
  return Tensor<T>::zeros(std::move(shape)).set_requires_grad(true);
}

template <typename T>
Tensor<T> Initializer<T>::ones(Shape shape) {
  return Tensor<T>::full(std::move(shape), T(1)).set_requires_grad(true);
}

template <typename T>
Linear<T>::Linear(std::size_t in, std::size_t out, bool with_bias, Initializer<T>& init)
    : weight_(init.xavier(in, out)) {
  if (with_bias) bias_ = init.zeros({out});
}

template <typename T>
Tensor<T> Linear<T>::operator()(const Tensor<T>& x) const {
  auto y = ops::matmul(x, weight_);
  return bias_ ? ops::add(y, *bias_) : y;
}

template <typename T>
void Linear<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  out.push_back({prefix + ".weight", weight_});
  if (bias_) out.push_back({prefix + ".bias", *bias_});
}

template <typename T>
LayerNorm<T>::LayerNorm(std::size_t d, Initializer<T>& init)
    : gain_(init.ones({d})), bias_(init.zeros({d})) {}

template <typename T>
Tensor<T> LayerNorm<T>::operator()(const Tensor<T>& x) const {
  return ops::layer_norm(x, gain_, bias_);
}

template <typename T>
void LayerNorm<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  out.push_back({prefix + ".gain", gain_});
  out.push_back({prefix + ".bias", bias_});
}

template <typename T>
FeedForward<T>::FeedForward(std::size_t d, std::size_t hidden, Initializer<T>& init)
    : in_(d, hidden, true, init), out_(hidden, d, true, init) {}

template <typename T>
Tensor<T> FeedForward<T>::operator()(const Tensor<T>& x, const RunMode& mode) const {
  return out_(apply_dropout(ops::gelu(in_(x)), mode));
}

template <typename T>
void FeedForward<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  in_.collect(prefix + ".in", out);
  out_.collect(prefix + ".out", out);
}

template <typename T>
MultiHeadAttention<T>::MultiHeadAttention(std::size_t d, std::size_t heads, bool with_bias,
                                          Initializer<T>& init)
    : d_(d),
      heads_(heads),
      wq_(d, d, with_bias, init),
      wk_(d, d, with_bias, init),
      wv_(d, d, with_bias, init),
      wo_(d, d, with_bias, init) {
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("attention: model dim " + std::to_string(d) +
                      " is not divisible by head count " + std::to_string(heads));
  }
}

template <typename T>
typename MultiHeadAttention<T>::Output MultiHeadAttention<T>::operator()(
    const Tensor<T>& queries, const Tensor<T>& keys_values, const RunMode& mode) const {
  if (queries.cols() != d_ || keys_values.cols() != d_) {
    throw DimensionError("attention: expected feature extent " + std::to_string(d_) + ", got " +
                         shape_str(queries.shape()) + " and " + shape_str(keys_values.shape()));
  }
  const std::size_t dh = d_ / heads_;
  const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dh));
  auto q = wq_(queries);
  auto k = wk_(keys_values);
  auto v = wv_(keys_values);
  Output out;
  std::vector<Tensor<T>> heads;
  heads.reserve(heads_);
  for (std::size_t h = 0; h < heads_; ++h) {
    auto qh = ops::slice_cols(q, h * dh, (h + 1) * dh);
    auto kh = ops::slice_cols(k, h * dh, (h + 1) * dh);
    auto vh = ops::slice_cols(v, h * dh, (h + 1) * dh);
    auto scores = ops::matmul(qh, ops::transpose(kh));
    auto weights = apply_dropout(ops::softmax_rows(ops::scale(scores, inv_sqrt)), mode);
    heads.push_back(ops::matmul(weights, vh));
    out.scores.push_back(scores);
  }
  out.value = wo_(heads_ == 1 ? heads[0] : ops::concat<T>(std::span<const Tensor<T>>(heads), 1));
  return out;
}

template <typename T>
void MultiHeadAttention<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  wq_.collect(prefix + ".q", out);
  wk_.collect(prefix + ".k", out);
  wv_.collect(prefix + ".v", out);
  wo_.collect(prefix + ".o", out);
}

template <typename T>
EncoderLayer<T>::EncoderLayer(std::size_t d, std::size_t heads, std::size_t ffn_dim,
                              Initializer<T>& init)
    : attention_(d, heads, true, init),
      norm1_(d, init),
      ffn_(d, ffn_dim, init),
      norm2_(d, init) {}

template <typename T>
Tensor<T> EncoderLayer<T>::operator()(const Tensor<T>& x, const RunMode& mode) const {
  auto attended = attention_(x, x, mode).value;
  auto h = norm1_(ops::add(x, apply_dropout(attended, mode)));
  return norm2_(ops::add(h, apply_dropout(ffn_(h, mode), mode)));
}

template <typename T>
void EncoderLayer<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  attention_.collect(prefix + ".attn", out);
  norm1_.collect(prefix + ".norm1", out);
  ffn_.collect(prefix + ".ffn", out);
  norm2_.collect(prefix + ".norm2", out);
}

template <typename T>
Tensor<T> sinusoidal_positions(std::size_t length, std::size_t d) {
  std::vector<T> v(length * d);
  for (std::size_t pos = 0; pos < length; ++pos) {
    for (std::size_t i = 0; i < d; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / d);
      const double angle = static_cast<double>(pos) * freq;
      v[pos * d + i] = static_cast<T>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  return Tensor<T>::from({length, d}, std::move(v));
}

template <typename T>
Tensor<T> pool_time(const Tensor<T>& x, std::size_t target) {
  const std::size_t len = x.cols();
  if (target == 0) throw ConfigError("pool_time: target length must be positive");
  if (len == target) return x;
  std::vector<T> p(len * target, T(0));
  for (std::size_t j = 0; j < target; ++j) {
    const std::size_t lo = j * len / target;
    const std::size_t hi = ((j + 1) * len + target - 1) / target;
    const T w = T(1) / static_cast<T>(hi - lo);
    for (std::size_t s = lo; s < hi; ++s) p[s * target + j] = w;
  }
  return ops::matmul(x, Tensor<T>::from({len, target}, std::move(p)));
}

#define MMER_INSTANTIATE_NN(T)                                              \
  template Tensor<T> apply_dropout(const Tensor<T>&, const RunMode&);       \
  template class Initializer<T>;                                            \
  template class Linear<T>;                                                 \
  template class LayerNorm<T>;                                              \
  template class FeedForward<T>;                                            \
  template class MultiHeadAttention<T>;                                     \
  template class EncoderLayer<T>;                                           \
  template Tensor<T> sinusoidal_positions<T>(std::size_t, std::size_t);     \
  template Tensor<T> pool_time(const Tensor<T>&, std::size_t);

MMER_INSTANTIATE_NN(float)
MMER_INSTANTIATE_NN(double)

}  // namespace mmer
