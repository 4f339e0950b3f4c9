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

#include "mmer/labelhead.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include "mmer/amr.hpp"
#include "mmer/errors.hpp"
#include "mmer/ops.hpp"

namespace mmer {

template <typename T>
LabelGuidedDecoder<T>::LabelGuidedDecoder(const LabelDecoderConfig& config, Initializer<T>& init)
    : config_(config),
      embeddings_(init.normal({config.labels, config.d}, 0.02)),
      self_attention_(config.d, config.heads_label, false, init),
      self_norm_(config.d, init),
      cross_attention_(config.d, config.heads_modal, false, init),
      cross_norm_(config.d, init),
      ffn_(config.d, config.ffn_dim, init),
      out_norm_(config.d, init),
      cls_weight_(init.normal({config.labels, config.d}, 1.0 / std::sqrt(double(config.d)))),
      cls_bias_(init.zeros({config.labels})) {}

template <typename T>
typename LabelGuidedDecoder<T>::SelfAttention LabelGuidedDecoder<T>::label_self_attention(
    const Tensor<T>& embeddings, const RunMode& mode) const {
  auto attended = self_attention_(embeddings, embeddings, mode);
  return {self_norm_(ops::add(embeddings, attended.value)), std::move(attended.scores)};
}

template <typename T>
Tensor<T> LabelGuidedDecoder<T>::decode(const Tensor<T>& label_states, const Tensor<T>& fused,
                                        const RunMode& mode) const {
  if (fused.dim() != 2 || fused.rows() != label_states.cols()) {
    throw DimensionError("label decoder: label states " + shape_str(label_states.shape()) +
                         " and fused sequence " + shape_str(fused.shape()) +
                         " disagree on the model dimension");
  }
  Tensor<T> hatted;
  if (config_.use_modal_attention) {
    auto dep = cross_attention_(label_states, ops::transpose(fused), mode).value;
    hatted = cross_norm_(ops::add(label_states, apply_dropout(dep, mode)));
  } else {
    hatted = cross_norm_(ops::add(label_states, ops::mean(fused, 1)));
  }
  return out_norm_(ops::add(hatted, apply_dropout(ffn_(hatted, mode), mode)));
}

template <typename T>
Tensor<T> LabelGuidedDecoder<T>::classify(const Tensor<T>& tailored) const {
  auto logits = ops::add(ops::sum(ops::mul(tailored, cls_weight_), 1), cls_bias_);
  return ops::sigmoid(logits);
}

template <typename T>
typename LabelGuidedDecoder<T>::Output LabelGuidedDecoder<T>::operator()(
    const Tensor<T>& fused, const RunMode& mode) const {
  Output out;
  Tensor<T> states = embeddings_;
  if (config_.use_label_correlation) {
    auto sa = label_self_attention(embeddings_, mode);
    states = sa.labels;
    out.correlations = std::move(sa.correlations);
  }
  out.tailored = decode(states, fused, mode);
  out.probs = classify(out.tailored);
  return out;
}

template <typename T>
void LabelGuidedDecoder<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  out.push_back({prefix + ".embeddings", embeddings_});
  if (config_.use_label_correlation) {
    self_attention_.collect(prefix + ".self_attn", out);
    self_norm_.collect(prefix + ".self_norm", out);
  }
  if (config_.use_modal_attention) cross_attention_.collect(prefix + ".cross_attn", out);
  cross_norm_.collect(prefix + ".cross_norm", out);
  ffn_.collect(prefix + ".ffn", out);
  out_norm_.collect(prefix + ".out_norm", out);
  out.push_back({prefix + ".classifier.weight", cls_weight_});
  out.push_back({prefix + ".classifier.bias", cls_bias_});
}

template <typename T>
Tensor<T> semantic_embedding_blocks(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                                    std::size_t pivot) {
  const std::size_t l = q.rows(), dh = q.cols();
  if (k.rows() != l || v.rows() != l || k.cols() != dh || pivot >= l) {
    throw DimensionError("semantic_embedding_blocks: inconsistent operands");
  }
  const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dh));
  // Row order [pivot, rest...]; `rest` is the complement block.
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < l; ++i)
    if (i != pivot) rest.push_back(i);

  auto dot = [&](std::size_t a, std::size_t b) {
    T acc = 0;
    for (std::size_t j = 0; j < dh; ++j) acc += q.at(a, j) * k.at(b, j);
    return acc;
  };
  std::vector<T> out(l * dh, T(0));
  auto row_embedding = [&](std::size_t row) {
    // Block scores for this row: against the pivot key, then the others.
    const T r_pivot = dot(row, pivot) * inv_sqrt;
    std::vector<T> r_rest(rest.size());
    for (std::size_t c = 0; c < rest.size(); ++c) r_rest[c] = dot(row, rest[c]) * inv_sqrt;
    T mx = r_pivot;
    for (T x : r_rest) mx = std::max(mx, x);
    T z = std::exp(r_pivot - mx);
    for (T x : r_rest) z += std::exp(x - mx);
    const T w_pivot = std::exp(r_pivot - mx) / z;
    for (std::size_t j = 0; j < dh; ++j) {
      T acc = w_pivot * v.at(pivot, j);
      for (std::size_t c = 0; c < rest.size(); ++c) {
        acc += std::exp(r_rest[c] - mx) / z * v.at(rest[c], j);
      }
      out[row * dh + j] = acc;
    }
  };
  row_embedding(pivot);
  for (std::size_t row : rest) row_embedding(row);
  return Tensor<T>::from({l, dh}, std::move(out));
}

template <typename T>
Tensor<T> correlation_probabilities(const Tensor<T>& raw, std::size_t head_dim) {
  return ops::softmax_rows(ops::scale(raw.detach(), T(1) / std::sqrt(static_cast<T>(head_dim))));
}

template <typename T>
Tensor<T> loss_ml(std::span<const Tensor<T>> probs, std::span<const std::vector<float>> labels) {
  if (probs.empty()) throw ContractError("loss_ml: empty batch");
  if (probs.size() != labels.size()) {
    throw ContractError("loss_ml: " + std::to_string(labels.size()) + " label vectors for " +
                        std::to_string(probs.size()) + " predictions");
  }
  Tensor<T> total;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    auto term = binary_cross_entropy(probs[i], std::span<const float>(labels[i]));
    total = total.defined() ? ops::add(total, term) : term;
  }
  return total;
}

template <typename T>
std::vector<std::filesystem::path> export_correlations(std::span<const Tensor<T>> correlations,
                                                       std::span<const std::string> label_names,
                                                       std::size_t head_dim,
                                                       const std::filesystem::path& dir,
                                                       bool raw) {
  std::vector<std::filesystem::path> written;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  for (std::size_t h = 0; h < correlations.size(); ++h) {
    const auto& r = correlations[h];
    if (r.rows() != label_names.size() || r.cols() != label_names.size()) {
      throw DimensionError("export_correlations: matrix " + shape_str(r.shape()) + " for " +
                           std::to_string(label_names.size()) + " labels");
    }
    const auto m = raw ? r.detach() : correlation_probabilities(r, head_dim);
    const auto path = dir / ("correlations_head" + std::to_string(h) + ".csv");
    std::ofstream out(path);
    if (!out) throw DataError(DataErrorKind::kIo, "cannot write " + path.string());
    out << "label";
    for (const auto& name : label_names) out << "," << name;
    out << "\n" << std::setprecision(10);
    for (std::size_t i = 0; i < m.rows(); ++i) {
      out << label_names[i];
      for (std::size_t j = 0; j < m.cols(); ++j) out << "," << m.at(i, j);
      out << "\n";
    }
    if (!out) throw DataError(DataErrorKind::kIo, "failed writing " + path.string());
    written.push_back(path);
  }
  return written;
}

#define MMER_INSTANTIATE_LABELHEAD(T)                                                          \
  template class LabelGuidedDecoder<T>;                                                        \
  template Tensor<T> semantic_embedding_blocks(const Tensor<T>&, const Tensor<T>&,             \
                                               const Tensor<T>&, std::size_t);                 \
  template Tensor<T> correlation_probabilities(const Tensor<T>&, std::size_t);                 \
  template Tensor<T> loss_ml(std::span<const Tensor<T>>, std::span<const std::vector<float>>); \
  template std::vector<std::filesystem::path> export_correlations(                             \
      std::span<const Tensor<T>>, std::span<const std::string>, std::size_t,                   \
      const std::filesystem::path&, bool);

MMER_INSTANTIATE_LABELHEAD(float)
MMER_INSTANTIATE_LABELHEAD(double)

}  // namespace mmer
