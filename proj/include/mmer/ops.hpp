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

// Differentiable primitives. Every op computes its forward value eagerly and,
// when a Tape is active and some input requires a gradient, records a node
// whose backward closure accumulates into the inputs' grads.
//
// Matrices are 2-D row-major. Reductions return 1-D tensors; full reductions
// return shape [1].

#pragma once

#include <random>
#include <span>
#include <vector>

#include "mmer/tensor.hpp"

namespace mmer::ops {

// [m x k] . [k x n] -> [m x n]
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// Same shape, or b is 1-D with b.numel() == a.cols() (added to every row).
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

// v is 1-D with v.numel() == a.rows(); v[i] is added across row i.
template <typename T>
Tensor<T> add_col(const Tensor<T>& a, const Tensor<T>& v);

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);

// Elementwise product; same shape.
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T offset);

// Subgradient 0 at x == 0.
template <typename T>
Tensor<T> relu(const Tensor<T>& x);

// tanh approximation.
template <typename T>
Tensor<T> gelu(const Tensor<T>& x);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);

// Throws DomainError on any non-positive entry.
template <typename T>
Tensor<T> log(const Tensor<T>& x);

// Gradient passes only where lo < x < hi.
template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi);

// 2-D inputs: axis 0 stacks rows, axis 1 stacks columns. 1-D inputs: axis 0.
template <typename T>
Tensor<T> concat(std::span<const Tensor<T>> parts, std::size_t axis);

template <typename T>
Tensor<T> concat(std::initializer_list<Tensor<T>> parts, std::size_t axis) {
  std::vector<Tensor<T>> v(parts);
  return concat<T>(std::span<const Tensor<T>>(v), axis);
}

// Mean over `axis` of a 2-D tensor. axis 0 -> [cols], axis 1 -> [rows].
template <typename T>
Tensor<T> mean(const Tensor<T>& x, std::size_t axis);

// Sum of all entries -> [1].
template <typename T>
Tensor<T> sum(const Tensor<T>& x);

// Sum over `axis` of a 2-D tensor, same result shapes as mean().
template <typename T>
Tensor<T> sum(const Tensor<T>& x, std::size_t axis);

template <typename T>
Tensor<T> transpose(const Tensor<T>& x);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

// Columns [begin, end) of a 2-D tensor.
template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t begin, std::size_t end);

// Sum of squared entries -> [1].
template <typename T>
Tensor<T> frobenius_sq(const Tensor<T>& x);

// Row-wise softmax, stabilised by subtracting each row's max.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x);

// Normalises each row over its last extent, then applies gain/bias ([d]).
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                     T eps = T(1e-5));

// Identity forward; backward multiplies the upstream gradient by -1.
template <typename T>
Tensor<T> grad_reversal(const Tensor<T>& x);

// Inverted dropout. rate == 0 returns x itself.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, std::mt19937_64& rng);

}  // namespace mmer::ops
