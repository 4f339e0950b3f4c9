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

// Helpers shared by the test binaries. Oracles here are written against
// plain vectors so they do not reuse library code paths.

#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <unistd.h>

#include "mmer/config.hpp"
#include "mmer/dataio.hpp"
#include "mmer/nn.hpp"
#include "mmer/tensor.hpp"

namespace mmer::testing {

// Row-major dense matrix used by the reference implementations.
struct Mat {
  std::size_t rows = 0, cols = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), v(r * c, fill) {}
  double& operator()(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
};

inline Mat to_mat(const Tensor<double>& t) {
  Mat m(t.rows(), t.cols());
  for (std::size_t i = 0; i < m.v.size(); ++i) m.v[i] = t.at(i);
  return m;
}

inline Tensor<double> to_tensor(const Mat& m) { return Tensor<double>::from({m.rows, m.cols}, m.v); }

inline Mat ref_matmul(const Mat& a, const Mat& b) {
  Mat out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = 0; k < a.cols; ++k)
      for (std::size_t j = 0; j < b.cols; ++j) out(i, j) += a(i, k) * b(k, j);
  return out;
}

inline Mat ref_transpose(const Mat& a) {
  Mat out(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) out(j, i) = a(i, j);
  return out;
}

// Per-row standardisation with identity affine.
inline Mat ref_layer_norm(const Mat& x, double eps = 1e-5) {
  Mat out(x.rows, x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    double mean = 0, var = 0;
    for (std::size_t j = 0; j < x.cols; ++j) mean += x(i, j);
    mean /= double(x.cols);
    for (std::size_t j = 0; j < x.cols; ++j) var += (x(i, j) - mean) * (x(i, j) - mean);
    var /= double(x.cols);
    for (std::size_t j = 0; j < x.cols; ++j) out(i, j) = (x(i, j) - mean) / std::sqrt(var + eps);
  }
  return out;
}

inline Mat ref_softmax_rows(const Mat& x) {
  Mat out(x.rows, x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    double mx = x(i, 0);
    for (std::size_t j = 1; j < x.cols; ++j) mx = std::max(mx, x(i, j));
    double z = 0;
    for (std::size_t j = 0; j < x.cols; ++j) z += std::exp(x(i, j) - mx);
    for (std::size_t j = 0; j < x.cols; ++j) out(i, j) = std::exp(x(i, j) - mx) / z;
  }
  return out;
}

// Sinusoidal table [length x d], written independently of the library.
inline Mat ref_positions(std::size_t length, std::size_t d) {
  Mat out(length, d);
  for (std::size_t p = 0; p < length; ++p) {
    for (std::size_t i = 0; i < d; ++i) {
      const double rate = 1.0 / std::pow(10000.0, double(i - i % 2) / double(d));
      out(p, i) = i % 2 == 0 ? std::sin(double(p) * rate) : std::cos(double(p) * rate);
    }
  }
  return out;
}

inline double max_abs_diff(const Mat& a, const Mat& b) {
  double worst = 0;
  for (std::size_t i = 0; i < a.v.size(); ++i) worst = std::max(worst, std::abs(a.v[i] - b.v[i]));
  return worst;
}

inline Tensor<double> random_tensor(std::mt19937_64& engine, Shape shape, double lo = -1.0,
                                    double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = dist(engine);
  return Tensor<double>::from(std::move(shape), std::move(v));
}

// Sets every parameter whose name contains one of `parts` to zero.
template <typename T>
void zero_params(const ParamList<T>& params, std::initializer_list<const char*> parts) {
  for (auto p : params) {
    for (const char* part : parts) {
      if (p.name.find(part) != std::string::npos) {
        for (auto& x : p.tensor.mutable_values()) x = T(0);
      }
    }
  }
}

// Parameter named exactly `name`; throws if absent.
template <typename T>
Tensor<T> find_param(const ParamList<T>& params, const std::string& name) {
  for (const auto& p : params)
    if (p.name == name) return p.tensor;
  throw std::out_of_range("no parameter " + name);
}

// Small model used across the tests (same sizes as configs/toy.cfg).
inline ModelConfig toy_config() {
  ModelConfig c;
  c.d_model = 16;
  c.encoder_heads = 2;
  c.ffn_dim = 32;
  c.heads_label = 2;
  c.heads_modal = 2;
  c.layers_visual = c.layers_audio = c.layers_text = 1;
  c.layers_cross = 1;
  c.batch_size = 16;
  c.base_lr = 0.003;
  c.epochs = 300;
  c.patience = 0;
  c.dropout = 0.0;
  return c;
}

// Small seeded synthetic set for fast training tests.
inline Dataset tiny_dataset(std::uint64_t seed = 3, std::size_t n_train = 32) {
  SyntheticSpec spec;
  spec.dims = {4, 4, 6};
  spec.lengths = {5, 5, 5};
  spec.n_train = n_train;
  spec.n_valid = 8;
  spec.n_test = 8;
  spec.seed = seed;
  return generate_synthetic(spec);
}

// toy_config() shrunk to d_model 8 with a short schedule.
inline ModelConfig tiny_config(std::size_t epochs = 3) {
  ModelConfig c = toy_config();
  c.d_model = 8;
  c.ffn_dim = 16;
  c.epochs = epochs;
  c.batch_size = 16;
  return c;
}

// Fresh directory under the system temp path, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::size_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("mmer_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace mmer::testing
