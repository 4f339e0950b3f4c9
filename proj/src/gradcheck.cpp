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

#include "mmer/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mmer/errors.hpp"
#include "mmer/ops.hpp"
#include "mmer/rng.hpp"
#include "mmer/trainer.hpp"

namespace mmer {

double GradCheckReport::max_rel_error() const {
  double worst = 0;
  for (const auto& e : entries) worst = std::max(worst, e.max_rel_error);
  return worst;
}

std::size_t GradCheckReport::checked() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.checked;
  return n;
}

GradCheckReport check_gradients(const std::function<Tensor<double>()>& loss,
                                std::span<const NamedParam<double>> inputs,
                                const GradCheckOptions& options) {
  std::vector<std::vector<double>> analytic;
  {
    for (const auto& in : inputs) in.tensor.node()->grad.clear();
    Tape<double> tape;
    const auto value = loss();
    if (value.numel() != 1) throw ContractError("check_gradients: loss must be a scalar");
    tape.backward(value);
    for (const auto& in : inputs) analytic.push_back(in.tensor.grad());
  }
  auto engine = RngStreams(options.seed).stream("gradcheck");
  GradCheckReport report;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    Tensor<double> x = inputs[t].tensor;
    std::vector<std::size_t> coords(x.numel());
    std::iota(coords.begin(), coords.end(), 0);
    if (options.max_per_tensor > 0 && coords.size() > options.max_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), engine);
      coords.resize(options.max_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    GradCheckEntry entry;
    entry.name = inputs[t].name;
    for (std::size_t k : coords) {
      auto values = x.mutable_values();
      const double saved = values[k];
      values[k] = saved + options.step;
      const double up = loss().item();
      values[k] = saved - options.step;
      const double down = loss().item();
      values[k] = saved;
      const double numeric = (up - down) / (2 * options.step);
      const double a = analytic[t][k];
      const double abs_err = std::abs(a - numeric);
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      entry.max_abs_error = std::max(entry.max_abs_error, abs_err);
      entry.max_rel_error = std::max(entry.max_rel_error, abs_err / denom);
      ++entry.checked;
    }
    report.entries.push_back(entry);
  }
  return report;
}

GradCheckReport check_model_gradients(const MultimodalModel<double>& model,
                                      std::span<const ModalityBundle> batch,
                                      const GradCheckOptions& options) {
  const auto params = model.parameters();
  auto loss = [&] { return batch_loss(model, batch, RunMode::eval(), false).total; };
  return check_gradients(loss, std::span<const NamedParam<double>>(params), options);
}

namespace {

Tensor<double> random_tensor(std::mt19937_64& engine, Shape shape, double lo, double hi,
                             double min_abs = 0.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) {
    do x = dist(engine);
    while (std::abs(x) < min_abs);
  }
  auto t = Tensor<double>::from(std::move(shape), std::move(v));
  t.set_requires_grad(true);
  return t;
}

}  // namespace

std::vector<NamedCheck> primitive_gradient_suite(const GradCheckOptions& options) {
  using namespace ops;
  auto engine = RngStreams(options.seed).stream("gradcheck.primitives");
  std::vector<NamedCheck> out;
  // Weighted reduction with fixed random weights, so every output entry
  // contributes a distinct coefficient.
  auto reduce = [&](const Tensor<double>& y) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> w(y.numel());
    for (auto& x : w) x = dist(engine);
    auto weights = Tensor<double>::from(y.shape(), std::move(w));
    return std::function<Tensor<double>(const Tensor<double>&)>(
        [weights](const Tensor<double>& z) { return sum(mul(z, weights)); });
  };
  auto run = [&](const std::string& name, std::vector<NamedParam<double>> inputs,
                 const std::function<Tensor<double>()>& f) {
    const auto reducer = reduce(f());
    auto loss = [&] { return reducer(f()); };
    out.push_back({name, check_gradients(loss, std::span<const NamedParam<double>>(inputs), options)});
  };

  auto a = random_tensor(engine, {3, 4}, -1, 1);
  auto b = random_tensor(engine, {4, 5}, -1, 1);
  auto c = random_tensor(engine, {3, 4}, -1, 1);
  auto row = random_tensor(engine, {4}, -1, 1);
  auto col = random_tensor(engine, {3}, -1, 1);
  auto away = random_tensor(engine, {3, 4}, -2, 2, 0.1);
  auto positive = random_tensor(engine, {3, 4}, 0.2, 2);
  auto gain = random_tensor(engine, {4}, 0.5, 1.5);
  auto bias = random_tensor(engine, {4}, -0.5, 0.5);
  auto wide = random_tensor(engine, {3, 6}, -3, 3);

  run("matmul", {{"a", a}, {"b", b}}, [&] { return matmul(a, b); });
  run("add", {{"a", a}, {"c", c}}, [&] { return add(a, c); });
  run("add_row_broadcast", {{"a", a}, {"row", row}}, [&] { return add(a, row); });
  run("add_col", {{"a", a}, {"col", col}}, [&] { return add_col(a, col); });
  run("sub", {{"a", a}, {"c", c}}, [&] { return sub(a, c); });
  run("mul", {{"a", a}, {"c", c}}, [&] { return mul(a, c); });
  run("scale", {{"a", a}}, [&] { return scale(a, 1.7); });
  run("add_scalar", {{"a", a}}, [&] { return add_scalar(a, -0.3); });
  run("relu", {{"x", away}}, [&] { return relu(away); });
  run("gelu", {{"a", a}}, [&] { return gelu(scale(a, 2.0)); });
  run("sigmoid", {{"a", a}}, [&] { return sigmoid(scale(a, 3.0)); });
  run("log", {{"x", positive}}, [&] { return log(positive); });
  run("clamp", {{"x", away}}, [&] { return clamp(away, -1.0, 1.0); });
  run("concat_rows", {{"a", a}, {"c", c}}, [&] { return concat({a, c}, 0); });
  run("concat_cols", {{"a", a}, {"c", c}}, [&] { return concat({a, c}, 1); });
  run("mean_axis0", {{"a", a}}, [&] { return mean(a, 0); });
  run("mean_axis1", {{"a", a}}, [&] { return mean(a, 1); });
  run("sum_all", {{"a", a}}, [&] { return sum(a); });
  run("sum_axis1", {{"a", a}}, [&] { return sum(a, 1); });
  run("transpose", {{"a", a}}, [&] { return transpose(a); });
  run("reshape", {{"a", a}}, [&] { return reshape(a, {2, 6}); });
  run("slice_cols", {{"a", a}}, [&] { return slice_cols(a, 1, 3); });
  run("frobenius_sq", {{"a", a}}, [&] { return frobenius_sq(a); });
  run("softmax_rows", {{"x", wide}}, [&] { return softmax_rows(wide); });
  run("layer_norm", {{"a", a}, {"gain", gain}, {"bias", bias}},
      [&] { return layer_norm(a, gain, bias); });
  run("grad_reversal_twice", {{"a", a}}, [&] { return grad_reversal(grad_reversal(a)); });
  return out;
}

GradCheckReport composite_gradient_check(const GradCheckOptions& options) {
  SyntheticSpec spec;
  spec.dims = {4, 4, 6};
  spec.lengths = {5, 5, 5};
  spec.n_train = 2;
  spec.n_valid = 1;
  spec.n_test = 1;
  spec.seed = options.seed;
  const auto data = generate_synthetic(spec);

  ModelConfig config;
  config.d_model = 8;
  config.encoder_heads = 2;
  config.heads_label = 2;
  config.heads_modal = 2;
  config.ffn_dim = 16;
  config.layers_visual = config.layers_audio = config.layers_text = 1;
  config.layers_cross = 1;
  config.dropout = 0.0;
  config.seed = options.seed;
  // Weights large enough that every refinement term moves the gradient.
  config.alpha = 0.5;
  config.beta = 0.05;
  const MultimodalModel<double> model(config, data.manifest.shape());
  return check_model_gradients(model, std::span<const ModalityBundle>(data.train), options);
}

}  // namespace mmer
