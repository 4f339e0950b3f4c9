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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "mmer/amr.hpp"
#include "mmer/errors.hpp"
#include "mmer/ops.hpp"
#include "mmer/trainer.hpp"
#include "support.hpp"

using namespace mmer;
using namespace mmer::testing;
using doctest::Approx;

namespace {

RefinerConfig refiner_config(std::size_t d = 4, std::size_t labels = 2) {
  RefinerConfig c;
  c.d = d;
  c.labels = labels;
  c.hidden_layers = 1;
  return c;
}

void fill(Tensor<double> t, double value) {
  for (auto& x : t.mutable_values()) x = value;
}

// Discriminator whose output is exactly uniform: zero weight and bias.
ModalityDiscriminator<double> uniform_discriminator(std::size_t d) {
  std::mt19937_64 engine(0);
  Initializer<double> init(engine);
  ModalityDiscriminator<double> disc(d, DiscriminatorBias::kBroadcast, 1, init);
  fill(disc.weight(), 0.0);
  return disc;
}

RefinedRepresentations<double> random_reps(std::mt19937_64& engine, std::size_t d, std::size_t steps) {
  RefinedRepresentations<double> r;
  for (std::size_t m = 0; m < 3; ++m) {
    r.common[m] = random_tensor(engine, {d, steps});
    r.priv[m] = random_tensor(engine, {d, steps});
  }
  return r;
}

double sum_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += std::abs(a.at(i) - b.at(i));
  return s;
}

}  // namespace

TEST_CASE("zero weights make refined outputs equal their biases") {
  std::mt19937_64 engine(1);
  Initializer<double> init(engine);
  AdversarialRefiner<double> refiner(refiner_config(), init);
  ParamList<double> params;
  refiner.collect("amr", params);
  for (auto& p : params) {
    const bool is_bias = p.name.size() >= 5 && p.name.compare(p.name.size() - 5, 5, ".bias") == 0;
    auto v = p.tensor.mutable_values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = is_bias ? 0.1 * double(i + 1) : 0.0;
  }
  // Final-layer bias is [0.1, 0.2, 0.3, 0.4] for every net.
  for (int trial = 0; trial < 2; ++trial) {
    auto reps = refiner.refine(random_tensor(engine, {4, 3}), random_tensor(engine, {4, 5}),
                               random_tensor(engine, {4, 2}));
    for (std::size_t m = 0; m < 3; ++m) {
      for (const auto* t : {&reps.common[m], &reps.priv[m]}) {
        for (std::size_t j = 0; j < 4; ++j)
          for (std::size_t s = 0; s < t->cols(); ++s) CHECK(t->at(j, s) == Approx(0.1 * double(j + 1)));
      }
    }
  }
}

TEST_CASE("aligned inputs 256x60 give six 256x60 outputs") {
  std::mt19937_64 engine(2);
  Initializer<double> init(engine);
  AdversarialRefiner<double> refiner(refiner_config(256, 6), init);
  auto reps = refiner.refine(random_tensor(engine, {256, 60}), random_tensor(engine, {256, 60}),
                             random_tensor(engine, {256, 60}));
  for (std::size_t m = 0; m < 3; ++m) {
    CHECK(reps.common[m].shape() == Shape{256, 60});
    CHECK(reps.priv[m].shape() == Shape{256, 60});
  }
}

TEST_CASE("common outputs are pooled to the configured common length") {
  std::mt19937_64 engine(2);
  Initializer<double> init(engine);
  auto c = refiner_config();
  c.common_length = 3;
  AdversarialRefiner<double> refiner(c, init);
  auto reps = refiner.refine(random_tensor(engine, {4, 9}), random_tensor(engine, {4, 6}),
                             random_tensor(engine, {4, 3}));
  for (std::size_t m = 0; m < 3; ++m) CHECK(reps.common[m].cols() == 3);
  CHECK(reps.priv[0].cols() == 9);
  CHECK(reps.priv[1].cols() == 6);
  CHECK(reps.priv[2].cols() == 3);
}

TEST_CASE("the shared generator is one function applied to every modality") {
  std::mt19937_64 engine(3);
  Initializer<double> init(engine);
  AdversarialRefiner<double> refiner(refiner_config(), init);
  auto x = random_tensor(engine, {4, 3});
  auto other = random_tensor(engine, {4, 3});
  auto same = refiner.refine(x, x, x);
  CHECK(sum_abs_diff(same.common[0], same.common[1]) == 0.0);
  CHECK(sum_abs_diff(same.common[0], same.common[2]) == 0.0);
  auto mixed = refiner.refine(x, other, x);
  CHECK(sum_abs_diff(mixed.common[0], mixed.common[1]) > 0.0);
  // Private nets own separate parameters.
  CHECK(sum_abs_diff(same.priv[0], same.priv[1]) > 0.0);
}

TEST_CASE("mutating the generator changes all commons; a private net changes only its output") {
  std::mt19937_64 engine(4);
  Initializer<double> init(engine);
  AdversarialRefiner<double> refiner(refiner_config(), init);
  ParamList<double> params;
  refiner.collect("amr", params);
  auto v = random_tensor(engine, {4, 3}), a = random_tensor(engine, {4, 3}),
       t = random_tensor(engine, {4, 3});
  const auto before = refiner.refine(v, a, t);

  find_param(params, "amr.generator.fc0.weight").mutable_values()[0] += 0.5;
  const auto gen = refiner.refine(v, a, t);
  for (std::size_t m = 0; m < 3; ++m) {
    CHECK(sum_abs_diff(before.common[m], gen.common[m]) > 0.0);
    CHECK(sum_abs_diff(before.priv[m], gen.priv[m]) == 0.0);
  }

  find_param(params, "amr.private_visual.fc1.bias").mutable_values()[0] += 0.5;
  const auto priv = refiner.refine(v, a, t);
  CHECK(sum_abs_diff(gen.priv[0], priv.priv[0]) > 0.0);
  CHECK(sum_abs_diff(gen.priv[1], priv.priv[1]) == 0.0);
  CHECK(sum_abs_diff(gen.priv[2], priv.priv[2]) == 0.0);
  for (std::size_t m = 0; m < 3; ++m) CHECK(sum_abs_diff(gen.common[m], priv.common[m]) == 0.0);
}

TEST_CASE("zero discriminator yields uniform rows") {
  auto disc = uniform_discriminator(4);
  std::mt19937_64 engine(5);
  auto p = disc(random_tensor(engine, {4, 7}));
  CHECK(p.shape() == Shape{7, 3});
  for (double x : p.values()) CHECK(x == Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("discriminator rows are distributions for random inputs") {
  std::mt19937_64 engine(6);
  Initializer<double> init(engine);
  ModalityDiscriminator<double> disc(5, DiscriminatorBias::kBroadcast, 1, init);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = disc(random_tensor(engine, {5, 11}, -10, 10));
    for (std::size_t r = 0; r < p.rows(); ++r) {
      CHECK(std::abs(p.at(r, 0) + p.at(r, 1) + p.at(r, 2) - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("discriminator hand example") {
  std::mt19937_64 engine(7);
  Initializer<double> init(engine);
  ModalityDiscriminator<double> disc(2, DiscriminatorBias::kBroadcast, 1, init);
  Tensor<double> weight_param = disc.weight();
  auto w = weight_param.mutable_values();
  const double weight[6] = {1, 0, 0, 0, 0, 0};
  std::copy(weight, weight + 6, w.begin());
  auto p = disc(Tensor<double>::from({2, 1}, {1, 0}));
  CHECK(p.at(0) == Approx(0.57611688).epsilon(1e-8));
  CHECK(p.at(1) == Approx(0.21194156).epsilon(1e-8));
  CHECK(p.at(2) == Approx(0.21194156).epsilon(1e-8));
}

TEST_CASE("per-position bias is fixed to its length") {
  std::mt19937_64 engine(8);
  Initializer<double> init(engine);
  ModalityDiscriminator<double> disc(3, DiscriminatorBias::kPerPosition, 4, init);
  CHECK(disc.bias().shape() == Shape{4, 3});
  CHECK(disc(random_tensor(engine, {3, 4})).shape() == Shape{4, 3});
  CHECK_THROWS_AS(disc(random_tensor(engine, {3, 5})), ConfigError);
  CHECK_THROWS_AS(disc(random_tensor(engine, {2, 4})), DimensionError);
}

TEST_CASE("modality labels are one-hot rows") {
  auto o = modality_labels<double>(Modality::kAudio, 3);
  CHECK(o.shape() == Shape{3, 3});
  for (std::size_t r = 0; r < 3; ++r) {
    CHECK(o.at(r, 0) == 0.0);
    CHECK(o.at(r, 1) == 1.0);
    CHECK(o.at(r, 2) == 0.0);
  }
}

TEST_CASE("adversarial losses at a uniform discriminator equal 3 tau ln 3") {
  auto disc = uniform_discriminator(4);
  std::mt19937_64 engine(9);
  for (std::size_t n : {1u, 3u}) {
    std::vector<RefinedRepresentations<double>> batch;
    for (std::size_t i = 0; i < n; ++i) batch.push_back(random_reps(engine, 4, 60));
    const double expected = 3.0 * 60.0 * std::log(3.0);
    CHECK(expected == Approx(197.75).epsilon(1e-4));
    CHECK(loss_common<double>(disc, batch).item() == Approx(expected).epsilon(1e-12));
    CHECK(loss_private<double>(disc, batch).item() == Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("a perfect discriminator drives adversarial losses to about zero") {
  std::mt19937_64 engine(10);
  Initializer<double> init(engine);
  ModalityDiscriminator<double> disc(3, DiscriminatorBias::kBroadcast, 1, init);
  // Modality m's inputs are 100 e_m, the weight is the identity.
  Tensor<double> weight_param = disc.weight();
  auto w = weight_param.mutable_values();
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) w[i * 3 + j] = i == j ? 1.0 : 0.0;
  RefinedRepresentations<double> reps;
  for (std::size_t m = 0; m < 3; ++m) {
    std::vector<double> v(3 * 5, 0.0);
    for (std::size_t s = 0; s < 5; ++s) v[m * 5 + s] = 100.0;
    reps.common[m] = Tensor<double>::from({3, 5}, v);
    reps.priv[m] = Tensor<double>::from({3, 5}, v);
  }
  const std::vector<RefinedRepresentations<double>> batch = {reps};
  // Clamped at 1 - 1e-7 per row: 15 rows * ~1e-7.
  CHECK(loss_common<double>(disc, batch).item() < 1e-5);
  CHECK(loss_private<double>(disc, batch).item() < 1e-5);
  CHECK(loss_common<double>(disc, batch).item() >= 0.0);
}

TEST_CASE("empty batches are contract errors") {
  auto disc = uniform_discriminator(4);
  const std::vector<RefinedRepresentations<double>> empty;
  CHECK_THROWS_AS(loss_common<double>(disc, empty), ContractError);
  CHECK_THROWS_AS(loss_private<double>(disc, empty), ContractError);
  CHECK_THROWS_AS(loss_diff<double>(empty), ContractError);
}

TEST_CASE("private loss equals common loss without reversal on the same inputs") {
  std::mt19937_64 engine(11);
  Initializer<double> init(engine);
  ModalityDiscriminator<double> disc(4, DiscriminatorBias::kBroadcast, 1, init);
  std::vector<RefinedRepresentations<double>> batch = {random_reps(engine, 4, 5),
                                                       random_reps(engine, 4, 5)};
  for (auto& r : batch) r.priv = r.common;
  const double with_reversal = loss_common<double>(disc, batch, true).item();
  const double without = loss_common<double>(disc, batch, false).item();
  const double priv = loss_private<double>(disc, batch).item();
  CHECK(with_reversal == without);
  CHECK(priv == without);
  CHECK(priv >= 0.0);
}

TEST_CASE("reversal negates the generator gradient and leaves the discriminator gradient") {
  std::mt19937_64 engine(12);
  Initializer<double> init(engine);
  AdversarialRefiner<double> refiner(refiner_config(), init);
  ParamList<double> params;
  refiner.collect("amr", params);
  auto v = random_tensor(engine, {4, 3}), a = random_tensor(engine, {4, 3}),
       t = random_tensor(engine, {4, 3});

  auto grads = [&](bool reversal) {
    for (auto& p : params) p.tensor.zero_grad();
    Tape<double> tape;
    const std::vector<RefinedRepresentations<double>> batch = {refiner.refine(v, a, t)};
    tape.backward(loss_common<double>(refiner.discriminator(), batch, reversal));
    std::map<std::string, std::vector<double>> out;
    for (const auto& p : params) out[p.name] = p.tensor.grad();
    return out;
  };
  const auto reversed = grads(true);
  const auto plain = grads(false);
  std::size_t nonzero = 0;
  for (const auto& [name, g] : plain) {
    const bool generator = name.find("generator") != std::string::npos;
    const bool discriminator = name.find("discriminator") != std::string::npos;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (generator) {
        CHECK(reversed.at(name)[i] == -g[i]);
        nonzero += g[i] != 0.0;
      } else if (discriminator) {
        CHECK(reversed.at(name)[i] == g[i]);
      } else {
        CHECK(g[i] == 0.0);
      }
    }
  }
  CHECK(nonzero > 0);
}

TEST_CASE("private loss sends normal gradients to the private nets only") {
  std::mt19937_64 engine(13);
  Initializer<double> init(engine);
  AdversarialRefiner<double> refiner(refiner_config(), init);
  ParamList<double> params;
  refiner.collect("amr", params);
  Tape<double> tape;
  const std::vector<RefinedRepresentations<double>> batch = {refiner.refine(
      random_tensor(engine, {4, 3}), random_tensor(engine, {4, 3}), random_tensor(engine, {4, 3}))};
  tape.backward(loss_private<double>(refiner.discriminator(), batch));
  for (const auto& p : params) {
    double mag = 0;
    for (double g : p.tensor.grad()) mag += std::abs(g);
    INFO(p.name);
    if (p.name.find("generator") != std::string::npos || p.name.find("semantic") != std::string::npos)
      CHECK(mag == 0.0);
    else if (p.name.find(".weight") != std::string::npos)
      CHECK(mag > 0.0);
  }
}

TEST_CASE("orthogonality loss examples") {
  RefinedRepresentations<double> r;
  const auto zero = Tensor<double>::zeros({2, 2});
  for (std::size_t m = 0; m < 3; ++m) r.common[m] = r.priv[m] = zero;

  SUBCASE("orthogonal subspaces give zero") {
    r.common[0] = Tensor<double>::from({2, 3}, {1, 2, 3, 0, 0, 0});
    r.priv[0] = Tensor<double>::from({2, 3}, {0, 0, 0, 4, 5, 6});
    r.common[1] = r.common[2] = Tensor<double>::zeros({2, 3});
    r.priv[1] = r.priv[2] = Tensor<double>::zeros({2, 3});
    const std::vector<RefinedRepresentations<double>> batch = {r};
    CHECK(loss_diff<double>(batch).item() == 0.0);
  }
  SUBCASE("identity against identity gives two") {
    r.common[0] = r.priv[0] = Tensor<double>::from({2, 2}, {1, 0, 0, 1});
    const std::vector<RefinedRepresentations<double>> batch = {r};
    CHECK(loss_diff<double>(batch).item() == 2.0);
    CHECK(loss_diff<double>(batch, DiffSign::kNegative).item() == -2.0);
  }
  SUBCASE("a matrix against itself gives the squared norm of its Gram matrix") {
    r.common[1] = r.priv[1] = Tensor<double>::from({2, 2}, {1, 2, 3, 4});
    const std::vector<RefinedRepresentations<double>> batch = {r};
    // Gram [[10, 14], [14, 20]].
    CHECK(loss_diff<double>(batch).item() == 892.0);
  }
}

TEST_CASE("orthogonality loss is a raw batch sum, homogeneous of degree two in P") {
  std::mt19937_64 engine(14);
  auto r1 = random_reps(engine, 3, 4), r2 = random_reps(engine, 3, 4);
  const std::vector<RefinedRepresentations<double>> one = {r1}, two = {r2}, both = {r1, r2};
  const double s1 = loss_diff<double>(one).item(), s2 = loss_diff<double>(two).item();
  CHECK(s1 > 0.0);
  CHECK(loss_diff<double>(both).item() == Approx(s1 + s2).epsilon(1e-14));

  auto scaled = r1;
  for (auto& p : scaled.priv) p = ops::scale(p, 3.0);
  const std::vector<RefinedRepresentations<double>> s = {scaled};
  CHECK(loss_diff<double>(s).item() == Approx(9.0 * s1).epsilon(1e-13));
}

TEST_CASE("orthogonality loss accepts different common and private lengths") {
  std::mt19937_64 engine(15);
  RefinedRepresentations<double> r;
  for (std::size_t m = 0; m < 3; ++m) {
    r.common[m] = random_tensor(engine, {3, 2});
    r.priv[m] = random_tensor(engine, {3, 5});
  }
  const std::vector<RefinedRepresentations<double>> batch = {r};
  // Oracle: sum over modalities of ||C^T P||_F^2.
  double expected = 0;
  for (std::size_t m = 0; m < 3; ++m) {
    const Mat g = ref_matmul(ref_transpose(to_mat(r.common[m])), to_mat(r.priv[m]));
    for (double x : g.v) expected += x * x;
  }
  CHECK(loss_diff<double>(batch).item() == Approx(expected).epsilon(1e-13));
  r.priv[0] = random_tensor(engine, {4, 5});
  const std::vector<RefinedRepresentations<double>> bad = {r};
  CHECK_THROWS_AS(loss_diff<double>(bad), DimensionError);
}

TEST_CASE("common semantic loss closed forms") {
  std::mt19937_64 engine(16);
  Initializer<double> init(engine);

  SUBCASE("one half everywhere gives 3 n l ln 2") {
    CommonSemanticHead<double> head(4, 5, init);
    ParamList<double> params;
    head.collect("sem", params);
    zero_params(params, {"sem"});
    std::vector<RefinedRepresentations<double>> batch;
    std::vector<std::vector<float>> labels;
    for (std::size_t i = 0; i < 3; ++i) {
      batch.push_back(random_reps(engine, 4, 6));
      labels.push_back({1, 0, 1, 1, 0});
    }
    CHECK(loss_cml<double>(head, batch, labels).item() ==
          Approx(3.0 * 3.0 * 5.0 * std::log(2.0)).epsilon(1e-13));
  }
  SUBCASE("a quarter for a positive label gives 3 ln 4") {
    CommonSemanticHead<double> head(4, 1, init);
    ParamList<double> params;
    head.collect("sem", params);
    zero_params(params, {"sem.weight"});
    find_param(params, "sem.bias").mutable_values()[0] = std::log(1.0 / 3.0);
    const std::vector<RefinedRepresentations<double>> batch = {random_reps(engine, 4, 6)};
    const std::vector<std::vector<float>> labels = {{1}};
    const double loss = loss_cml<double>(head, batch, labels).item();
    CHECK(loss == Approx(3.0 * std::log(4.0)).epsilon(1e-12));
    CHECK(loss == Approx(4.159).epsilon(1e-3));
  }
  SUBCASE("perfect predictions give about zero") {
    CommonSemanticHead<double> head(4, 2, init);
    ParamList<double> params;
    head.collect("sem", params);
    zero_params(params, {"sem.weight"});
    auto b = find_param(params, "sem.bias").mutable_values();
    b[0] = 40.0;
    b[1] = -40.0;
    const std::vector<RefinedRepresentations<double>> batch = {random_reps(engine, 4, 6)};
    const std::vector<std::vector<float>> labels = {{1, 0}};
    const double loss = loss_cml<double>(head, batch, labels).item();
    CHECK(loss >= 0.0);
    CHECK(loss < 1e-5);
  }
  SUBCASE("label length mismatch is a contract error") {
    CommonSemanticHead<double> head(4, 2, init);
    const std::vector<RefinedRepresentations<double>> batch = {random_reps(engine, 4, 6)};
    const std::vector<std::vector<float>> labels = {{1, 0, 1}};
    CHECK_THROWS_AS(loss_cml<double>(head, batch, labels), ContractError);
  }
}

TEST_CASE("semantic head output lies strictly inside the unit interval") {
  std::mt19937_64 engine(17);
  Initializer<double> init(engine);
  CommonSemanticHead<double> head(4, 6, init);
  auto p = head(random_tensor(engine, {4, 7}, -3, 3));
  CHECK(p.shape() == Shape{6});
  for (double x : p.values()) {
    CHECK(x > 0.0);
    CHECK(x < 1.0);
  }
}

TEST_CASE("a reversed step confuses the discriminator more than an unreversed one") {
  // One gradient step on the common loss, updating generator and
  // discriminator, then measure mean |D(C) - 1/3| on a frozen probe batch.
  auto confusion_after_step = [](bool reversal) {
    std::mt19937_64 engine(18);
    Initializer<double> init(engine);
    auto c = refiner_config(4, 2);
    AdversarialRefiner<double> refiner(c, init);
    ParamList<double> params;
    refiner.collect("amr", params);
    std::vector<std::array<Tensor<double>, 3>> inputs;
    for (int i = 0; i < 4; ++i) {
      // Modalities separated by an offset so the generator output is discriminable.
      std::array<Tensor<double>, 3> x;
      for (std::size_t m = 0; m < 3; ++m) {
        x[m] = random_tensor(engine, {4, 5}, -0.5, 0.5);
        auto v = x[m].mutable_values();
        for (std::size_t s = 0; s < 5; ++s) v[m * 5 + s] += 2.0;
      }
      inputs.push_back(x);
    }
    auto distance = [&] {
      double total = 0;
      std::size_t count = 0;
      for (const auto& x : inputs) {
        const auto reps = refiner.refine(x[0], x[1], x[2]);
        for (std::size_t m = 0; m < 3; ++m) {
          const auto p = refiner.discriminator()(reps.common[m]);
          for (double q : p.values()) total += std::abs(q - 1.0 / 3.0), ++count;
        }
      }
      return total / double(count);
    };
    // Give the discriminator a head start so it is not at the uniform point.
    Adam<double> warm(params, AdamSettings{});
    for (int step = 0; step < 30; ++step) {
      Tape<double> tape;
      std::vector<RefinedRepresentations<double>> batch;
      for (const auto& x : inputs) batch.push_back(refiner.refine(x[0], x[1], x[2]));
      tape.backward(loss_common<double>(refiner.discriminator(), batch, false));
      for (auto& p : params)
        if (p.name.find("discriminator") == std::string::npos) p.tensor.zero_grad();
      warm.step(0.05);
    }
    const double before = distance();
    Adam<double> opt(params, AdamSettings{});
    for (int step = 0; step < 5; ++step) {
      Tape<double> tape;
      std::vector<RefinedRepresentations<double>> batch;
      for (const auto& x : inputs) batch.push_back(refiner.refine(x[0], x[1], x[2]));
      tape.backward(loss_common<double>(refiner.discriminator(), batch, reversal));
      for (auto& p : params)
        if (p.name.find("generator") == std::string::npos) p.tensor.zero_grad();
      opt.step(0.05);
    }
    return std::pair{before, distance()};
  };
  const auto [before_rev, after_rev] = confusion_after_step(true);
  const auto [before_plain, after_plain] = confusion_after_step(false);
  CHECK(before_rev == before_plain);
  CHECK(after_rev < before_rev);
  CHECK(after_plain > before_plain);
  CHECK(after_rev < after_plain);
}
