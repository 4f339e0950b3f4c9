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

// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "metrics_oracle.hpp"
#include "mmer/ablation.hpp"
#include "mmer/config.hpp"
#include "mmer/dataio.hpp"
#include "mmer/gradcheck.hpp"
#include "mmer/labelhead.hpp"
#include "mmer/ops.hpp"
#include "mmer/trainer.hpp"
#include "support.hpp"

using namespace mmer;
using namespace mmer::testing;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ModelConfig shipped_toy_config() { return load_config(fs::path(MMER_SOURCE_DIR) / "configs" / "toy.cfg"); }

// Default synthetic set (8/8/12 features, 10 steps, 200/50/50).
Dataset default_synthetic() {
  SyntheticSpec spec;
  spec.seed = 7;
  return generate_synthetic(spec);
}

std::vector<ModalityBundle> probe_batch(const Dataset& data) {
  const std::size_t n = std::min<std::size_t>(64, data.valid.size());
  return {data.valid.begin(), data.valid.begin() + static_cast<std::ptrdiff_t>(n)};
}

Outcome gradient_oracle() {
  const auto start = Clock::now();
  double worst_primitive = 0;
  std::string worst_name;
  for (const auto& check : primitive_gradient_suite()) {
    if (check.report.max_rel_error() >= worst_primitive) {
      worst_primitive = check.report.max_rel_error();
      worst_name = check.name;
    }
  }
  const auto composite = composite_gradient_check();
  const double elapsed = seconds_since(start);
  const bool pass = worst_primitive < 1e-4 && composite.max_rel_error() < 1e-4 && elapsed < 120.0;
  return {pass, "worst primitive " + worst_name + " " + fmt(worst_primitive) + ", composite " +
                    fmt(composite.max_rel_error()) + " over " + std::to_string(composite.checked()) +
                    " coordinates, " + fmt(elapsed) + " s"};
}

Mat full_attention(const Mat& q, const Mat& k, const Mat& v) {
  Mat scores = ref_matmul(q, ref_transpose(k));
  const double inv = 1.0 / std::sqrt(double(q.cols));
  for (auto& x : scores.v) x *= inv;
  return ref_matmul(ref_softmax_rows(scores), v);
}

Mat columns(const Mat& m, std::size_t begin, std::size_t end) {
  Mat out(m.rows, end - begin);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = begin; j < end; ++j) out(i, j - begin) = m(i, j);
  return out;
}

Outcome block_attention() {
  constexpr std::size_t labels = 6, d = 256, heads = 8, dh = d / heads;
  std::mt19937_64 engine(101);
  double worst = 0;
  for (int draw = 0; draw < 100; ++draw) {
    const Mat emb = to_mat(random_tensor(engine, {labels, d}));
    const Mat q = ref_matmul(emb, to_mat(random_tensor(engine, {d, d}, -0.1, 0.1)));
    const Mat k = ref_matmul(emb, to_mat(random_tensor(engine, {d, d}, -0.1, 0.1)));
    const Mat v = ref_matmul(emb, to_mat(random_tensor(engine, {d, d}, -0.1, 0.1)));
    for (std::size_t h = 0; h < heads; ++h) {
      const Mat qh = columns(q, h * dh, (h + 1) * dh), kh = columns(k, h * dh, (h + 1) * dh),
                vh = columns(v, h * dh, (h + 1) * dh);
      const Mat expected = full_attention(qh, kh, vh);
      for (std::size_t pivot = 0; pivot < labels; ++pivot) {
        const auto blocks = semantic_embedding_blocks(to_tensor(qh), to_tensor(kh), to_tensor(vh), pivot);
        worst = std::max(worst, max_abs_diff(to_mat(blocks), expected));
      }
    }
  }
  return {worst < 1e-9, "max deviation " + fmt(worst) + " over 100 draws x 8 heads x 6 pivots"};
}

Outcome reversal_semantics() {
  std::mt19937_64 engine(202);
  auto x = random_tensor(engine, {4, 5});
  x.set_requires_grad(true);
  const auto w = random_tensor(engine, {4, 5});
  bool forward_exact = false, backward_negated = false;
  {
    Tape<double> tape;
    const auto y = ops::grad_reversal(x);
    forward_exact = std::memcmp(y.values().data(), x.values().data(), x.numel() * sizeof(double)) == 0;
    tape.backward(ops::sum(ops::mul(y, w)));
    const auto g = x.grad();
    backward_negated = true;
    for (std::size_t i = 0; i < g.size(); ++i) backward_negated = backward_negated && g[i] == -w.at(i);
  }

  const auto config = shipped_toy_config();
  DataShape shape;
  shape.dims = {8, 8, 12};
  shape.lengths = {10, 10, 10};
  shape.labels = 6;
  MultimodalModel<double> model(config, shape);
  const auto params = model.parameters();
  std::array<Tensor<double>, 3> embedded;
  for (auto& e : embedded) e = random_tensor(engine, {config.d_model, 10});
  auto generator_grads = [&](bool reversal) {
    for (auto p : params) p.tensor.zero_grad();
    Tape<double> tape;
    const std::vector<RefinedRepresentations<double>> batch = {
        model.refiner().refine(embedded[0], embedded[1], embedded[2])};
    tape.backward(loss_common<double>(model.refiner().discriminator(), batch, reversal));
    std::map<std::string, std::vector<double>> out;
    for (const auto& p : params)
      if (p.name.find("amr.generator") != std::string::npos) out[p.name] = p.tensor.grad();
    return out;
  };
  const auto reversed = generator_grads(true);
  const auto plain = generator_grads(false);
  bool negated = !plain.empty();
  std::size_t nonzero = 0;
  for (const auto& [name, g] : plain) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      negated = negated && reversed.at(name)[i] == -g[i];
      nonzero += g[i] != 0.0;
    }
  }
  const bool pass = forward_exact && backward_negated && negated && nonzero > 0;
  return {pass, std::string("forward ") + (forward_exact ? "bit-exact" : "differs") + ", backward " +
                    (backward_negated ? "negated" : "not negated") + ", generator gradient " +
                    (negated ? "exactly -1x" : "mismatch") + " over " + std::to_string(nonzero) +
                    " nonzero entries"};
}

Outcome closed_form_losses() {
  auto config = shipped_toy_config();
  SyntheticSpec spec;
  spec.lengths = {60, 60, 60};
  spec.n_train = 2;
  spec.n_valid = 1;
  spec.n_test = 1;
  const auto data = generate_synthetic(spec);
  MultimodalModel<double> model(config, data.manifest.shape());
  zero_params(model.parameters(), {"amr.discriminator", "amr.semantic", "labelhead.classifier"});
  const auto loss = loss_values(batch_loss(model, std::span<const ModalityBundle>(data.train), RunMode::eval()));

  const double n = 2, l = 6;
  const double adversarial = 3.0 * 60.0 * std::log(3.0);
  const double ml = 6.0 * n * std::log(2.0);
  const double cml = 3.0 * n * l * std::log(2.0);
  RefinedRepresentations<double> r;
  for (std::size_t m = 0; m < 3; ++m) r.common[m] = r.priv[m] = Tensor<double>::zeros({2, 2});
  r.common[0] = r.priv[0] = Tensor<double>::from({2, 2}, {1, 2, 3, 4});
  const std::vector<RefinedRepresentations<double>> hand = {r};
  const double diff = loss_diff<double>(hand).item();

  const double err = std::max({std::abs(loss.common - adversarial), std::abs(loss.priv - adversarial),
                               std::abs(loss.ml - ml), std::abs(loss.cml - cml)});
  const bool pass = err < 1e-6 && std::abs(adversarial - 197.75) < 0.01 && diff == 892.0;
  return {pass, "L_C " + fmt(loss.common) + ", L_P " + fmt(loss.priv) + " (expect " + fmt(adversarial) +
                    "), L_ml " + fmt(loss.ml) + " (expect " + fmt(ml) + "), L_cml " + fmt(loss.cml) +
                    " (expect " + fmt(cml) + "), L_diff hand case " + fmt(diff) + " (expect 892)"};
}

Outcome shape_contract() {
  const auto config = shipped_toy_config();
  const auto aligned = default_synthetic();
  MultimodalModel<double> model(config, aligned.manifest.shape());
  const auto out = model.forward(to_tensors<double>(aligned.test.front()), RunMode::eval());
  const auto head = model.decoder()(out.fused, RunMode::eval());
  bool pass = out.fused.shape() == Shape{config.d_model, 40} &&
              head.tailored.shape() == Shape{6, config.d_model};
  std::string detail = "aligned M " + shape_str(out.fused.shape()) + ", H " + shape_str(head.tailored.shape());

  SyntheticSpec spec;
  spec.aligned = false;
  spec.lengths = {12, 10, 6};
  spec.n_train = 8;
  spec.n_valid = spec.n_test = 2;
  const auto unaligned = generate_synthetic(spec);
  const auto shape = unaligned.manifest.shape();
  const std::size_t common = shape.common_length(config);
  MultimodalModel<double> free_model(config, shape);
  std::size_t checked = 0;
  for (const auto& b : unaligned.train) {
    const auto o = free_model.forward(to_tensors<double>(b), RunMode::eval());
    const std::size_t expected =
        b.features[0].cols + b.features[1].cols + b.features[2].cols + common;
    pass = pass && o.fused.rows() == config.d_model && o.fused.cols() == expected;
    for (const auto& c : o.reps.common) pass = pass && c.cols() == common;
    ++checked;
  }
  detail += "; unaligned M length = lengths + common length " + std::to_string(common) + " on " +
            std::to_string(checked) + " records";
  return {pass, detail};
}

// State shared by the training-based criteria: one run of the shipped toy
// schedule; `train` leaves the best-validation parameters in place.
struct ToyRun {
  Dataset data;
  double orthogonality_init = 0;
  double orthogonality_best = 0;
  TrainResult result;
  double seconds = 0;
  ProbeReport probe;
  MetricReport library;
  OracleMetrics oracle;
};

ToyRun toy_training() {
  ToyRun run;
  run.data = default_synthetic();
  const auto probe = probe_batch(run.data);
  const auto start = Clock::now();
  MultimodalModel<float> model(shipped_toy_config(), run.data.manifest.shape());
  run.orthogonality_init = orthogonality(model, std::span<const ModalityBundle>(probe));
  TrainOptions options;
  options.train_metrics = true;
  run.result = train(model, run.data, options);
  run.seconds = seconds_since(start);
  run.orthogonality_best = orthogonality(model, std::span<const ModalityBundle>(probe));
  run.probe = probe_discriminator(model, std::span<const ModalityBundle>(probe));

  const auto probs = predict(model, std::span<const ModalityBundle>(run.data.train));
  const auto pred = LabelMatrix::binarize(probs, run.data.train.size(), 6);
  const auto truth = truth_matrix(std::span<const ModalityBundle>(run.data.train));
  run.library = evaluate_predictions(pred, truth);
  run.oracle = oracle_metrics(pred, truth);
  return run;
}

Outcome overfit_capacity(const ToyRun& run) {
  double best_train = 0;
  std::size_t reached = 0;
  for (const auto& r : run.result.history) {
    if (r.train && r.train->micro_f1 > best_train) best_train = r.train->micro_f1;
    if (!reached && r.train && r.train->micro_f1 >= 0.95) reached = r.epoch;
  }
  const bool metrics_match = run.library.micro_f1 == run.oracle.micro_f1 &&
                             std::abs(run.library.accuracy - run.oracle.accuracy) < 1e-12 &&
                             std::abs(run.library.precision - run.oracle.precision) < 1e-12 &&
                             std::abs(run.library.recall - run.oracle.recall) < 1e-12;
  const bool pass = reached > 0 && reached <= 300 && run.seconds < 600.0 && metrics_match;
  return {pass, "train micro-F1 " + fmt(best_train) + (reached ? " reached 0.95 at epoch " + std::to_string(reached)
                                                               : std::string(" never reached 0.95")) +
                    ", " + fmt(run.seconds) + " s, metrics vs brute-force counter " +
                    (metrics_match ? "identical" : "differ")};
}

Outcome adversarial_behavior(const ToyRun& run) {
  bool pass = true;
  double lo = 1, hi = 0, worst_private = 1;
  for (std::size_t m = 0; m < 3; ++m) {
    for (double p : run.probe.common[m]) {
      lo = std::min(lo, p);
      hi = std::max(hi, p);
      pass = pass && p >= 0.23 && p <= 0.43;
    }
    worst_private = std::min(worst_private, run.probe.private_accuracy[m]);
    pass = pass && run.probe.private_accuracy[m] >= 0.8;
  }
  return {pass, "common probabilities in [" + fmt(lo) + ", " + fmt(hi) +
                    "], lowest private true-modality rate " + fmt(worst_private)};
}

Outcome orthogonality_trend(const ToyRun& run) {
  return {run.orthogonality_best < run.orthogonality_init,
          "sum ||C^T P||_F^2 on probe batch: init " + fmt(run.orthogonality_init) + ", best epoch " +
              std::to_string(run.result.best_epoch) + " " + fmt(run.orthogonality_best)};
}

// Epoch budget for the five-seed comparison; the full model's validation
// micro-F1 plateaus well before this on the default synthetic set.
constexpr std::size_t kAblationEpochs = 60;

Outcome ablation_direction() {
  const auto data = default_synthetic();
  auto config = shipped_toy_config();
  config.epochs = kAblationEpochs;
  std::vector<AblationVariant> pair;
  for (const auto& v : ablation_variants())
    if (v.name == "w/o AMR" || v.name == "full") pair.push_back(v);
  const std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  const auto runs = run_ablation<float>(data, config, seeds, pair);
  const auto rows = summarize(runs);
  double full = -1, without = -1;
  for (const auto& r : rows) {
    if (r.variant == "full") full = r.valid.micro_f1;
    if (r.variant == "w/o AMR") without = r.valid.micro_f1;
  }

  // Every configured row in the comparison CSV, on a short schedule.
  TempDir dir("acceptance_ablate");
  config.epochs = 2;
  const auto variants = ablation_variants();
  const std::vector<std::uint64_t> one = {0};
  const auto grid = run_ablation<float>(data, config, one, variants);
  write_ablation_summary(summarize(grid), dir.path() / "ablate.csv");
  std::istringstream csv(slurp(dir.path() / "ablate.csv"));
  std::string line;
  std::getline(csv, line);
  std::size_t matched = 0, rows_seen = 0;
  while (std::getline(csv, line)) {
    ++rows_seen;
    for (const auto& v : variants)
      if (line.rfind(v.name + ",", 0) == 0) ++matched;
  }
  const bool pass = full >= without && rows_seen == 8 && matched == 8;
  return {pass, "median valid micro-F1 over 5 seeds: full " + fmt(full) + ", w/o AMR " + fmt(without) +
                    "; CSV rows " + std::to_string(rows_seen) + " (" + std::to_string(matched) +
                    " configured variants)"};
}

Outcome determinism() {
  const auto data = default_synthetic();
  auto config = shipped_toy_config();
  config.epochs = 3;
  TempDir a("acceptance_det_a"), b("acceptance_det_b");
  for (const auto* dir : {&a, &b}) {
    MultimodalModel<float> model(config, data.manifest.shape());
    TrainOptions options;
    options.out_dir = dir->path();
    train(model, data, options);
  }
  bool pass = true;
  std::string detail;
  for (const char* f : {"best.ckpt", "last.ckpt", "train_log.csv", "amr_probe.csv"}) {
    const auto x = slurp(a.path() / f), y = slurp(b.path() / f);
    const bool same = !x.empty() && x == y;
    pass = pass && same;
    detail += std::string(detail.empty() ? "" : ", ") + f + (same ? " identical" : " differs");
  }
  return {pass, detail};
}

Outcome metrics_oracle() {
  LabelMatrix truth(2, 3), pred(2, 3);
  truth.set(0, 0, true);
  truth.set(0, 1, true);
  truth.set(1, 2, true);
  pred.set(0, 0, true);
  pred.set(1, 1, true);
  pred.set(1, 2, true);
  const auto hand = evaluate_predictions(pred, truth);
  bool pass = std::abs(hand.micro_f1 - 2.0 / 3.0) < 1e-15 && hand.precision == 0.75 && hand.recall == 0.75 &&
              hand.accuracy == 0.5;

  std::mt19937_64 engine(303);
  std::uniform_real_distribution<double> density(0.05, 0.6);
  std::size_t agree = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    LabelMatrix t(100, 6), p(100, 6);
    std::bernoulli_distribution bt(density(engine)), bp(density(engine));
    for (auto& c : t.cells) c = bt(engine);
    for (auto& c : p.cells) c = bp(engine);
    const auto lib = evaluate_predictions(p, t);
    const auto ref = oracle_metrics(p, t);
    agree += lib.micro_f1 == ref.micro_f1 && std::abs(lib.accuracy - ref.accuracy) < 1e-12 &&
             std::abs(lib.precision - ref.precision) < 1e-12 && std::abs(lib.recall - ref.recall) < 1e-12;
  }
  pass = pass && agree == 1000;
  return {pass, "hand example F1 " + fmt(hand.micro_f1) + " P " + fmt(hand.precision) + " R " +
                    fmt(hand.recall) + " Acc " + fmt(hand.accuracy) + "; " + std::to_string(agree) +
                    "/1000 random batches agree"};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const std::string& name, const std::function<Outcome()>& body) {
    Outcome o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << o.detail << std::endl;
  };

  report(1, "gradient oracle", gradient_oracle);
  report(2, "block attention equivalence", block_attention);
  report(3, "gradient reversal semantics", reversal_semantics);
  report(4, "closed-form losses", closed_form_losses);
  report(5, "shape contract", shape_contract);

  std::optional<ToyRun> run;
  std::string run_error;
  try {
    run = toy_training();
  } catch (const std::exception& e) {
    run_error = e.what();
  }
  auto needs_run = [&](Outcome (*body)(const ToyRun&)) {
    return [&, body]() -> Outcome {
      if (!run) return {false, "toy training failed: " + run_error};
      return body(*run);
    };
  };
  report(6, "overfit capacity", needs_run(overfit_capacity));
  report(7, "adversarial behavior", needs_run(adversarial_behavior));
  report(8, "orthogonality trend", needs_run(orthogonality_trend));
  report(9, "ablation direction", ablation_direction);
  report(10, "determinism", determinism);
  report(11, "metrics oracle", metrics_oracle);

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << "\n";
  return failures == 0 ? 0 : 1;
}
