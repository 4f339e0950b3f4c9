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
#include <cstdlib>
#include <functional>
#include <fstream>
#include <iterator>
#include <sstream>

#include <sys/wait.h>

#include "mmer/config.hpp"
#include "mmer/dataio.hpp"
#include "mmer/errors.hpp"
#include "support.hpp"

using namespace mmer;
using namespace mmer::testing;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << bytes;
}

DataErrorKind kind_of(const std::function<void()>& body) {
  try {
    body();
  } catch (const DataError& e) {
    return e.kind();
  }
  FAIL("expected a DataError");
  return DataErrorKind::kIo;
}

void check_equal(const std::vector<ModalityBundle>& a, const std::vector<ModalityBundle>& b) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t m = 0; m < 3; ++m) {
      CHECK(a[i].features[m].rows == b[i].features[m].rows);
      CHECK(a[i].features[m].cols == b[i].features[m].cols);
      CHECK(a[i].features[m].data == b[i].features[m].data);
    }
    CHECK(a[i].labels == b[i].labels);
  }
}

SyntheticSpec small_spec() {
  SyntheticSpec spec;
  spec.dims = {4, 4, 6};
  spec.lengths = {5, 5, 5};
  spec.n_train = 20;
  spec.n_valid = 6;
  spec.n_test = 6;
  spec.seed = 11;
  return spec;
}

// Dense least squares with a tiny ridge, solved by Gaussian elimination with
// partial pivoting. Rows of `x` are samples.
std::vector<double> ridge_solve(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                                double ridge) {
  const std::size_t p = x.front().size();
  std::vector<std::vector<double>> a(p, std::vector<double>(p + 1, 0.0));
  for (std::size_t n = 0; n < x.size(); ++n) {
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t j = 0; j < p; ++j) a[i][j] += x[n][i] * x[n][j];
      a[i][p] += x[n][i] * y[n];
    }
  }
  for (std::size_t i = 0; i < p; ++i) a[i][i] += ridge;
  for (std::size_t col = 0; col < p; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < p; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    std::swap(a[col], a[pivot]);
    for (std::size_t r = 0; r < p; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c <= p; ++c) a[r][c] -= f * a[col][c];
    }
  }
  std::vector<double> w(p);
  for (std::size_t i = 0; i < p; ++i) w[i] = a[i][p] / a[i][i];
  return w;
}

std::vector<double> flatten(const ModalityBundle& b) {
  std::vector<double> out;
  for (const auto& f : b.features)
    for (float v : f.data) out.push_back(v);
  return out;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + MMER_CLI_PATH + "\" " + args + " > \"" + log.string() +
                          "\" 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("aligned dataset round-trips value-exactly") {
  TempDir dir("dataio_aligned");
  const auto data = generate_synthetic(small_spec());
  write_dataset(data, dir.path());
  const auto back = load_dataset(dir.path() / "manifest.json");
  CHECK(back.manifest.aligned);
  CHECK(back.manifest.instances == 32);
  CHECK(back.manifest.label_names == data.manifest.label_names);
  check_equal(back.train, data.train);
  check_equal(back.valid, data.valid);
  check_equal(back.test, data.test);
}

TEST_CASE("unaligned dataset round-trips with per-record lengths") {
  TempDir dir("dataio_unaligned");
  auto spec = small_spec();
  spec.aligned = false;
  spec.lengths = {9, 7, 5};
  spec.min_length_fraction = 0.3;
  const auto data = generate_synthetic(spec);
  bool varied = false;
  for (const auto& b : data.train) {
    for (std::size_t m = 0; m < 3; ++m) {
      CHECK(b.features[m].cols >= static_cast<std::size_t>(std::ceil(0.3 * double(spec.lengths[m]))));
      CHECK(b.features[m].cols <= spec.lengths[m]);
      varied = varied || b.features[m].cols != data.train.front().features[m].cols;
    }
  }
  CHECK(varied);
  write_dataset(data, dir.path());
  const auto back = load_dataset(dir.path() / "manifest.json");
  CHECK_FALSE(back.manifest.aligned);
  check_equal(back.train, data.train);
  check_equal(back.test, data.test);
}

TEST_CASE("a 35x60 aligned modality loads as 35x60") {
  TempDir dir("dataio_shape");
  auto spec = small_spec();
  spec.dims = {35, 74, 300};
  spec.lengths = {60, 60, 60};
  spec.n_train = 2;
  spec.n_valid = 1;
  spec.n_test = 1;
  write_dataset(generate_synthetic(spec), dir.path());
  const auto handle = DatasetHandle::open(dir.path() / "manifest.json");
  auto reader = handle.reader("train");
  const auto first = reader.next();
  REQUIRE(first.has_value());
  CHECK(first->features[0].rows == 35);
  CHECK(first->features[0].cols == 60);
  CHECK(first->features[2].rows == 300);
  const auto t = to_tensor<double>(first->features[0]);
  CHECK(t.shape() == Shape{35, 60});
  CHECK(t.at(3, 17) == double(first->features[0].at(3, 17)));
  REQUIRE(reader.next().has_value());
  CHECK_FALSE(reader.next().has_value());
}

TEST_CASE("split file corruption maps to distinct error kinds") {
  TempDir dir("dataio_errors");
  const auto data = generate_synthetic(small_spec());
  write_dataset(data, dir.path());
  const auto manifest = dir.path() / "manifest.json";
  const auto train = dir.path() / "train.bin";
  const std::string pristine = slurp(train);

  SUBCASE("missing split file") {
    fs::remove(train);
    CHECK(kind_of([&] { load_dataset(manifest); }) == DataErrorKind::kMissingFile);
  }
  SUBCASE("bad magic") {
    auto bytes = pristine;
    bytes[0] = 'X';
    spit(train, bytes);
    CHECK(kind_of([&] { load_dataset(manifest); }) == DataErrorKind::kBadMagic);
  }
  SUBCASE("header count disagrees with manifest") {
    auto bytes = pristine;
    bytes[8] = static_cast<char>(bytes[8] + 1);
    spit(train, bytes);
    CHECK(kind_of([&] { load_dataset(manifest); }) == DataErrorKind::kShapeMismatch);
  }
  SUBCASE("truncated record names its index") {
    const std::size_t record_bytes = (pristine.size() - kSplitHeaderBytes) / 20;
    spit(train, pristine.substr(0, kSplitHeaderBytes + record_bytes * 7 + record_bytes / 2));
    try {
      load_dataset(manifest);
      FAIL("expected a DataError");
    } catch (const DataError& e) {
      CHECK(e.kind() == DataErrorKind::kTruncated);
      CHECK(std::string(e.what()).find("record 7") != std::string::npos);
    }
  }
  SUBCASE("missing manifest") {
    CHECK(kind_of([&] { load_dataset(dir.path() / "nope.json"); }) == DataErrorKind::kMissingFile);
  }
  SUBCASE("malformed manifest JSON") {
    spit(manifest, "{\"alignment\": ");
    CHECK(kind_of([&] { load_dataset(manifest); }) == DataErrorKind::kInvalidManifest);
  }
}

TEST_CASE("unaligned length outside the allowed range is rejected") {
  TempDir dir("dataio_badlen");
  auto spec = small_spec();
  spec.aligned = false;
  write_dataset(generate_synthetic(spec), dir.path());
  const auto train = dir.path() / "train.bin";
  auto bytes = slurp(train);
  for (std::uint32_t bad : {0u, 6u}) {
    for (std::size_t k = 0; k < 4; ++k) bytes[kSplitHeaderBytes + k] = static_cast<char>((bad >> (8 * k)) & 0xFF);
    spit(train, bytes);
    CHECK(kind_of([&] { load_dataset(dir.path() / "manifest.json"); }) == DataErrorKind::kShapeMismatch);
  }
}

TEST_CASE("manifest validation") {
  DatasetManifest m = generate_synthetic(small_spec()).manifest;
  CHECK_NOTHROW(m.validate());
  auto expect_invalid = [](DatasetManifest bad) {
    CHECK(kind_of([&] { bad.validate(); }) == DataErrorKind::kInvalidManifest);
  };
  auto bad = m;
  bad.label_names.clear();
  expect_invalid(bad);
  bad = m;
  bad.label_names[1] = bad.label_names[0];
  expect_invalid(bad);
  bad = m;
  bad.instances += 1;
  expect_invalid(bad);
  bad = m;
  bad.modalities[1].dim = 0;
  expect_invalid(bad);
  bad = m;
  bad.splits.push_back(bad.splits.front());
  bad.instances += bad.splits.front().count;
  expect_invalid(bad);
  CHECK(kind_of([&] { m.split("holdout"); }) == DataErrorKind::kInvalidManifest);
}

TEST_CASE("writer rejects records that disagree with the manifest") {
  TempDir dir("dataio_writer");
  auto data = generate_synthetic(small_spec());
  auto record = data.train.front();
  record.features[1].rows = 3;
  record.features[1].data.resize(3 * record.features[1].cols);
  SplitWriter writer(data.manifest, dir.path() / "x.bin", 1);
  CHECK(kind_of([&] { writer.write(record); }) == DataErrorKind::kShapeMismatch);
}

TEST_CASE("same seed gives byte-identical files, other seeds differ") {
  TempDir a("dataio_det_a"), b("dataio_det_b"), c("dataio_det_c");
  auto spec = small_spec();
  write_dataset(generate_synthetic(spec), a.path());
  write_dataset(generate_synthetic(spec), b.path());
  spec.seed += 1;
  write_dataset(generate_synthetic(spec), c.path());
  for (const char* f : {"manifest.json", "train.bin", "valid.bin", "test.bin"}) {
    CHECK(slurp(a.path() / f) == slurp(b.path() / f));
  }
  CHECK(slurp(a.path() / "train.bin") != slurp(c.path() / "train.bin"));
}

TEST_CASE("noise-free features are exactly linear in the labels") {
  auto spec = small_spec();
  spec.noise = 0.0;
  spec.n_train = 120;
  const auto data = generate_synthetic(spec);
  std::vector<std::vector<double>> x;
  for (const auto& b : data.train) x.push_back(flatten(b));
  for (std::size_t j = 0; j < spec.label_names.size(); ++j) {
    std::vector<double> y;
    for (const auto& b : data.train) y.push_back(b.labels[j]);
    const auto w = ridge_solve(x, y, 1e-9);
    for (const auto& split : {&data.train, &data.test}) {
      for (const auto& b : *split) {
        const auto f = flatten(b);
        double score = 0;
        for (std::size_t k = 0; k < f.size(); ++k) score += f[k] * w[k];
        CHECK((score >= 0.5) == (b.labels[j] > 0.5f));
        CHECK(std::abs(score - b.labels[j]) < 1e-3);
      }
    }
  }
}

TEST_CASE("label values are binary and co-occurrence is lifted") {
  auto spec = small_spec();
  spec.dims = {1, 1, 1};
  spec.lengths = {1, 1, 1};
  spec.n_train = 10000;
  const auto data = generate_synthetic(spec);
  double with_source = 0, both = 0, target = 0;
  for (const auto& b : data.train) {
    for (float y : b.labels) CHECK((y == 0.0f || y == 1.0f));
    target += b.labels[3];
    if (b.labels[5] == 1.0f) {
      with_source += 1;
      both += b.labels[3];
    }
  }
  const double p_target = target / 10000.0;
  const double p_given = both / with_source;
  CHECK(p_given > p_target + 0.2);
  CHECK(p_given > 0.8);
}

TEST_CASE("synthetic spec validation") {
  auto expect_config_error = [](SyntheticSpec bad) {
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("synthetic data"), ConfigError);
  };
  auto bad = small_spec();
  bad.dims[2] = 0;
  expect_config_error(bad);
  bad = small_spec();
  bad.marginals.pop_back();
  expect_config_error(bad);
  bad = small_spec();
  bad.n_valid = 0;
  expect_config_error(bad);
  bad = small_spec();
  bad.noise = -1;
  expect_config_error(bad);
  bad = small_spec();
  bad.cooccur_target = 9;
  expect_config_error(bad);
}

TEST_CASE("command-line exit codes") {
  TempDir dir("dataio_cli_codes");
  const auto log = dir.path() / "out.txt";
  const auto data = dir.path() / "data";
  CHECK(run_cli("--out-dir \"" + data.string() + "\" gen-synth --dims 4,4,6 --lengths 5,5,5 "
                "--n-train 16 --n-valid 4 --n-test 4", log) == 0);
  CHECK(fs::exists(data / "manifest.json"));

  CHECK(run_cli("frobnicate", log) == 1);
  CHECK(run_cli("gen-synth --no-such-flag", log) == 1);
  CHECK(run_cli("gen-synth --dims 4,4", log) == 2);

  const auto cfg = dir.path() / "bad.cfg";
  spit(cfg, to_text(tiny_config(1)) + "warp_factor = 9\n");
  CHECK(run_cli("--out-dir \"" + (dir.path() / "run").string() + "\" train --config \"" + cfg.string() +
                "\" --manifest \"" + (data / "manifest.json").string() + "\"", log) == 2);
  CHECK(slurp(log).find("warp_factor") != std::string::npos);

  const auto good = dir.path() / "good.cfg";
  spit(good, to_text(tiny_config(1)));
  CHECK(run_cli("--out-dir \"" + (dir.path() / "run").string() + "\" train --config \"" + good.string() +
                "\" --manifest \"" + (dir.path() / "missing.json").string() + "\"", log) == 2);
  CHECK(slurp(log).find("data error") != std::string::npos);

  CHECK(run_cli("grad-check --tolerance 1e-12 --max-per-tensor 1", log) == 3);
}

TEST_CASE("command-line generate, train, evaluate and export") {
  TempDir dir("dataio_cli_e2e");
  const auto log = dir.path() / "out.txt";
  const auto data = dir.path() / "data";
  const auto run = dir.path() / "run";
  const auto manifest = (data / "manifest.json").string();
  REQUIRE(run_cli("--seed 4 --out-dir \"" + data.string() + "\" gen-synth --unaligned --dims 4,4,6 "
                  "--lengths 6,5,4 --n-train 24 --n-valid 8 --n-test 8", log) == 0);
  const auto cfg = dir.path() / "tiny.cfg";
  spit(cfg, to_text(tiny_config(2)));
  const std::string common = " --config \"" + cfg.string() + "\" --manifest \"" + manifest + "\"";
  REQUIRE(run_cli("--out-dir \"" + run.string() + "\" train" + common, log) == 0);
  CHECK(fs::exists(run / "best.ckpt"));
  CHECK(fs::exists(run / "last.ckpt"));
  CHECK(fs::exists(run / "train_log.csv"));
  CHECK(fs::exists(run / "config.cfg"));

  const std::string ckpt = " --checkpoint \"" + (run / "best.ckpt").string() + "\"";
  REQUIRE(run_cli("--out-dir \"" + run.string() + "\" eval" + common + ckpt, log) == 0);
  const auto csv = slurp(run / "eval_test.csv");
  CHECK(csv.rfind("split,acc,p,r,microf1\ntest,", 0) == 0);

  REQUIRE(run_cli("--out-dir \"" + (run / "corr").string() + "\" export-correlations" + common + ckpt, log) ==
          0);
  std::size_t heads = 0;
  for (const auto& entry : fs::directory_iterator(run / "corr")) heads += entry.is_regular_file();
  CHECK(heads == tiny_config(2).heads_label);

  REQUIRE(run_cli("--out-dir \"" + run.string() + "\" export-embeddings --split valid" + common + ckpt, log) ==
          0);
  std::istringstream lines(slurp(run / "embeddings_valid.csv"));
  std::string line;
  std::size_t count = 0;
  while (std::getline(lines, line)) ++count;
  CHECK(count == 1 + 8 * 9);

  CHECK(run_cli("--out-dir \"" + run.string() + "\" eval" + common + " --checkpoint \"" +
                (run / "nothing.ckpt").string() + "\"", log) == 2);
}
