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

// Dataset container.
//
// A dataset directory holds manifest.json plus one binary file per split.
// Each split file starts with a 16-byte header:
//
//   bytes 0..7   magic "MMERFT01"
//   bytes 8..11  record count (uint32, little-endian)
//   bytes 12..15 reserved, zero
//
// followed by back-to-back records. A record is the visual, audio and text
// matrices (feature-major: d_m rows x steps columns, row-major) and then the
// label vector of l values; every value is a little-endian IEEE-754 float32.
// In unaligned datasets each matrix is preceded by its true step count as a
// uint32, so shorter sequences are stored without padding.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "mmer/model.hpp"

namespace mmer {

inline constexpr char kSplitMagic[8] = {'M', 'M', 'E', 'R', 'F', 'T', '0', '1'};
inline constexpr std::size_t kSplitHeaderBytes = 16;

struct ModalitySpec {
  std::size_t dim = 0;
  // Exact length when aligned, maximum length otherwise.
  std::size_t length = 0;
};

struct SplitInfo {
  std::string name;
  std::size_t count = 0;
  std::string file;
};

struct DatasetManifest {
  std::string name;
  bool aligned = true;
  std::vector<std::string> label_names;
  std::array<ModalitySpec, 3> modalities{};
  std::vector<SplitInfo> splits;
  std::size_t instances = 0;

  // Throws DataError(kInvalidManifest) describing the first violation.
  void validate() const;
  const SplitInfo& split(const std::string& name) const;
  DataShape shape() const;
};

DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  float at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

struct ModalityBundle {
  std::array<FeatureMatrix, 3> features;
  std::vector<float> labels;
};

// Streams one split file in stored order, validating each record against
// the manifest.
class SplitReader {
 public:
  SplitReader(const DatasetManifest& manifest, const std::filesystem::path& file,
              std::size_t expected_count);

  // nullopt after the last record.
  std::optional<ModalityBundle> next();
  std::size_t count() const { return count_; }
  std::size_t position() const { return index_; }

 private:
  DatasetManifest manifest_;
  std::filesystem::path path_;
  std::ifstream in_;
  std::size_t count_ = 0;
  std::size_t index_ = 0;
};

class SplitWriter {
 public:
  SplitWriter(const DatasetManifest& manifest, const std::filesystem::path& file,
              std::size_t count);
  void write(const ModalityBundle& bundle);
  // Verifies the announced record count was written.
  void close();

 private:
  DatasetManifest manifest_;
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t count_ = 0;
  std::size_t written_ = 0;
};

// Opened dataset: manifest plus the directory its split files live in.
class DatasetHandle {
 public:
  static DatasetHandle open(const std::filesystem::path& manifest_path);

  const DatasetManifest& manifest() const { return manifest_; }
  const std::filesystem::path& directory() const { return dir_; }
  SplitReader reader(const std::string& split) const;
  std::vector<ModalityBundle> read_all(const std::string& split) const;

 private:
  DatasetManifest manifest_;
  std::filesystem::path dir_;
};

// In-memory dataset used by training and evaluation.
struct Dataset {
  DatasetManifest manifest;
  std::vector<ModalityBundle> train;
  std::vector<ModalityBundle> valid;
  std::vector<ModalityBundle> test;

  const std::vector<ModalityBundle>& split(const std::string& name) const;
};

Dataset load_dataset(const std::filesystem::path& manifest_path);

// Writes manifest.json and one .bin per split into `dir`.
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

struct SyntheticSpec {
  std::string name = "synthetic";
  bool aligned = true;
  std::array<std::size_t, 3> dims = {8, 8, 12};
  // Exact (aligned) or maximum (unaligned) lengths.
  std::array<std::size_t, 3> lengths = {10, 10, 10};
  std::vector<std::string> label_names = {"angry", "disgust", "fear", "happy", "sad", "surprise"};
  std::vector<double> marginals = {0.3, 0.25, 0.2, 0.3, 0.25, 0.2};
  // When `cooccur_source` is active, `cooccur_target` is switched on with
  // probability `cooccur_prob`.
  std::size_t cooccur_source = 5;
  std::size_t cooccur_target = 3;
  double cooccur_prob = 0.85;
  // label_modalities[j] lists the modalities carrying label j's pattern.
  // Empty means round-robin: label j -> modality j % 3.
  std::vector<std::vector<std::size_t>> label_modalities;
  std::size_t pattern_rank = 1;
  double amplitude = 1.0;
  double noise = 1.0;
  // Unaligned only: true lengths drawn uniformly from
  // [ceil(min_length_fraction * max), max].
  double min_length_fraction = 0.5;
  std::size_t n_train = 200;
  std::size_t n_valid = 50;
  std::size_t n_test = 50;
  std::uint64_t seed = 0;

  void validate() const;
};

// Pure function of (spec, seed).
Dataset generate_synthetic(const SyntheticSpec& spec);

// Feature tensor of one modality, [dim x steps].
template <typename T>
Tensor<T> to_tensor(const FeatureMatrix& m);

template <typename T>
std::array<Tensor<T>, 3> to_tensors(const ModalityBundle& bundle);

}  // namespace mmer
