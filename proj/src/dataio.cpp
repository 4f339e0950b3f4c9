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

#include "mmer/dataio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numbers>
#include <random>
#include <set>

#include <json.hpp>

#include "mmer/errors.hpp"
#include "mmer/rng.hpp"

namespace mmer {

namespace {

using json = nlohmann::json;

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap32(v);
  return v;
}

[[noreturn]] void manifest_error(const std::string& why) {
  throw DataError(DataErrorKind::kInvalidManifest, "manifest: " + why);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  const std::uint32_t le = to_le(v);
  out.write(reinterpret_cast<const char*>(&le), sizeof le);
}

void put_floats(std::ostream& out, const std::vector<float>& values) {
  std::vector<std::uint32_t> raw(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) raw[i] = to_le(std::bit_cast<std::uint32_t>(values[i]));
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * sizeof(std::uint32_t)));
}

bool get_u32(std::istream& in, std::uint32_t& v) {
  std::uint32_t le = 0;
  if (!in.read(reinterpret_cast<char*>(&le), sizeof le)) return false;
  v = to_le(le);
  return true;
}

bool get_floats(std::istream& in, std::vector<float>& values) {
  std::vector<std::uint32_t> raw(values.size());
  if (!in.read(reinterpret_cast<char*>(raw.data()),
               static_cast<std::streamsize>(raw.size() * sizeof(std::uint32_t)))) {
    return false;
  }
  for (std::size_t i = 0; i < raw.size(); ++i) values[i] = std::bit_cast<float>(to_le(raw[i]));
  return true;
}

void check_bundle(const DatasetManifest& manifest, const ModalityBundle& b, const std::string& where) {
  for (std::size_t m = 0; m < 3; ++m) {
    const auto& f = b.features[m];
    const auto& spec = manifest.modalities[m];
    const std::string name(modality_name(kModalities[m]));
    if (f.rows != spec.dim) {
      throw DataError(DataErrorKind::kShapeMismatch, where + ": " + name + " has " +
                                                         std::to_string(f.rows) + " features, expected " +
                                                         std::to_string(spec.dim));
    }
    const bool length_ok = manifest.aligned ? f.cols == spec.length : (f.cols >= 1 && f.cols <= spec.length);
    if (!length_ok) {
      throw DataError(DataErrorKind::kShapeMismatch,
                      where + ": " + name + " has " + std::to_string(f.cols) + " steps, " +
                          (manifest.aligned ? "expected " : "allowed 1..") + std::to_string(spec.length));
    }
    if (f.data.size() != f.rows * f.cols) {
      throw DataError(DataErrorKind::kShapeMismatch, where + ": " + name + " buffer size disagrees with its shape");
    }
  }
  if (b.labels.size() != manifest.label_names.size()) {
    throw DataError(DataErrorKind::kShapeMismatch, where + ": " + std::to_string(b.labels.size()) +
                                                       " labels, expected " +
                                                       std::to_string(manifest.label_names.size()));
  }
}

}  // namespace

void DatasetManifest::validate() const {
  if (label_names.empty()) manifest_error("label_names must not be empty");
  std::set<std::string> unique(label_names.begin(), label_names.end());
  if (unique.size() != label_names.size()) manifest_error("label_names contains duplicates");
  for (std::size_t m = 0; m < 3; ++m) {
    const std::string name(modality_name(kModalities[m]));
    if (modalities[m].dim == 0) manifest_error(name + ".dim must be positive");
    if (modalities[m].length == 0) manifest_error(name + ".length must be positive");
  }
  if (splits.empty()) manifest_error("no splits listed");
  std::set<std::string> split_names;
  std::size_t total = 0;
  for (const auto& s : splits) {
    if (s.name.empty()) manifest_error("split with empty name");
    if (!split_names.insert(s.name).second) manifest_error("duplicate split '" + s.name + "'");
    if (s.file.empty()) manifest_error("split '" + s.name + "' has no file");
    total += s.count;
  }
  if (instances != total) {
    manifest_error("instances is " + std::to_string(instances) + " but splits sum to " + std::to_string(total));
  }
}

const SplitInfo& DatasetManifest::split(const std::string& split_name) const {
  for (const auto& s : splits)
    if (s.name == split_name) return s;
  throw DataError(DataErrorKind::kInvalidManifest, "manifest: no split named '" + split_name + "'");
}

DataShape DatasetManifest::shape() const {
  DataShape s;
  for (std::size_t m = 0; m < 3; ++m) {
    s.dims[m] = modalities[m].dim;
    s.lengths[m] = modalities[m].length;
  }
  s.labels = label_names.size();
  s.aligned = aligned;
  return s;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(DataErrorKind::kMissingFile, "cannot open manifest " + path.string());
  DatasetManifest m;
  try {
    const json j = json::parse(in);
    m.name = j.value("name", std::string{});
    const auto alignment = j.at("alignment").get<std::string>();
    if (alignment != "aligned" && alignment != "unaligned") {
      manifest_error("alignment must be 'aligned' or 'unaligned', got '" + alignment + "'");
    }
    m.aligned = alignment == "aligned";
    m.label_names = j.at("label_names").get<std::vector<std::string>>();
    for (std::size_t k = 0; k < 3; ++k) {
      const auto& entry = j.at("modalities").at(std::string(modality_name(kModalities[k])));
      m.modalities[k].dim = entry.at("dim").get<std::size_t>();
      m.modalities[k].length = entry.at("length").get<std::size_t>();
    }
    for (const auto& [name, entry] : j.at("splits").items()) {
      m.splits.push_back({name, entry.at("count").get<std::size_t>(), entry.at("file").get<std::string>()});
    }
    m.instances = j.at("instances").get<std::size_t>();
  } catch (const json::exception& e) {
    manifest_error(path.string() + ": " + e.what());
  }
  m.validate();
  return m;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  manifest.validate();
  json j;
  j["name"] = manifest.name;
  j["alignment"] = manifest.aligned ? "aligned" : "unaligned";
  j["label_names"] = manifest.label_names;
  for (std::size_t k = 0; k < 3; ++k) {
    j["modalities"][std::string(modality_name(kModalities[k]))] = {
        {"dim", manifest.modalities[k].dim}, {"length", manifest.modalities[k].length}};
  }
  for (const auto& s : manifest.splits) j["splits"][s.name] = {{"count", s.count}, {"file", s.file}};
  j["instances"] = manifest.instances;
  std::ofstream out(path);
  if (!out) throw DataError(DataErrorKind::kIo, "cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw DataError(DataErrorKind::kIo, "failed writing " + path.string());
}

SplitReader::SplitReader(const DatasetManifest& manifest, const std::filesystem::path& file,
                         std::size_t expected_count)
    : manifest_(manifest), path_(file) {
  if (!std::filesystem::exists(file)) {
    throw DataError(DataErrorKind::kMissingFile, "split file not found: " + file.string());
  }
  in_.open(file, std::ios::binary);
  if (!in_) throw DataError(DataErrorKind::kIo, "cannot open " + file.string());
  char magic[8] = {};
  if (!in_.read(magic, sizeof magic) || std::memcmp(magic, kSplitMagic, sizeof magic) != 0) {
    throw DataError(DataErrorKind::kBadMagic, file.string() + ": not a feature split file");
  }
  std::uint32_t count = 0, reserved = 0;
  if (!get_u32(in_, count) || !get_u32(in_, reserved)) {
    throw DataError(DataErrorKind::kTruncated, file.string() + ": truncated header");
  }
  if (count != expected_count) {
    throw DataError(DataErrorKind::kShapeMismatch, file.string() + ": header announces " +
                                                       std::to_string(count) + " records, manifest " +
                                                       std::to_string(expected_count));
  }
  count_ = count;
}

std::optional<ModalityBundle> SplitReader::next() {
  if (index_ >= count_) return std::nullopt;
  const std::string where = path_.string() + ": record " + std::to_string(index_);
  auto truncated = [&] { return DataError(DataErrorKind::kTruncated, where + " is truncated"); };
  ModalityBundle b;
  for (std::size_t m = 0; m < 3; ++m) {
    const auto& spec = manifest_.modalities[m];
    std::size_t steps = spec.length;
    if (!manifest_.aligned) {
      std::uint32_t len = 0;
      if (!get_u32(in_, len)) throw truncated();
      if (len == 0 || len > spec.length) {
        throw DataError(DataErrorKind::kShapeMismatch,
                        where + ": " + std::string(modality_name(kModalities[m])) + " length " +
                            std::to_string(len) + " outside 1.." + std::to_string(spec.length));
      }
      steps = len;
    }
    auto& f = b.features[m];
    f.rows = spec.dim;
    f.cols = steps;
    f.data.resize(f.rows * f.cols);
    if (!get_floats(in_, f.data)) throw truncated();
  }
  b.labels.resize(manifest_.label_names.size());
  if (!get_floats(in_, b.labels)) throw truncated();
  ++index_;
  return b;
}

SplitWriter::SplitWriter(const DatasetManifest& manifest, const std::filesystem::path& file,
                         std::size_t count)
    : manifest_(manifest), path_(file), count_(count) {
  out_.open(file, std::ios::binary | std::ios::trunc);
  if (!out_) throw DataError(DataErrorKind::kIo, "cannot write " + file.string());
  out_.write(kSplitMagic, sizeof kSplitMagic);
  put_u32(out_, static_cast<std::uint32_t>(count));
  put_u32(out_, 0);
}

void SplitWriter::write(const ModalityBundle& bundle) {
  if (written_ >= count_) {
    throw ContractError(path_.string() + ": more records than the announced " + std::to_string(count_));
  }
  check_bundle(manifest_, bundle, path_.string() + ": record " + std::to_string(written_));
  for (const auto& f : bundle.features) {
    if (!manifest_.aligned) put_u32(out_, static_cast<std::uint32_t>(f.cols));
    put_floats(out_, f.data);
  }
  put_floats(out_, bundle.labels);
  if (!out_) throw DataError(DataErrorKind::kIo, "failed writing " + path_.string());
  ++written_;
}

void SplitWriter::close() {
  if (written_ != count_) {
    throw ContractError(path_.string() + ": wrote " + std::to_string(written_) + " of " +
                        std::to_string(count_) + " records");
  }
  out_.close();
  if (!out_) throw DataError(DataErrorKind::kIo, "failed closing " + path_.string());
}

DatasetHandle DatasetHandle::open(const std::filesystem::path& manifest_path) {
  DatasetHandle h;
  h.manifest_ = read_manifest(manifest_path);
  h.dir_ = manifest_path.parent_path();
  return h;
}

SplitReader DatasetHandle::reader(const std::string& split) const {
  const auto& info = manifest_.split(split);
  return SplitReader(manifest_, dir_ / info.file, info.count);
}

std::vector<ModalityBundle> DatasetHandle::read_all(const std::string& split) const {
  auto r = reader(split);
  std::vector<ModalityBundle> out;
  out.reserve(r.count());
  while (auto b = r.next()) out.push_back(std::move(*b));
  return out;
}

const std::vector<ModalityBundle>& Dataset::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "valid") return valid;
  if (name == "test") return test;
  throw DataError(DataErrorKind::kInvalidManifest, "unknown split '" + name + "'");
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  const auto handle = DatasetHandle::open(manifest_path);
  Dataset d;
  d.manifest = handle.manifest();
  for (const char* name : {"train", "valid", "test"}) {
    auto& dst = name == std::string("train") ? d.train : name == std::string("valid") ? d.valid : d.test;
    dst = handle.read_all(name);
  }
  return d;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError(DataErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());
  DatasetManifest m = dataset.manifest;
  m.splits.clear();
  m.instances = 0;
  for (const char* name : {"train", "valid", "test"}) {
    const auto& records = dataset.split(name);
    m.splits.push_back({name, records.size(), std::string(name) + ".bin"});
    m.instances += records.size();
  }
  m.validate();
  for (const auto& s : m.splits) {
    SplitWriter w(m, dir / s.file, s.count);
    for (const auto& b : dataset.split(s.name)) w.write(b);
    w.close();
  }
  write_manifest(m, dir / "manifest.json");
}

void SyntheticSpec::validate() const {
  auto fail = [](const std::string& why) { throw ConfigError("synthetic data: " + why); };
  if (label_names.empty()) fail("need at least one label");
  if (marginals.size() != label_names.size()) fail("one marginal per label required");
  for (double p : marginals)
    if (p < 0 || p > 1) fail("marginals must lie in [0, 1]");
  if (cooccur_source >= label_names.size() || cooccur_target >= label_names.size()) {
    fail("co-occurrence labels out of range");
  }
  if (cooccur_prob < 0 || cooccur_prob > 1) fail("cooccur_prob must lie in [0, 1]");
  if (!label_modalities.empty()) {
    if (label_modalities.size() != label_names.size()) fail("label_modalities needs one entry per label");
    for (const auto& mods : label_modalities)
      for (auto m : mods)
        if (m >= 3) fail("modality index out of range");
  }
  for (std::size_t m = 0; m < 3; ++m) {
    if (dims[m] == 0 || lengths[m] == 0) fail("dims and lengths must be positive");
  }
  if (pattern_rank == 0) fail("pattern_rank must be at least 1");
  if (noise < 0) fail("noise must be non-negative");
  if (min_length_fraction <= 0 || min_length_fraction > 1) fail("min_length_fraction must lie in (0, 1]");
  if (n_train == 0 || n_valid == 0 || n_test == 0) fail("every split needs at least one record");
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const RngStreams streams(spec.seed);
  const std::size_t labels = spec.label_names.size();

  // patterns[j][m]: [dim x max_length] template added when label j is on.
  std::vector<std::array<std::vector<float>, 3>> patterns(labels);
  {
    auto eng = streams.stream("synthetic.patterns");
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t j = 0; j < labels; ++j) {
      std::vector<std::size_t> carriers =
          spec.label_modalities.empty() ? std::vector<std::size_t>{j % 3} : spec.label_modalities[j];
      for (std::size_t m : carriers) {
        const std::size_t dim = spec.dims[m], len = spec.lengths[m];
        std::vector<float> p(dim * len, 0.0f);
        for (std::size_t r = 0; r < spec.pattern_rank; ++r) {
          std::vector<double> a(dim);
          double norm = 0;
          for (auto& x : a) {
            x = gauss(eng);
            norm += x * x;
          }
          norm = std::sqrt(std::max(norm, 1e-12));
          const double freq = 1.0 + std::floor(unit(eng) * 3.0);
          const double phase = unit(eng) * 2.0 * std::numbers::pi;
          for (std::size_t i = 0; i < dim; ++i) {
            for (std::size_t t = 0; t < len; ++t) {
              const double b = std::sin(2.0 * std::numbers::pi * freq * double(t) / double(len) + phase);
              p[i * len + t] += static_cast<float>(spec.amplitude * std::sqrt(double(dim)) * a[i] / norm * b);
            }
          }
        }
        patterns[j][m] = std::move(p);
      }
    }
  }

  auto make_split = [&](const std::string& name, std::size_t n) {
    auto label_eng = streams.stream("synthetic." + name + ".labels");
    auto noise_eng = streams.stream("synthetic." + name + ".noise");
    auto length_eng = streams.stream("synthetic." + name + ".lengths");
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<ModalityBundle> out(n);
    for (auto& b : out) {
      b.labels.assign(labels, 0.0f);
      for (std::size_t j = 0; j < labels; ++j) b.labels[j] = unit(label_eng) < spec.marginals[j] ? 1.0f : 0.0f;
      const double u = unit(label_eng);
      if (b.labels[spec.cooccur_source] > 0.5f && u < spec.cooccur_prob) b.labels[spec.cooccur_target] = 1.0f;
      for (std::size_t m = 0; m < 3; ++m) {
        const std::size_t max_len = spec.lengths[m];
        std::size_t len = max_len;
        if (!spec.aligned) {
          const auto lo = static_cast<std::size_t>(std::ceil(spec.min_length_fraction * double(max_len)));
          std::uniform_int_distribution<std::size_t> pick(std::max<std::size_t>(lo, 1), max_len);
          len = pick(length_eng);
        }
        auto& f = b.features[m];
        f.rows = spec.dims[m];
        f.cols = len;
        f.data.resize(f.rows * f.cols);
        for (std::size_t i = 0; i < f.rows; ++i) {
          for (std::size_t t = 0; t < len; ++t) {
            double v = spec.noise * gauss(noise_eng);
            for (std::size_t j = 0; j < labels; ++j) {
              if (b.labels[j] > 0.5f && !patterns[j][m].empty()) v += patterns[j][m][i * max_len + t];
            }
            f.data[i * len + t] = static_cast<float>(v);
          }
        }
      }
    }
    return out;
  };

  Dataset d;
  d.manifest.name = spec.name;
  d.manifest.aligned = spec.aligned;
  d.manifest.label_names = spec.label_names;
  for (std::size_t m = 0; m < 3; ++m) d.manifest.modalities[m] = {spec.dims[m], spec.lengths[m]};
  d.train = make_split("train", spec.n_train);
  d.valid = make_split("valid", spec.n_valid);
  d.test = make_split("test", spec.n_test);
  d.manifest.splits = {{"train", spec.n_train, "train.bin"},
                       {"valid", spec.n_valid, "valid.bin"},
                       {"test", spec.n_test, "test.bin"}};
  d.manifest.instances = spec.n_train + spec.n_valid + spec.n_test;
  return d;
}

template <typename T>
Tensor<T> to_tensor(const FeatureMatrix& m) {
  return Tensor<T>::from({m.rows, m.cols}, std::vector<T>(m.data.begin(), m.data.end()));
}

template <typename T>
std::array<Tensor<T>, 3> to_tensors(const ModalityBundle& bundle) {
  return {to_tensor<T>(bundle.features[0]), to_tensor<T>(bundle.features[1]),
          to_tensor<T>(bundle.features[2])};
}

template Tensor<float> to_tensor<float>(const FeatureMatrix&);
template Tensor<double> to_tensor<double>(const FeatureMatrix&);
template std::array<Tensor<float>, 3> to_tensors<float>(const ModalityBundle&);
template std::array<Tensor<double>, 3> to_tensors<double>(const ModalityBundle&);

}  // namespace mmer
