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

#include "mmer/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mmer/errors.hpp"

namespace mmer {

namespace {

constexpr std::string_view kMagic = "MMERCKPT";
constexpr int kVersion = 1;

const char* kind_name(BlockKind k) {
  switch (k) {
    case BlockKind::kParam: return "param";
    case BlockKind::kAdamFirst: return "adam_m";
    case BlockKind::kAdamSecond: return "adam_v";
  }
  return "?";
}

BlockKind parse_kind(const std::string& s) {
  if (s == "param") return BlockKind::kParam;
  if (s == "adam_m") return BlockKind::kAdamFirst;
  if (s == "adam_v") return BlockKind::kAdamSecond;
  throw DataError(DataErrorKind::kInvalidManifest, "checkpoint: unknown block kind '" + s + "'");
}

std::size_t element_bytes(const Checkpoint& c, BlockKind k) {
  return k == BlockKind::kParam && c.dtype == "f32" ? 4 : 8;
}

std::string dims_str(const Shape& s) {
  if (s.empty()) return "scalar";
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
  return out;
}

Shape parse_dims(const std::string& s) {
  if (s == "scalar") return {};
  Shape out;
  std::istringstream in(s);
  std::string part;
  while (std::getline(in, part, 'x')) out.push_back(std::stoull(part));
  return out;
}

template <typename U>
void append_le(std::string& out, U v) {
  if constexpr (std::endian::native == std::endian::big) {
    if constexpr (sizeof(U) == 4) v = __builtin_bswap32(v);
    else v = __builtin_bswap64(v);
  }
  char buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  out.append(buf, sizeof(U));
}

template <typename U>
U read_le(const char* p) {
  U v;
  std::memcpy(&v, p, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) {
    if constexpr (sizeof(U) == 4) v = __builtin_bswap32(v);
    else v = __builtin_bswap64(v);
  }
  return v;
}

[[noreturn]] void corrupt(const std::string& why) {
  throw DataError(DataErrorKind::kTruncated, "checkpoint: " + why);
}

}  // namespace

const CheckpointBlock* Checkpoint::find(const std::string& name, BlockKind kind) const {
  for (const auto& b : blocks)
    if (b.name == name && b.kind == kind) return &b;
  return nullptr;
}

std::string Checkpoint::serialize() const {
  if (dtype != "f32" && dtype != "f64") throw ContractError("checkpoint: dtype must be f32 or f64");
  std::ostringstream head;
  head << kMagic << "\nversion " << kVersion << "\ndtype " << dtype << "\nepoch " << epoch
       << "\nstep " << step << "\n";
  for (const auto& [name, state] : rng) head << "rng " << name << " " << state << "\n";
  std::string payload;
  for (const auto& b : blocks) {
    if (b.values.size() != shape_numel(b.shape)) {
      throw ContractError("checkpoint: block " + b.name + " has " + std::to_string(b.values.size()) +
                          " values for shape " + dims_str(b.shape));
    }
    head << "block " << b.name << " " << kind_name(b.kind) << " " << dims_str(b.shape) << " "
         << payload.size() << " " << b.values.size() << "\n";
    const bool narrow = element_bytes(*this, b.kind) == 4;
    for (double v : b.values) {
      if (narrow) append_le(payload, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      else append_le(payload, std::bit_cast<std::uint64_t>(v));
    }
  }
  head << "end\n";
  return head.str() + payload;
}

Checkpoint Checkpoint::deserialize(std::string_view bytes) {
  Checkpoint c;
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) corrupt("header ends early");
    std::string line(bytes.substr(pos, nl - pos));
    pos = nl + 1;
    return line;
  };
  if (next_line() != kMagic) throw DataError(DataErrorKind::kBadMagic, "checkpoint: bad magic");
  struct Pending {
    CheckpointBlock block;
    std::size_t offset;
    std::size_t count;
  };
  std::vector<Pending> pending;
  for (;;) {
    const std::string line = next_line();
    if (line == "end") break;
    std::istringstream in(line);
    std::string key;
    in >> key;
    if (key == "version") {
      int v = 0;
      in >> v;
      if (v != kVersion) corrupt("unsupported version " + std::to_string(v));
    } else if (key == "dtype") {
      in >> c.dtype;
      if (c.dtype != "f32" && c.dtype != "f64") corrupt("unknown dtype " + c.dtype);
    } else if (key == "epoch") {
      in >> c.epoch;
    } else if (key == "step") {
      in >> c.step;
    } else if (key == "rng") {
      std::string name;
      in >> name;
      std::string state;
      std::getline(in >> std::ws, state);
      c.rng[name] = state;
    } else if (key == "block") {
      Pending p;
      std::string kind, dims;
      if (!(in >> p.block.name >> kind >> dims >> p.offset >> p.count)) corrupt("bad block line: " + line);
      p.block.kind = parse_kind(kind);
      p.block.shape = parse_dims(dims);
      if (shape_numel(p.block.shape) != p.count) corrupt("block " + p.block.name + " count disagrees with dims");
      pending.push_back(std::move(p));
    } else {
      corrupt("unknown header line: " + line);
    }
  }
  const std::string_view payload = bytes.substr(pos);
  for (auto& p : pending) {
    const std::size_t width = element_bytes(c, p.block.kind);
    if (p.offset + p.count * width > payload.size()) corrupt("block " + p.block.name + " is truncated");
    p.block.values.resize(p.count);
    const char* base = payload.data() + p.offset;
    for (std::size_t i = 0; i < p.count; ++i) {
      p.block.values[i] = width == 4 ? double(std::bit_cast<float>(read_le<std::uint32_t>(base + 4 * i)))
                                     : std::bit_cast<double>(read_le<std::uint64_t>(base + 8 * i));
    }
    c.blocks.push_back(std::move(p.block));
  }
  return c;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  const std::string bytes = serialize();
  // Write to a sibling file first so a crash never leaves a half-written checkpoint.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(DataErrorKind::kIo, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError(DataErrorKind::kIo, "failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError(DataErrorKind::kIo, "cannot move checkpoint into " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataErrorKind::kMissingFile, "checkpoint not found: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

}  // namespace mmer
