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

// Checkpoint container.
//
// A text header followed by a binary payload:
//
//   MMERCKPT
//   version 1
//   dtype f64
//   epoch 12
//   step 480
//   rng shuffle <engine state>
//   block <name> <param|adam_m|adam_v> <dims, e.g. 16x8> <byte offset> <count>
//   ...
//   end
//
// Block values follow the "end\n" line, little-endian IEEE-754. Parameter
// blocks use the header dtype (f32 or f64); optimizer moments are always f64.

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mmer/tensor.hpp"

namespace mmer {

enum class BlockKind { kParam, kAdamFirst, kAdamSecond };

struct CheckpointBlock {
  std::string name;
  BlockKind kind = BlockKind::kParam;
  Shape shape;
  std::vector<double> values;
};

struct Checkpoint {
  // "f32" or "f64".
  std::string dtype = "f64";
  std::size_t epoch = 0;
  std::size_t step = 0;
  std::map<std::string, std::string> rng;
  std::vector<CheckpointBlock> blocks;

  const CheckpointBlock* find(const std::string& name, BlockKind kind) const;

  std::string serialize() const;
  static Checkpoint deserialize(std::string_view bytes);

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
};

template <typename T>
constexpr const char* dtype_name() {
  return sizeof(T) == 4 ? "f32" : "f64";
}

}  // namespace mmer
