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

#include "mmer/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "mmer/errors.hpp"

namespace mmer {

std::string_view modality_name(Modality m) {
  switch (m) {
    case Modality::kVisual: return "visual";
    case Modality::kAudio: return "audio";
    case Modality::kText: return "text";
  }
  return "?";
}

FusionOrder::FusionOrder(std::array<Stream, 4> order) : order_(order) {
  std::set<Stream> seen(order.begin(), order.end());
  if (seen.size() != 4) throw ConfigError("fusion_order: must use each of v, a, t, c exactly once");
}

FusionOrder FusionOrder::parse(std::string_view text) {
  std::array<Stream, 4> order{};
  std::size_t n = 0;
  for (char ch : text) {
    if (ch == ',' || ch == ' ' || ch == '[' || ch == ']') continue;
    if (n == 4) throw ConfigError("fusion_order: more than four symbols in '" + std::string(text) + "'");
    switch (ch) {
      case 'v': order[n++] = Stream::kVisual; break;
      case 'a': order[n++] = Stream::kAudio; break;
      case 't': order[n++] = Stream::kText; break;
      case 'c': order[n++] = Stream::kCommon; break;
      default:
        throw ConfigError("fusion_order: unknown symbol '" + std::string(1, ch) + "'");
    }
  }
  if (n != 4) throw ConfigError("fusion_order: expected four symbols in '" + std::string(text) + "'");
  return FusionOrder(order);
}

std::string FusionOrder::str() const {
  std::string s;
  for (std::size_t i = 0; i < 4; ++i) {
    if (i) s += ',';
    switch (order_[i]) {
      case Stream::kVisual: s += 'v'; break;
      case Stream::kAudio: s += 'a'; break;
      case Stream::kText: s += 't'; break;
      case Stream::kCommon: s += 'c'; break;
    }
  }
  return s;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& why) {
    throw ConfigError(key + ": " + why);
  };
  if (d_model == 0) fail("d_model", "must be positive");
  if (encoder_heads == 0 || d_model % encoder_heads) fail("encoder_heads", "must divide d_model");
  if (heads_label == 0 || d_model % heads_label) fail("heads_label", "must divide d_model");
  if (heads_modal == 0 || d_model % heads_modal) fail("heads_modal", "must divide d_model");
  if (layers_visual == 0) fail("layers_visual", "must be at least 1");
  if (layers_audio == 0) fail("layers_audio", "must be at least 1");
  if (layers_text == 0) fail("layers_text", "must be at least 1");
  if (layers_cross == 0) fail("layers_cross", "must be at least 1");
  if (amr_hidden_layers == 0) fail("amr_hidden_layers", "must be at least 1");
  if (alpha < 0) fail("alpha", "must be non-negative");
  if (beta < 0) fail("beta", "must be non-negative");
  if (gamma < 0) fail("gamma", "must be non-negative");
  if (batch_size == 0) fail("batch_size", "must be at least 1");
  if (!(base_lr > 0)) fail("base_lr", "must be positive");
  if (warmup_fraction < 0 || warmup_fraction > 1) fail("warmup_fraction", "must lie in [0, 1]");
  if (epochs == 0) fail("epochs", "must be at least 1");
  if (dropout < 0 || dropout >= 1) fail("dropout", "must lie in [0, 1)");
  if (weight_decay < 0) fail("weight_decay", "must be non-negative");
  if (grad_clip < 0) fail("grad_clip", "must be non-negative");
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a real number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

template <typename E>
E parse_enum(const std::string& key, const std::string& v,
             std::initializer_list<std::pair<const char*, E>> choices) {
  for (const auto& [name, value] : choices)
    if (v == name) return value;
  std::string allowed;
  for (const auto& c : choices) allowed += std::string(allowed.empty() ? "" : "|") + c.first;
  throw ConfigError(key + ": expected one of " + allowed + ", got '" + v + "'");
}

template <typename E>
const char* enum_name(E v, std::initializer_list<std::pair<const char*, E>> choices) {
  for (const auto& [name, value] : choices)
    if (v == value) return name;
  return "?";
}

const std::initializer_list<std::pair<const char*, DiffSign>> kDiffSigns = {
    {"positive", DiffSign::kPositive}, {"negative", DiffSign::kNegative}};
const std::initializer_list<std::pair<const char*, TokenEmbedding>> kTokens = {
    {"vector", TokenEmbedding::kVector}, {"scalar", TokenEmbedding::kScalar}};
const std::initializer_list<std::pair<const char*, DiscriminatorBias>> kBiases = {
    {"broadcast", DiscriminatorBias::kBroadcast}, {"per_position", DiscriminatorBias::kPerPosition}};
const std::initializer_list<std::pair<const char*, AccuracyMode>> kAccuracy = {
    {"jaccard", AccuracyMode::kJaccard}, {"subset", AccuracyMode::kSubset}};

struct Field {
  std::function<void(ModelConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const ModelConfig&)> get;
};

std::string fmt_real(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

#define SIZE_FIELD(name)                                                                     \
  {#name, {[](ModelConfig& c, const std::string& k, const std::string& v) {                  \
             c.name = parse_size(k, v);                                                      \
           },                                                                                \
           [](const ModelConfig& c) { return std::to_string(c.name); }}}
#define REAL_FIELD(name)                                                                     \
  {#name, {[](ModelConfig& c, const std::string& k, const std::string& v) {                  \
             c.name = parse_real(k, v);                                                      \
           },                                                                                \
           [](const ModelConfig& c) { return fmt_real(c.name); }}}
#define FLAG_FIELD(name)                                                                     \
  {#name, {[](ModelConfig& c, const std::string& k, const std::string& v) {                  \
             c.ablation.name = parse_bool(k, v);                                             \
           },                                                                                \
           [](const ModelConfig& c) { return std::string(c.ablation.name ? "true" : "false"); }}}
#define ENUM_FIELD(name, table)                                                              \
  {#name, {[](ModelConfig& c, const std::string& k, const std::string& v) {                  \
             c.name = parse_enum(k, v, table);                                               \
           },                                                                                \
           [](const ModelConfig& c) { return std::string(enum_name(c.name, table)); }}}

// Ordered so to_text() output is stable.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      SIZE_FIELD(d_model),
      SIZE_FIELD(encoder_heads),
      SIZE_FIELD(ffn_dim),
      SIZE_FIELD(heads_label),
      SIZE_FIELD(heads_modal),
      SIZE_FIELD(layers_visual),
      SIZE_FIELD(layers_audio),
      SIZE_FIELD(layers_text),
      SIZE_FIELD(layers_cross),
      SIZE_FIELD(amr_hidden_layers),
      SIZE_FIELD(common_length),
      REAL_FIELD(alpha),
      REAL_FIELD(beta),
      REAL_FIELD(gamma),
      SIZE_FIELD(batch_size),
      REAL_FIELD(base_lr),
      REAL_FIELD(warmup_fraction),
      SIZE_FIELD(epochs),
      SIZE_FIELD(patience),
      {"seed", {[](ModelConfig& c, const std::string& k, const std::string& v) {
                  c.seed = parse_size(k, v);
                },
                [](const ModelConfig& c) { return std::to_string(c.seed); }}},
      REAL_FIELD(dropout),
      REAL_FIELD(weight_decay),
      REAL_FIELD(grad_clip),
      ENUM_FIELD(diff_sign, kDiffSigns),
      ENUM_FIELD(token_embedding, kTokens),
      ENUM_FIELD(discriminator_bias, kBiases),
      ENUM_FIELD(accuracy, kAccuracy),
      FLAG_FIELD(disable_amr),
      FLAG_FIELD(disable_diff),
      FLAG_FIELD(disable_cml),
      {"fusion_order", {[](ModelConfig& c, const std::string&, const std::string& v) {
                          c.ablation.fusion_order = FusionOrder::parse(v);
                        },
                        [](const ModelConfig& c) { return c.ablation.fusion_order.str(); }}},
      FLAG_FIELD(disable_token_embeddings),
      FLAG_FIELD(identical_head),
      FLAG_FIELD(disable_label_correlation),
      FLAG_FIELD(disable_label_modal_attention),
  };
  return table;
}

}  // namespace

ModelConfig parse_config(std::string_view text) {
  ModelConfig config;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    const auto& table = fields();
    auto it = std::find_if(table.begin(), table.end(), [&](const auto& f) { return f.first == key; });
    if (it == table.end()) throw ConfigError(key + ": unknown configuration key");
    if (!seen.insert(key).second) throw ConfigError(key + ": duplicate key");
    it->second.set(config, key, value);
  }
  config.validate();
  return config;
}

ModelConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_text(const ModelConfig& config) {
  std::ostringstream os;
  for (const auto& [key, field] : fields()) os << key << " = " << field.get(config) << "\n";
  return os.str();
}

}  // namespace mmer
