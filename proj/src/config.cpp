// Copyright 2026 The treegen Authors
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

#include "treegen/config.hpp"

#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "treegen/errors.hpp"
#include "treegen/hash.hpp"
#include "treegen/prompt.hpp"

namespace treegen {

using nlohmann::json;

const char* to_string(Mode mode) noexcept {
  return mode == Mode::SFT ? "sft" : "pt";
}

const char* to_string(Role role) noexcept {
  switch (role) {
    case Role::Root: return "root";
    case Role::Question: return "question";
    case Role::Answer: return "answer";
    case Role::Continuation: return "continuation";
  }
  return "unknown";
}

const char* to_string(TreeShape shape) noexcept {
  return shape == TreeShape::WideTree ? "wide-tree" : "balance-tree";
}

Mode mode_from_string(std::string_view text) {
  if (text == "sft" || text == "SFT") return Mode::SFT;
  if (text == "pt" || text == "PT") return Mode::PT;
  throw Error(ErrorKind::Parse, "unknown mode '" + std::string(text) + "'");
}

Role role_from_string(std::string_view text) {
  if (text == "root") return Role::Root;
  if (text == "question") return Role::Question;
  if (text == "answer") return Role::Answer;
  if (text == "continuation") return Role::Continuation;
  throw Error(ErrorKind::Parse, "unknown role '" + std::string(text) + "'");
}

Role expected_role(Mode mode, std::size_t layer_index) noexcept {
  if (mode == Mode::PT) return Role::Continuation;
  return layer_index % 2 == 1 ? Role::Question : Role::Answer;
}

double default_temperature(Role role) noexcept {
  return role == Role::Answer ? 0.7 : 1.0;
}

json ValidationReport::to_json() const {
  return json{{"ok", ok()}, {"errors", errors}, {"warnings", warnings}};
}

ValidationReport validate_config(const TreeConfig& config) {
  ValidationReport report;
  auto& errors = report.errors;
  auto& warnings = report.warnings;

  if (config.layers.empty()) {
    errors.push_back("config has no layers");
  }
  if (config.mode == Mode::SFT && config.layers.size() % 2 == 1) {
    errors.push_back("odd depth in SFT mode (" +
                     std::to_string(config.layers.size()) + " layers)");
  }
  for (std::size_t i = 1; i <= config.layers.size(); ++i) {
    const LayerSpec& layer = config.layer(i);
    const std::string where = "layer " + std::to_string(i);
    if (layer.branching < 1) errors.push_back(where + ": branching must be >= 1");
    if (layer.max_tokens < 1) errors.push_back(where + ": max_tokens must be >= 1");
    if (!(layer.temperature >= 0.0)) errors.push_back(where + ": temperature must be >= 0");
    const Role want = expected_role(config.mode, i);
    if (layer.role != want) {
      errors.push_back(where + ": role " + to_string(layer.role) + " where " +
                       to_string(want) + " is required");
    }
  }
  if (!(config.oversample_factor >= 1.0)) {
    errors.push_back("oversample_factor must be >= 1.0");
  }
  if (!(config.mmr_lambda >= 0.0 && config.mmr_lambda <= 1.0)) {
    errors.push_back("mmr_lambda must lie in [0, 1]");
  }
  if (!(config.dedup_threshold > 0.0 && config.dedup_threshold <= 1.01)) {
    errors.push_back("dedup_threshold must lie in (0, 1.01]");
  }

  if (const ChatTemplate* tmpl = find_builtin_template(config.template_id)) {
    if (config.mode == Mode::PT && separator_contains_marker(*tmpl)) {
      errors.push_back("template '" + config.template_id +
                       "' joins continuations with role-marker bytes; PT mode needs a marker-free separator");
    }
  } else if (config.template_id.empty()) {
    errors.push_back("template_id is empty");
  } else {
    warnings.push_back("template_id '" + config.template_id +
                       "' is not built in and must be supplied as a template file");
  }

  if (config.mode == Mode::SFT && errors.empty()) {
    // Question budgets share one value; answer budgets grow with depth.
    const std::uint32_t question_budget = config.layer(1).max_tokens;
    bool constant = true;
    for (std::size_t i = 3; i <= config.depth(); i += 2) {
      constant = constant && config.layer(i).max_tokens == question_budget;
    }
    if (!constant) warnings.push_back("question budgets are not constant across question layers");
    for (std::size_t i = 4; i <= config.depth(); i += 2) {
      if (config.layer(i).max_tokens <= config.layer(i - 2).max_tokens) {
        warnings.push_back("answer budgets not increasing with depth (layer " +
                           std::to_string(i - 2) + " -> " + std::to_string(i) + ")");
      }
    }
  }
  return report;
}

namespace {

void require_valid(const TreeConfig& config) {
  const ValidationReport report = validate_config(config);
  if (!report.ok()) {
    throw Error(ErrorKind::InvalidArgument, "invalid config: " + report.errors.front());
  }
}

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  if (b != 0 && a > std::numeric_limits<std::uint64_t>::max() / b) {
    throw Error(ErrorKind::InvalidArgument, "branching product overflows 64 bits");
  }
  return a * b;
}

}  // namespace

std::uint64_t expected_leaf_count(const TreeConfig& config) {
  require_valid(config);
  std::uint64_t product = 1;
  for (const LayerSpec& layer : config.layers) product = checked_mul(product, layer.branching);
  return product;
}

std::uint64_t expected_node_count(const TreeConfig& config) {
  require_valid(config);
  std::uint64_t product = 1;
  std::uint64_t total = 0;
  for (const LayerSpec& layer : config.layers) {
    product = checked_mul(product, layer.branching);
    total += product;
  }
  return total;
}

TreeShape classify(const TreeConfig& config) noexcept {
  if (config.layers.empty() || config.layers.front().branching < 2) {
    return TreeShape::BalanceTree;
  }
  for (std::size_t i = 1; i < config.layers.size(); ++i) {
    if (config.layers[i].branching != 1) return TreeShape::BalanceTree;
  }
  return TreeShape::WideTree;
}

namespace {

void reject_unknown_keys(const json& object, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, value] : object.items()) {
    if (!allowed.count(key)) {
      throw Error(ErrorKind::Parse, "unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
T get_field(const json& object, const char* key, const std::string& where) {
  try {
    return object.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, where + "." + key + ": " + e.what());
  }
}

std::uint32_t get_positive_u32(const json& object, const char* key, const std::string& where) {
  const json& value = object.at(key);
  if (!value.is_number_integer()) {
    throw Error(ErrorKind::Parse, where + "." + key + ": expected an integer");
  }
  if (value.is_number_unsigned()) {
    const auto v = value.get<std::uint64_t>();
    if (v > std::numeric_limits<std::uint32_t>::max()) {
      throw Error(ErrorKind::Parse, where + "." + key + ": value too large");
    }
    return static_cast<std::uint32_t>(v);
  }
  const auto v = value.get<std::int64_t>();
  // Negative values map to 0 and are reported by validation.
  return v < 0 ? 0U : static_cast<std::uint32_t>(v);
}

}  // namespace

TreeConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw Error(ErrorKind::Parse, "config must be a JSON object");
  reject_unknown_keys(doc,
                      {"mode", "system_prompt", "layers", "oversample_factor", "mmr_lambda",
                       "dedup_threshold", "seed", "template_id", "model"},
                      "config");
  for (const char* required : {"mode", "system_prompt", "layers"}) {
    if (!doc.contains(required)) {
      throw Error(ErrorKind::Parse, std::string("config is missing '") + required + "'");
    }
  }

  TreeConfig config;
  config.mode = mode_from_string(get_field<std::string>(doc, "mode", "config"));
  config.system_prompt = get_field<std::string>(doc, "system_prompt", "config");
  config.template_id = config.mode == Mode::PT ? "plain" : "llama2-chat";
  if (doc.contains("oversample_factor")) {
    config.oversample_factor = get_field<double>(doc, "oversample_factor", "config");
  }
  if (doc.contains("mmr_lambda")) config.mmr_lambda = get_field<double>(doc, "mmr_lambda", "config");
  if (doc.contains("dedup_threshold")) {
    config.dedup_threshold = get_field<double>(doc, "dedup_threshold", "config");
  }
  if (doc.contains("seed")) {
    const json& seed = doc.at("seed");
    if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0)) {
      throw Error(ErrorKind::Parse, "config.seed: expected an unsigned 64-bit integer");
    }
    config.seed = seed.get<std::uint64_t>();
  }
  if (doc.contains("template_id")) config.template_id = get_field<std::string>(doc, "template_id", "config");
  if (doc.contains("model")) config.model = get_field<std::string>(doc, "model", "config");

  const json& layers = doc.at("layers");
  if (!layers.is_array()) throw Error(ErrorKind::Parse, "config.layers must be an array");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const json& entry = layers[i];
    const std::string where = "layers[" + std::to_string(i) + "]";
    if (!entry.is_object()) throw Error(ErrorKind::Parse, where + " must be an object");
    reject_unknown_keys(entry, {"branching", "max_tokens", "role", "temperature", "stop_markers"}, where);
    for (const char* required : {"branching", "max_tokens"}) {
      if (!entry.contains(required)) {
        throw Error(ErrorKind::Parse, where + " is missing '" + required + "'");
      }
    }
    LayerSpec layer;
    layer.branching = get_positive_u32(entry, "branching", where);
    layer.max_tokens = get_positive_u32(entry, "max_tokens", where);
    layer.role = entry.contains("role")
                     ? role_from_string(get_field<std::string>(entry, "role", where))
                     : expected_role(config.mode, i + 1);
    layer.temperature = entry.contains("temperature")
                            ? get_field<double>(entry, "temperature", where)
                            : default_temperature(layer.role);
    if (entry.contains("stop_markers")) {
      layer.stop_markers = get_field<std::vector<std::string>>(entry, "stop_markers", where);
    }
    config.layers.push_back(std::move(layer));
  }
  return config;
}

TreeConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Parse, std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(doc);
}

TreeConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open config '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_config(buffer.str());
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

json config_to_json(const TreeConfig& config) {
  json layers = json::array();
  for (const LayerSpec& layer : config.layers) {
    layers.push_back(json{{"branching", layer.branching},
                          {"max_tokens", layer.max_tokens},
                          {"role", to_string(layer.role)},
                          {"temperature", layer.temperature},
                          {"stop_markers", layer.stop_markers}});
  }
  return json{{"mode", to_string(config.mode)},
              {"system_prompt", config.system_prompt},
              {"layers", std::move(layers)},
              {"oversample_factor", config.oversample_factor},
              {"mmr_lambda", config.mmr_lambda},
              {"dedup_threshold", config.dedup_threshold},
              {"seed", config.seed},
              {"template_id", config.template_id},
              {"model", config.model}};
}

std::string canonical_config(const TreeConfig& config) {
  return config_to_json(config).dump();
}

std::uint64_t config_hash(const TreeConfig& config) {
  return fnv1a64(canonical_config(config));
}

}  // namespace treegen
