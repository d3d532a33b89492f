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

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace treegen {

enum class Mode { SFT, PT };
enum class Role { Root, Question, Answer, Continuation };
enum class TreeShape { WideTree, BalanceTree };

const char* to_string(Mode mode) noexcept;
const char* to_string(Role role) noexcept;
const char* to_string(TreeShape shape) noexcept;
Mode mode_from_string(std::string_view text);
Role role_from_string(std::string_view text);

struct LayerSpec {
  std::uint32_t branching = 1;   // N_i
  std::uint32_t max_tokens = 1;  // L_i
  Role role = Role::Question;
  double temperature = 1.0;
  std::vector<std::string> stop_markers;

  bool operator==(const LayerSpec&) const = default;
};

inline constexpr double kDefaultOversample = 2.0;
inline constexpr double kDefaultMmrLambda = 0.5;
inline constexpr double kDefaultDedupThreshold = 0.95;

/// Full generation recipe. Layers are indexed from 1 in the prose of this
/// library (layer 0 is the root); `layers[i - 1]` describes layer i.
struct TreeConfig {
  Mode mode = Mode::SFT;
  std::string system_prompt;
  std::vector<LayerSpec> layers;
  double oversample_factor = kDefaultOversample;
  double mmr_lambda = kDefaultMmrLambda;
  double dedup_threshold = kDefaultDedupThreshold;
  std::uint64_t seed = 0;
  std::string template_id = "llama2-chat";
  std::string model;

  std::size_t depth() const noexcept { return layers.size(); }
  const LayerSpec& layer(std::size_t index) const { return layers.at(index - 1); }

  bool operator==(const TreeConfig&) const = default;
};

/// Role a layer must carry given the mode and its 1-based index.
Role expected_role(Mode mode, std::size_t layer_index) noexcept;

/// Temperature used when a layer does not state one.
double default_temperature(Role role) noexcept;

struct ValidationReport {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;

  bool ok() const noexcept { return errors.empty(); }
  nlohmann::json to_json() const;
};

ValidationReport validate_config(const TreeConfig& config);

/// Product of the branching factors. Throws InvalidArgument when the config
/// does not validate or the product overflows 64 bits.
std::uint64_t expected_leaf_count(const TreeConfig& config);

/// Σ over layers of the cumulative branching product: the non-root node
/// count of a shortfall-free tree.
std::uint64_t expected_node_count(const TreeConfig& config);

TreeShape classify(const TreeConfig& config) noexcept;

/// Parses a config document. Unknown keys anywhere are a hard error; layer
/// role and temperature default from the mode and layer parity.
TreeConfig config_from_json(const nlohmann::json& doc);
TreeConfig parse_config(std::string_view text);
TreeConfig load_config(const std::string& path);

/// Every field, defaults filled in. Keys are sorted by nlohmann's object map.
nlohmann::json config_to_json(const TreeConfig& config);

/// Sorted-key, whitespace-free serialization.
std::string canonical_config(const TreeConfig& config);

/// FNV-1a-64 over canonical_config().
std::uint64_t config_hash(const TreeConfig& config);

}  // namespace treegen
