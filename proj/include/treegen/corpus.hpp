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
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "treegen/prompt.hpp"
#include "treegen/tree.hpp"

namespace treegen {

enum class Speaker { Human, Gpt };

struct Turn {
  Speaker from = Speaker::Human;
  std::string value;

  bool operator==(const Turn&) const = default;
};

struct ConversationRecord {
  std::string id;
  std::string system;
  std::vector<Turn> turns;  // human, gpt, human, gpt, ...
  std::string source_leaf;  // id of the node that ends the conversation
  std::uint32_t turn_count = 0;

  bool operator==(const ConversationRecord&) const = default;
};

/// Record id for the conversation ending at `node_id` with `turns` turns.
std::string record_id(std::string_view node_id, std::uint32_t turns);

/// Empty when the record satisfies the alternation invariant; otherwise a
/// description of the first violation.
std::string check_record(const ConversationRecord& record);

struct TurnPolicy {
  enum class Kind { FixedK, Mixture };
  Kind kind = Kind::FixedK;
  std::uint32_t k = 0;                        // FixedK; 0 means full depth
  std::map<std::uint32_t, double> weights;    // Mixture: turn count -> probability
  std::uint64_t sample_seed = 0;
  // Mixture corpus size; 0 picks the largest size whose quotas all fit.
  std::uint64_t target_size = 0;

  static TurnPolicy full_depth() { return {}; }
  static TurnPolicy fixed(std::uint32_t k) { return {Kind::FixedK, k, {}, 0, 0}; }
  /// Discretized N(mean=2.5, sd=1) over turn counts 1..4, normalized.
  static TurnPolicy gaussian_preset(std::uint64_t seed);
};

/// Parses "full", "fixed:K", "gturn" or "gturn:SEED", or a JSON object with
/// keys kind/k/weights/sample_seed/target_size.
TurnPolicy parse_turn_policy(const std::string& text);

struct BuildOptions {
  bool permissive = false;
  // Prepend the system prompt to the first human turn.
  bool inline_system = false;
};

/// Materializes conversations from a complete SFT tree. Mixture quotas that
/// exceed a stratum are redistributed to the others; each redistribution
/// adds a line to `warnings` when given.
std::vector<ConversationRecord> build_corpus(const Tree& tree, const TurnPolicy& policy,
                                             const BuildOptions& options = {},
                                             std::vector<std::string>* warnings = nullptr);

/// Uniform subset of exactly `target_n`, original order preserved.
std::vector<ConversationRecord> sample_to_size(const std::vector<ConversationRecord>& records,
                                               std::uint64_t target_n, std::uint64_t seed);

nlohmann::json record_to_json(const ConversationRecord& record);
/// `system` is not part of the wire shape and is supplied by the caller.
ConversationRecord record_from_json(const nlohmann::json& doc, const std::string& system = {});

/// JSON array sorted by record id.
void export_sharegpt(const std::vector<ConversationRecord>& records,
                     const std::filesystem::path& path);
/// One record object per line, sorted by record id.
void export_jsonl(const std::vector<ConversationRecord>& records,
                  const std::filesystem::path& path);
/// One {"text": ...} line per leaf path of a PT tree; continuations joined by
/// the template separator. Returns the line count.
std::size_t export_pt(const Tree& tree, const ChatTemplate& tmpl,
                      const std::filesystem::path& path, bool permissive = false);

/// Reads a ShareGPT array or JSONL file (detected by the first byte) and
/// re-checks every record's alternation invariant.
std::vector<ConversationRecord> import_corpus(const std::filesystem::path& path,
                                              const std::string& system = {});

}  // namespace treegen
