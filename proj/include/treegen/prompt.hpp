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

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "treegen/config.hpp"

namespace treegen {

/// Role-marker realization for one model family. Markers are fixed byte
/// strings and may be empty.
struct ChatTemplate {
  std::string id;
  std::string system_open;
  std::string system_close;
  std::string user_open;
  std::string user_close;
  std::string assistant_open;
  std::string assistant_close;
  std::string turn_separator;
  // Llama-2 places the system block inside the first user instruction:
  // user_open + system block + Q_1.
  bool system_in_first_user = false;

  /// Non-empty role markers with surrounding whitespace trimmed. These are
  /// the byte sequences stripped from completions.
  std::vector<std::string> role_markers() const;

  bool operator==(const ChatTemplate&) const = default;
};

const ChatTemplate& llama2_chat_template();
const ChatTemplate& plain_template();

/// Built-in lookup by id; nullptr when unknown.
const ChatTemplate* find_builtin_template(std::string_view id);

ChatTemplate template_from_json(const nlohmann::json& doc);
nlohmann::json template_to_json(const ChatTemplate& tmpl);

/// A built-in id, or otherwise a path to a template JSON file.
ChatTemplate resolve_template(const std::string& id_or_path);

bool separator_contains_marker(const ChatTemplate& tmpl);

// `path` holds the ancestor texts below the root in order Q_1, R_1, Q_2, ...

/// Prompt for the next question layer: P_0 + <user> Q_1 <assistant> R_1 ...
/// R_i <user>. `path` must hold complete turns (even length).
std::string render_question_prompt(std::span<const std::string> path,
                                   const ChatTemplate& tmpl,
                                   std::string_view system_prompt);

/// Prompt for the next answer layer, ending in the assistant marker. `path`
/// must end with an unanswered question (odd length).
std::string render_answer_prompt(std::span<const std::string> path,
                                 const ChatTemplate& tmpl,
                                 std::string_view system_prompt);

/// PT prompt: system prompt and ancestor texts joined by `separator`.
std::string render_continuation_prompt(std::span<const std::string> path,
                                       std::string_view system_prompt,
                                       std::string_view separator);

/// Dispatches on the role of the layer being generated. Throws Mode when
/// the role does not belong to `mode`.
std::string render_prompt(Mode mode, Role next_role, std::span<const std::string> path,
                          const ChatTemplate& tmpl, std::string_view system_prompt);

/// Cuts `raw` at the first stop marker or template role marker and trims
/// whitespace. Throws EmptyCompletion when nothing remains.
std::string strip_completion(std::string_view raw, const LayerSpec& layer,
                             const ChatTemplate& tmpl);

}  // namespace treegen
