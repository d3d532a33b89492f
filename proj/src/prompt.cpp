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

#include "treegen/prompt.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "treegen/errors.hpp"

namespace treegen {

using nlohmann::json;

namespace {

std::string_view trim(std::string_view text) {
  constexpr std::string_view kSpace = " \t\r\n\f\v";
  const auto begin = text.find_first_not_of(kSpace);
  if (begin == std::string_view::npos) return {};
  const auto end = text.find_last_not_of(kSpace);
  return text.substr(begin, end - begin + 1);
}

ChatTemplate make_llama2() {
  ChatTemplate t;
  t.id = "llama2-chat";
  t.system_open = "<<SYS>>\n";
  t.system_close = "\n<</SYS>>\n\n";
  t.user_open = "[INST] ";
  t.user_close = "";
  t.assistant_open = " [/INST] ";
  t.assistant_close = " </s>";
  t.turn_separator = "<s>";
  t.system_in_first_user = true;
  return t;
}

ChatTemplate make_plain() {
  ChatTemplate t;
  t.id = "plain";
  t.turn_separator = " ";
  return t;
}

// Renders the system block and every complete turn in `path`, leaving the
// output positioned after the last text. A trailing unanswered question is
// rendered up to (excluding) the assistant marker.
std::string render_turns(std::span<const std::string> path, const ChatTemplate& tmpl,
                         std::string_view system_prompt) {
  std::string out;
  if (tmpl.system_in_first_user) out += tmpl.user_open;
  out += tmpl.system_open;
  out += system_prompt;
  out += tmpl.system_close;
  for (std::size_t i = 0; i < path.size(); ++i) {
    const bool question = i % 2 == 0;
    if (question) {
      if (i > 0) {
        out += tmpl.turn_separator;
        out += tmpl.user_open;
      } else if (!tmpl.system_in_first_user) {
        out += tmpl.user_open;
      }
      out += path[i];
      out += tmpl.user_close;
      out += tmpl.assistant_open;
    } else {
      out += path[i];
      out += tmpl.assistant_close;
    }
  }
  return out;
}

}  // namespace

std::vector<std::string> ChatTemplate::role_markers() const {
  std::set<std::string> unique;
  for (const std::string* marker : {&system_open, &system_close, &user_open, &user_close,
                                    &assistant_open, &assistant_close, &turn_separator}) {
    const std::string_view trimmed = trim(*marker);
    if (!trimmed.empty()) unique.emplace(trimmed);
  }
  return {unique.begin(), unique.end()};
}

const ChatTemplate& llama2_chat_template() {
  static const ChatTemplate instance = make_llama2();
  return instance;
}

const ChatTemplate& plain_template() {
  static const ChatTemplate instance = make_plain();
  return instance;
}

const ChatTemplate* find_builtin_template(std::string_view id) {
  if (id == "llama2-chat") return &llama2_chat_template();
  if (id == "plain") return &plain_template();
  return nullptr;
}

ChatTemplate template_from_json(const json& doc) {
  if (!doc.is_object()) throw Error(ErrorKind::Parse, "template must be a JSON object");
  static const std::set<std::string> kKeys = {
      "id", "system_open", "system_close", "user_open", "user_close", "assistant_open",
      "assistant_close", "turn_separator", "system_in_first_user"};
  for (const auto& [key, value] : doc.items()) {
    if (!kKeys.count(key)) throw Error(ErrorKind::Parse, "unknown key '" + key + "' in template");
  }
  if (!doc.contains("id")) throw Error(ErrorKind::Parse, "template is missing 'id'");
  ChatTemplate t;
  try {
    t.id = doc.at("id").get<std::string>();
    auto text = [&](const char* key) { return doc.value(key, std::string{}); };
    t.system_open = text("system_open");
    t.system_close = text("system_close");
    t.user_open = text("user_open");
    t.user_close = text("user_close");
    t.assistant_open = text("assistant_open");
    t.assistant_close = text("assistant_close");
    t.turn_separator = text("turn_separator");
    t.system_in_first_user = doc.value("system_in_first_user", false);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("template: ") + e.what());
  }
  return t;
}

json template_to_json(const ChatTemplate& t) {
  return json{{"id", t.id},
              {"system_open", t.system_open},
              {"system_close", t.system_close},
              {"user_open", t.user_open},
              {"user_close", t.user_close},
              {"assistant_open", t.assistant_open},
              {"assistant_close", t.assistant_close},
              {"turn_separator", t.turn_separator},
              {"system_in_first_user", t.system_in_first_user}};
}

ChatTemplate resolve_template(const std::string& id_or_path) {
  if (const ChatTemplate* builtin = find_builtin_template(id_or_path)) return *builtin;
  std::ifstream in(id_or_path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::InvalidArgument,
                "unknown template '" + id_or_path + "' (not built in, no such file)");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return template_from_json(json::parse(buffer.str()));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Parse, id_or_path + ": " + e.what());
  }
}

bool separator_contains_marker(const ChatTemplate& tmpl) {
  bool has_role_markers = false;
  for (const std::string* marker : {&tmpl.system_open, &tmpl.system_close, &tmpl.user_open,
                                    &tmpl.user_close, &tmpl.assistant_open,
                                    &tmpl.assistant_close}) {
    const std::string_view trimmed = trim(*marker);
    if (trimmed.empty()) continue;
    has_role_markers = true;
    if (tmpl.turn_separator.find(trimmed) != std::string::npos) return true;
  }
  // In a chat template a visible separator is itself structural (e.g. "<s>").
  return has_role_markers && !trim(tmpl.turn_separator).empty();
}

std::string render_question_prompt(std::span<const std::string> path, const ChatTemplate& tmpl,
                                   std::string_view system_prompt) {
  if (path.size() % 2 != 0) {
    throw Error(ErrorKind::Structure,
                "question prompt needs complete turns, path ends with an unanswered question");
  }
  std::string out = render_turns(path, tmpl, system_prompt);
  if (!path.empty()) {
    out += tmpl.turn_separator;
    out += tmpl.user_open;
  } else if (!tmpl.system_in_first_user) {
    out += tmpl.user_open;
  }
  return out;
}

std::string render_answer_prompt(std::span<const std::string> path, const ChatTemplate& tmpl,
                                 std::string_view system_prompt) {
  if (path.size() % 2 != 1) {
    throw Error(ErrorKind::Structure, "answer prompt needs a path ending with a question");
  }
  return render_turns(path, tmpl, system_prompt);
}

std::string render_continuation_prompt(std::span<const std::string> path,
                                       std::string_view system_prompt,
                                       std::string_view separator) {
  std::string out(system_prompt);
  for (const std::string& text : path) {
    out += separator;
    out += text;
  }
  return out;
}

std::string render_prompt(Mode mode, Role next_role, std::span<const std::string> path,
                          const ChatTemplate& tmpl, std::string_view system_prompt) {
  if (mode == Mode::PT) {
    if (next_role != Role::Continuation) {
      throw Error(ErrorKind::Mode, "PT trees only generate continuations");
    }
    return render_continuation_prompt(path, system_prompt, tmpl.turn_separator);
  }
  switch (next_role) {
    case Role::Question: return render_question_prompt(path, tmpl, system_prompt);
    case Role::Answer: return render_answer_prompt(path, tmpl, system_prompt);
    default:
      throw Error(ErrorKind::Mode, std::string("SFT trees cannot generate role ") +
                                       to_string(next_role));
  }
}

std::string strip_completion(std::string_view raw, const LayerSpec& layer,
                             const ChatTemplate& tmpl) {
  std::size_t cut = raw.size();
  auto consider = [&](std::string_view marker) {
    if (marker.empty()) return;
    const auto pos = raw.find(marker);
    if (pos != std::string_view::npos) cut = std::min(cut, pos);
  };
  for (const std::string& marker : layer.stop_markers) consider(marker);
  for (const std::string& marker : tmpl.role_markers()) consider(marker);
  const std::string_view kept = trim(raw.substr(0, cut));
  if (kept.empty()) throw Error(ErrorKind::EmptyCompletion, "completion is empty after stripping");
  return std::string(kept);
}

}  // namespace treegen
