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

#include "treegen/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "treegen/errors.hpp"
#include "treegen/hash.hpp"

namespace treegen {

namespace fs = std::filesystem;
using nlohmann::json;

std::string record_id(std::string_view node_id, std::uint32_t turns) {
  return "tg-" + std::string(node_id) + "-" + std::to_string(turns) + "t";
}

std::string check_record(const ConversationRecord& record) {
  if (record.turns.empty()) return "record '" + record.id + "' has no turns";
  if (record.turns.size() % 2 != 0) return "record '" + record.id + "' ends with a human turn";
  for (std::size_t i = 0; i < record.turns.size(); ++i) {
    const Speaker want = i % 2 == 0 ? Speaker::Human : Speaker::Gpt;
    if (record.turns[i].from != want) {
      return "record '" + record.id + "' breaks human/gpt alternation at turn " +
             std::to_string(i);
    }
  }
  if (record.turn_count != record.turns.size() / 2) {
    return "record '" + record.id + "' has turn_count " + std::to_string(record.turn_count) +
           " for " + std::to_string(record.turns.size()) + " messages";
  }
  return {};
}

TurnPolicy TurnPolicy::gaussian_preset(std::uint64_t seed) {
  TurnPolicy policy;
  policy.kind = Kind::Mixture;
  policy.sample_seed = seed;
  double total = 0.0;
  for (std::uint32_t t = 1; t <= 4; ++t) {
    const double d = static_cast<double>(t) - 2.5;
    policy.weights[t] = std::exp(-0.5 * d * d);
    total += policy.weights[t];
  }
  for (auto& [t, w] : policy.weights) w /= total;
  return policy;
}

TurnPolicy parse_turn_policy(const std::string& text) {
  if (text.empty() || text == "full") return TurnPolicy::full_depth();
  auto number_after = [&](std::size_t prefix) -> std::uint64_t {
    try {
      std::size_t used = 0;
      const auto value = std::stoull(text.substr(prefix), &used);
      if (used != text.size() - prefix) throw std::invalid_argument("trailing");
      return value;
    } catch (const std::exception&) {
      throw Error(ErrorKind::InvalidArgument, "malformed turn policy '" + text + "'");
    }
  };
  if (text.rfind("fixed:", 0) == 0) {
    const auto k = number_after(6);
    if (k < 1) throw Error(ErrorKind::InvalidArgument, "fixed turn count must be >= 1");
    return TurnPolicy::fixed(static_cast<std::uint32_t>(k));
  }
  if (text == "gturn") return TurnPolicy::gaussian_preset(0);
  if (text.rfind("gturn:", 0) == 0) return TurnPolicy::gaussian_preset(number_after(6));

  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error&) {
    throw Error(ErrorKind::InvalidArgument, "unknown turn policy '" + text + "'");
  }
  TurnPolicy policy;
  try {
    const std::string kind = doc.at("kind").get<std::string>();
    if (kind == "fixed") {
      policy = TurnPolicy::fixed(doc.value("k", 0U));
    } else if (kind == "mixture") {
      policy.kind = TurnPolicy::Kind::Mixture;
      for (const auto& [key, value] : doc.at("weights").items()) {
        policy.weights[static_cast<std::uint32_t>(std::stoul(key))] = value.get<double>();
      }
    } else {
      throw Error(ErrorKind::InvalidArgument, "unknown turn policy kind '" + kind + "'");
    }
    policy.sample_seed = doc.value("sample_seed", std::uint64_t{0});
    policy.target_size = doc.value("target_size", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("malformed turn policy: ") + e.what());
  }
  return policy;
}

namespace {

ConversationRecord make_record(const LeafPath& path, std::uint32_t turns,
                               const BuildOptions& options) {
  ConversationRecord record;
  record.source_leaf = path.leaf().id;
  record.id = record_id(record.source_leaf, turns);
  record.system = path.system_prompt;
  record.turn_count = turns;
  for (std::size_t i = 0; i < path.nodes.size(); ++i) {
    Turn turn{i % 2 == 0 ? Speaker::Human : Speaker::Gpt, path.nodes[i]->text};
    if (i == 0 && options.inline_system && !record.system.empty()) {
      turn.value = record.system + "\n\n" + turn.value;
    }
    record.turns.push_back(std::move(turn));
  }
  return record;
}

// Splits `total` across `weights` by largest remainder; ties go to the
// earlier entry.
std::vector<std::uint64_t> apportion(std::uint64_t total, const std::vector<double>& weights) {
  std::vector<std::uint64_t> out(weights.size(), 0);
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (total == 0 || sum <= 0.0) return out;
  std::vector<std::pair<double, std::size_t>> remainders;
  std::uint64_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = static_cast<double>(total) * weights[i] / sum;
    out[i] = static_cast<std::uint64_t>(std::floor(exact));
    assigned += out[i];
    remainders.push_back({exact - std::floor(exact), i});
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < total && r < remainders.size(); ++r, ++assigned) {
    ++out[remainders[r].second];
  }
  return out;
}

// `count` distinct indices from [0, n), ascending.
std::vector<std::size_t> choose_indices(std::size_t n, std::size_t count, SplitMix64& rng) {
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(all[i], all[j]);
  }
  all.resize(count);
  std::sort(all.begin(), all.end());
  return all;
}

std::vector<ConversationRecord> build_mixture(const Tree& tree, const TurnPolicy& policy,
                                              const BuildOptions& options,
                                              std::vector<std::string>* warnings) {
  const std::uint32_t max_turns = static_cast<std::uint32_t>(tree.config().depth() / 2);
  double total_weight = 0.0;
  for (const auto& [turns, weight] : policy.weights) {
    if (turns < 1 || turns > max_turns) {
      throw Error(ErrorKind::InvalidArgument, "mixture turn count " + std::to_string(turns) +
                                                  " is outside 1.." + std::to_string(max_turns));
    }
    if (!(weight >= 0.0)) throw Error(ErrorKind::InvalidArgument, "mixture weights must be >= 0");
    total_weight += weight;
  }
  if (std::abs(total_weight - 1.0) > 1e-9) {
    throw Error(ErrorKind::InvalidArgument, "mixture weights sum to " +
                                                std::to_string(total_weight) + ", not 1");
  }

  std::vector<std::uint32_t> strata_turns;
  std::vector<double> weights;
  std::vector<std::vector<LeafPath>> strata;
  for (const auto& [turns, weight] : policy.weights) {
    if (weight <= 0.0) continue;
    strata_turns.push_back(turns);
    weights.push_back(weight);
    strata.push_back(tree.paths_to_layer(2 * turns));
  }

  std::uint64_t total = policy.target_size;
  if (total == 0) {
    bool first = true;
    for (std::size_t s = 0; s < strata.size(); ++s) {
      if (strata[s].empty()) continue;
      const auto fit = static_cast<std::uint64_t>(
          std::floor(static_cast<double>(strata[s].size()) / weights[s] + 1e-9));
      total = first ? fit : std::min(total, fit);
      first = false;
    }
  }

  std::vector<std::uint64_t> quota = apportion(total, weights);
  std::vector<bool> saturated(strata.size(), false);
  for (;;) {
    std::uint64_t excess = 0;
    for (std::size_t s = 0; s < strata.size(); ++s) {
      if (quota[s] > strata[s].size()) {
        excess += quota[s] - strata[s].size();
        if (warnings) {
          warnings->push_back("turn stratum " + std::to_string(strata_turns[s]) + " holds " +
                              std::to_string(strata[s].size()) + " prefixes for a quota of " +
                              std::to_string(quota[s]) + "; redistributing the rest");
        }
        quota[s] = strata[s].size();
        saturated[s] = true;
      }
    }
    if (excess == 0) break;
    std::vector<double> open_weights(strata.size(), 0.0);
    bool any_open = false;
    for (std::size_t s = 0; s < strata.size(); ++s) {
      if (!saturated[s]) {
        open_weights[s] = weights[s];
        any_open = true;
      }
    }
    if (!any_open) {
      if (warnings) {
        warnings->push_back(std::to_string(excess) +
                            " requested records could not be placed in any stratum");
      }
      break;
    }
    const std::vector<std::uint64_t> extra = apportion(excess, open_weights);
    for (std::size_t s = 0; s < strata.size(); ++s) quota[s] += extra[s];
  }

  std::vector<ConversationRecord> records;
  for (std::size_t s = 0; s < strata.size(); ++s) {
    SplitMix64 rng(Fnv1a64{}.update_u64(policy.sample_seed).update_u64(strata_turns[s]).digest());
    for (std::size_t index : choose_indices(strata[s].size(), quota[s], rng)) {
      records.push_back(make_record(strata[s][index], strata_turns[s], options));
    }
  }
  return records;
}

void write_text(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  out << bytes;
  out.flush();
  if (!out) throw Error(ErrorKind::Io, "failed writing '" + path.string() + "'");
}

std::string dump(const json& doc, int indent = -1) {
  return doc.dump(indent, ' ', false, json::error_handler_t::replace);
}

std::vector<const ConversationRecord*> sorted_by_id(
    const std::vector<ConversationRecord>& records) {
  std::vector<const ConversationRecord*> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(&r);
  std::stable_sort(out.begin(), out.end(),
                   [](const auto* a, const auto* b) { return a->id < b->id; });
  return out;
}

}  // namespace

std::vector<ConversationRecord> build_corpus(const Tree& tree, const TurnPolicy& policy,
                                             const BuildOptions& options,
                                             std::vector<std::string>* warnings) {
  if (tree.config().mode != Mode::SFT) {
    throw Error(ErrorKind::Mode, "conversation corpora need an SFT tree (use the pt export)");
  }
  if (!tree.is_complete() && !options.permissive) {
    throw Error(ErrorKind::Incomplete, "incomplete tree: " +
                                           std::to_string(tree.pending_parents().size()) +
                                           " parents still pending");
  }
  const std::uint32_t max_turns = static_cast<std::uint32_t>(tree.config().depth() / 2);

  if (policy.kind == TurnPolicy::Kind::Mixture) {
    return build_mixture(tree, policy, options, warnings);
  }

  const std::uint32_t k = policy.k == 0 ? max_turns : policy.k;
  if (k > max_turns) {
    throw Error(ErrorKind::InvalidArgument, "turn count " + std::to_string(k) +
                                                " exceeds the tree's " +
                                                std::to_string(max_turns));
  }
  const std::vector<LeafPath> paths =
      k == max_turns ? tree.leaf_paths(options.permissive) : tree.paths_to_layer(2 * k);
  std::vector<ConversationRecord> records;
  records.reserve(paths.size());
  for (const LeafPath& path : paths) {
    const auto turns = static_cast<std::uint32_t>(path.nodes.size() / 2);
    records.push_back(make_record(path, turns, options));
  }
  return records;
}

std::vector<ConversationRecord> sample_to_size(const std::vector<ConversationRecord>& records,
                                               std::uint64_t target_n, std::uint64_t seed) {
  if (target_n > records.size()) {
    throw Error(ErrorKind::InvalidArgument, "cannot sample " + std::to_string(target_n) +
                                                " records from " +
                                                std::to_string(records.size()));
  }
  SplitMix64 rng(seed);
  std::vector<ConversationRecord> out;
  out.reserve(target_n);
  for (std::size_t index : choose_indices(records.size(), target_n, rng)) {
    out.push_back(records[index]);
  }
  return out;
}

json record_to_json(const ConversationRecord& record) {
  json conversations = json::array();
  for (const Turn& turn : record.turns) {
    conversations.push_back(
        json{{"from", turn.from == Speaker::Human ? "human" : "gpt"}, {"value", turn.value}});
  }
  return json{{"id", record.id}, {"conversations", std::move(conversations)}};
}

ConversationRecord record_from_json(const json& doc, const std::string& system) {
  ConversationRecord record;
  try {
    if (doc.size() != 2 || !doc.contains("id") || !doc.contains("conversations")) {
      throw Error(ErrorKind::Parse, "record must have exactly the keys 'id' and 'conversations'");
    }
    record.id = doc.at("id").get<std::string>();
    record.system = system;
    for (const json& message : doc.at("conversations")) {
      if (message.size() != 2 || !message.contains("from") || !message.contains("value")) {
        throw Error(ErrorKind::Parse, "record '" + record.id +
                                          "': messages must have exactly 'from' and 'value'");
      }
      const std::string from = message.at("from").get<std::string>();
      if (from != "human" && from != "gpt") {
        throw Error(ErrorKind::Parse, "record '" + record.id + "': unknown role '" + from + "'");
      }
      record.turns.push_back(
          {from == "human" ? Speaker::Human : Speaker::Gpt, message.at("value").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("malformed conversation record: ") + e.what());
  }
  record.turn_count = static_cast<std::uint32_t>(record.turns.size() / 2);
  // Ids written by this library encode the source node: tg-<node>-<turns>t.
  const std::string& id = record.id;
  const auto dash = id.rfind('-');
  if (id.rfind("tg-", 0) == 0 && dash != std::string::npos && dash > 3 && id.back() == 't') {
    record.source_leaf = id.substr(3, dash - 3);
  }
  return record;
}

void export_sharegpt(const std::vector<ConversationRecord>& records, const fs::path& path) {
  json array = json::array();
  for (const ConversationRecord* record : sorted_by_id(records)) {
    array.push_back(record_to_json(*record));
  }
  write_text(path, dump(array, 2) + "\n");
}

void export_jsonl(const std::vector<ConversationRecord>& records, const fs::path& path) {
  std::string bytes;
  for (const ConversationRecord* record : sorted_by_id(records)) {
    bytes += dump(record_to_json(*record));
    bytes += '\n';
  }
  write_text(path, bytes);
}

std::size_t export_pt(const Tree& tree, const ChatTemplate& tmpl, const fs::path& path,
                      bool permissive) {
  if (tree.config().mode != Mode::PT) {
    throw Error(ErrorKind::Mode, "the pt export needs a PT tree");
  }
  std::string bytes;
  const std::vector<LeafPath> paths = tree.leaf_paths(permissive);
  for (const LeafPath& leaf : paths) {
    std::string text;
    for (std::size_t i = 0; i < leaf.nodes.size(); ++i) {
      if (i > 0) text += tmpl.turn_separator;
      text += leaf.nodes[i]->text;
    }
    bytes += dump(json{{"text", text}});
    bytes += '\n';
  }
  write_text(path, bytes);
  return paths.size();
}

std::vector<ConversationRecord> import_corpus(const fs::path& path, const std::string& system) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const std::string content = buffer.str();

  std::vector<ConversationRecord> records;
  auto add = [&](const json& doc) {
    ConversationRecord record = record_from_json(doc, system);
    if (const std::string problem = check_record(record); !problem.empty()) {
      throw Error(ErrorKind::Parse, path.string() + ": " + problem);
    }
    records.push_back(std::move(record));
  };

  const auto first = content.find_first_not_of(" \t\r\n");
  try {
    if (first != std::string::npos && content[first] == '[') {
      for (const json& doc : json::parse(content)) add(doc);
    } else {
      std::istringstream lines(content);
      std::string line;
      while (std::getline(lines, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        add(json::parse(line));
      }
    }
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Parse, path.string() + ": " + e.what());
  }
  return records;
}

}  // namespace treegen
