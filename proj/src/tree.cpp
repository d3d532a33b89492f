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

#include "treegen/tree.hpp"

#include <algorithm>
#include <charconv>

#include "treegen/errors.hpp"

namespace treegen {

using nlohmann::json;

const char* to_string(FinishReason reason) noexcept {
  switch (reason) {
    case FinishReason::Stop: return "stop";
    case FinishReason::Length: return "length";
    case FinishReason::Error: return "error";
  }
  return "error";
}

FinishReason finish_reason_from_string(std::string_view text) {
  if (text == "stop") return FinishReason::Stop;
  if (text == "length") return FinishReason::Length;
  return FinishReason::Error;
}

std::string child_id(std::string_view parent_id, std::size_t index) {
  if (parent_id == kRootId) return std::to_string(index);
  std::string id(parent_id);
  id += '.';
  id += std::to_string(index);
  return id;
}

std::vector<std::uint32_t> id_components(std::string_view id) {
  std::vector<std::uint32_t> out;
  if (id == kRootId) return out;
  std::size_t start = 0;
  while (start <= id.size()) {
    const std::size_t dot = std::min(id.find('.', start), id.size());
    std::uint32_t value = 0;
    const auto [ptr, ec] = std::from_chars(id.data() + start, id.data() + dot, value);
    if (ec != std::errc{} || ptr != id.data() + dot) {
      throw Error(ErrorKind::Parse, "malformed node id '" + std::string(id) + "'");
    }
    out.push_back(value);
    start = dot + 1;
  }
  return out;
}

bool canonical_less(std::string_view a, std::string_view b) {
  const auto ca = id_components(a);
  const auto cb = id_components(b);
  if (ca.size() != cb.size()) return ca.size() < cb.size();
  return ca < cb;
}

std::uint32_t word_count(std::string_view text) noexcept {
  std::uint32_t count = 0;
  bool in_word = false;
  for (unsigned char c : text) {
    const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
    if (!space && !in_word) ++count;
    in_word = !space;
  }
  return count;
}

json node_to_json(const TreeNode& node, bool include_embedding) {
  json record{{"id", node.id},
              {"parent_id", node.parent_id},
              {"layer", node.layer},
              {"role", to_string(node.role)},
              {"text", node.text},
              {"token_count", node.token_count},
              {"gen_meta",
               {{"backend_id", node.gen_meta.backend_id},
                {"finish_reason", to_string(node.gen_meta.finish_reason)},
                {"sample_index", node.gen_meta.sample_index}}}};
  if (include_embedding && node.embedding) record["embedding"] = *node.embedding;
  return record;
}

TreeNode node_from_json(const json& record) {
  try {
    TreeNode node;
    node.id = record.at("id").get<std::string>();
    node.parent_id = record.at("parent_id").get<std::string>();
    node.layer = record.at("layer").get<std::uint32_t>();
    node.role = role_from_string(record.at("role").get<std::string>());
    node.text = record.at("text").get<std::string>();
    node.token_count = record.at("token_count").get<std::uint32_t>();
    const json& meta = record.at("gen_meta");
    node.gen_meta.backend_id = meta.at("backend_id").get<std::string>();
    node.gen_meta.finish_reason =
        finish_reason_from_string(meta.at("finish_reason").get<std::string>());
    node.gen_meta.sample_index = meta.at("sample_index").get<std::uint32_t>();
    if (record.contains("embedding")) {
      node.embedding = record.at("embedding").get<std::vector<double>>();
    }
    return node;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("malformed node record: ") + e.what());
  }
}

std::vector<std::string> LeafPath::texts() const {
  std::vector<std::string> out;
  out.reserve(nodes.size());
  for (const TreeNode* n : nodes) out.push_back(n->text);
  return out;
}

Tree::Tree(TreeConfig config) : config_(std::move(config)) {
  TreeNode root;
  root.id = std::string(kRootId);
  root.layer = 0;
  root.role = Role::Root;
  root.text = config_.system_prompt;
  root.token_count = word_count(root.text);
  layers_.resize(config_.depth() + 1);
  layers_[0].push_back(root.id);
  nodes_.emplace(root.id, std::move(root));
}

const TreeNode* Tree::find(std::string_view id) const {
  const auto it = nodes_.find(std::string(id));
  return it == nodes_.end() ? nullptr : &it->second;
}

const TreeNode& Tree::node(std::string_view id) const {
  const TreeNode* found = find(id);
  if (!found) throw Error(ErrorKind::InvalidArgument, "no node '" + std::string(id) + "'");
  return *found;
}

TreeNode& Tree::mutable_node(std::string_view id) {
  const auto it = nodes_.find(std::string(id));
  if (it == nodes_.end()) throw Error(ErrorKind::InvalidArgument, "no node '" + std::string(id) + "'");
  return it->second;
}

std::vector<std::string> Tree::path_texts(std::string_view id) const {
  std::vector<std::string> texts;
  const TreeNode* current = &node(id);
  while (current->role != Role::Root) {
    texts.push_back(current->text);
    current = &node(current->parent_id);
  }
  std::reverse(texts.begin(), texts.end());
  return texts;
}

void Tree::check_child(const TreeNode& parent, const TreeNode& child, std::size_t position) const {
  if (child.parent_id != parent.id) {
    throw Error(ErrorKind::Structure, "node '" + child.id + "' does not belong to '" + parent.id + "'");
  }
  if (child.layer != parent.layer + 1 || child.layer > config_.depth()) {
    throw Error(ErrorKind::Structure, "node '" + child.id + "' has inconsistent layer");
  }
  if (child.id != child_id(parent.id, position)) {
    throw Error(ErrorKind::Structure, "node '" + child.id + "' is out of structural order");
  }
  if (child.role != config_.layer(child.layer).role) {
    throw Error(ErrorKind::Structure, "node '" + child.id + "' has the wrong role for its layer");
  }
}

void Tree::insert_replayed(TreeNode child) {
  TreeNode& parent = mutable_node(child.parent_id);
  check_child(parent, child, parent.children.size());
  parent.children.push_back(child.id);
  layers_[child.layer].push_back(child.id);
  std::string key = child.id;
  nodes_.emplace(std::move(key), std::move(child));
}

void Tree::mark_expanded(std::string_view parent_id, std::uint32_t shortfall,
                         std::uint32_t dedup_dropped) {
  TreeNode& parent = mutable_node(parent_id);
  parent.expanded = true;
  parent.shortfall = shortfall;
  parent.dedup_dropped = dedup_dropped;
}

void Tree::commit_children(std::string_view parent_id, std::vector<TreeNode> children,
                           std::uint32_t shortfall, std::uint32_t dedup_dropped) {
  const TreeNode& parent = node(parent_id);
  if (parent.expanded) {
    throw Error(ErrorKind::Structure, "node '" + parent.id + "' is already expanded");
  }
  if (parent.layer >= config_.depth()) {
    throw Error(ErrorKind::Structure, "node '" + parent.id + "' is at the last layer");
  }
  if (children.size() > config_.layer(parent.layer + 1).branching) {
    throw Error(ErrorKind::Structure, "too many children for '" + parent.id + "'");
  }
  // Validate the whole set first so a rejected commit leaves no trace.
  for (std::size_t i = 0; i < children.size(); ++i) {
    check_child(parent, children[i], parent.children.size() + i);
  }
  const std::string pid = parent.id;
  for (TreeNode& child : children) insert_replayed(std::move(child));
  mark_expanded(pid, shortfall, dedup_dropped);
}

std::vector<std::string> Tree::layer_ids(std::uint32_t layer) const {
  if (layer >= layers_.size()) return {};
  std::vector<std::string> ids = layers_[layer];
  std::sort(ids.begin(), ids.end(),
            [](const std::string& a, const std::string& b) { return canonical_less(a, b); });
  return ids;
}

std::vector<std::string> Tree::canonical_ids() const {
  std::vector<std::string> out;
  out.reserve(nodes_.size());
  for (std::uint32_t layer = 0; layer < layers_.size(); ++layer) {
    auto ids = layer_ids(layer);
    out.insert(out.end(), ids.begin(), ids.end());
  }
  return out;
}

std::vector<std::string> Tree::pending_parents() const {
  std::vector<std::string> out;
  for (std::uint32_t layer = 0; layer < config_.depth(); ++layer) {
    for (const std::string& id : layer_ids(layer)) {
      if (!node(id).expanded) out.push_back(id);
    }
  }
  return out;
}

bool Tree::is_complete() const {
  for (std::uint32_t layer = 0; layer < config_.depth(); ++layer) {
    for (const std::string& id : layers_[layer]) {
      if (!node(id).expanded) return false;
    }
  }
  return true;
}

std::uint32_t Tree::deepest_completed_layer() const {
  for (std::uint32_t layer = 0; layer < config_.depth(); ++layer) {
    for (const std::string& id : layers_[layer]) {
      if (!node(id).expanded) return layer;
    }
  }
  return static_cast<std::uint32_t>(config_.depth());
}

std::uint64_t Tree::total_shortfall() const {
  std::uint64_t total = 0;
  for (const auto& [id, n] : nodes_) total += n.shortfall;
  return total;
}

std::uint64_t Tree::total_dedup_dropped() const {
  std::uint64_t total = 0;
  for (const auto& [id, n] : nodes_) total += n.dedup_dropped;
  return total;
}

std::vector<LeafPath> Tree::paths_to_layer(std::uint32_t layer) const {
  std::vector<LeafPath> paths;
  for (const std::string& id : layer_ids(layer)) {
    LeafPath path;
    path.system_prompt = config_.system_prompt;
    for (const TreeNode* current = &node(id); current->role != Role::Root;
         current = &node(current->parent_id)) {
      path.nodes.push_back(current);
    }
    std::reverse(path.nodes.begin(), path.nodes.end());
    paths.push_back(std::move(path));
  }
  return paths;
}

std::vector<LeafPath> Tree::leaf_paths(bool permissive) const {
  std::uint32_t target = static_cast<std::uint32_t>(config_.depth());
  if (!is_complete()) {
    if (!permissive) {
      throw Error(ErrorKind::Incomplete, "incomplete tree: " +
                                             std::to_string(pending_parents().size()) +
                                             " parents still pending");
    }
    target = deepest_completed_layer();
    if (config_.mode == Mode::SFT) target -= target % 2;
  }
  if (target == 0) return {};
  return paths_to_layer(target);
}

}  // namespace treegen
