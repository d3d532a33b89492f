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
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "treegen/config.hpp"

namespace treegen {

inline constexpr std::string_view kRootId = "root";

enum class FinishReason { Stop, Length, Error };

const char* to_string(FinishReason reason) noexcept;
FinishReason finish_reason_from_string(std::string_view text);

struct GenerationMeta {
  std::string backend_id;
  FinishReason finish_reason = FinishReason::Stop;
  std::uint32_t sample_index = 0;

  bool operator==(const GenerationMeta&) const = default;
};

/// One generated question, answer or continuation. Ids are the child-index
/// path from the root ("0.3.1"); the root itself has id "root".
struct TreeNode {
  std::string id;
  std::string parent_id;  // empty for the root
  std::uint32_t layer = 0;
  Role role = Role::Root;
  std::string text;
  std::uint32_t token_count = 0;
  std::optional<std::vector<double>> embedding;
  std::vector<std::string> children;
  GenerationMeta gen_meta;

  // Expansion outcome, set when the node's child set is committed.
  bool expanded = false;
  std::uint32_t shortfall = 0;
  std::uint32_t dedup_dropped = 0;

  bool operator==(const TreeNode&) const = default;
};

std::string child_id(std::string_view parent_id, std::size_t index);

/// Child-index components of an id; empty for the root.
std::vector<std::uint32_t> id_components(std::string_view id);

/// Canonical order: layer first, then child indices lexicographically.
bool canonical_less(std::string_view a, std::string_view b);

std::uint32_t word_count(std::string_view text) noexcept;

/// TreeNode record without the children list (derived on replay).
nlohmann::json node_to_json(const TreeNode& node, bool include_embedding);
TreeNode node_from_json(const nlohmann::json& record);

struct LeafPath {
  std::string system_prompt;             // P_0, metadata only
  std::vector<const TreeNode*> nodes;    // root excluded, in depth order

  std::vector<std::string> texts() const;
  const TreeNode& leaf() const { return *nodes.back(); }
};

/// Dialogue tree container. Single writer; readers may share a const Tree.
class Tree {
 public:
  explicit Tree(TreeConfig config);

  const TreeConfig& config() const noexcept { return config_; }
  const TreeNode& root() const { return node(kRootId); }
  const TreeNode& node(std::string_view id) const;
  const TreeNode* find(std::string_view id) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Texts of the ancestors of `id` below the root plus the node itself.
  std::vector<std::string> path_texts(std::string_view id) const;

  /// Commits a parent's child set. Children must carry the structural ids
  /// child_id(parent, 0..n-1) in order and layer parent.layer + 1.
  void commit_children(std::string_view parent_id, std::vector<TreeNode> children,
                       std::uint32_t shortfall, std::uint32_t dedup_dropped);

  /// Inserts a node whose parent is already present (checkpoint replay).
  void insert_replayed(TreeNode node);
  void mark_expanded(std::string_view parent_id, std::uint32_t shortfall,
                     std::uint32_t dedup_dropped);

  /// Node ids at `layer` in canonical order.
  std::vector<std::string> layer_ids(std::uint32_t layer) const;

  /// All ids in canonical order (root first).
  std::vector<std::string> canonical_ids() const;

  /// Nodes above the last layer that have not been expanded.
  std::vector<std::string> pending_parents() const;
  bool is_complete() const;

  /// Deepest layer L such that every node above L is expanded.
  std::uint32_t deepest_completed_layer() const;

  std::uint64_t total_shortfall() const;
  std::uint64_t total_dedup_dropped() const;

  /// Root-to-leaf paths in canonical order. An incomplete tree throws
  /// Incomplete unless `permissive`, in which case paths end at the deepest
  /// completed layer (rounded down to complete turns in SFT mode).
  std::vector<LeafPath> leaf_paths(bool permissive = false) const;

  /// Paths to every node at `layer`, canonical order.
  std::vector<LeafPath> paths_to_layer(std::uint32_t layer) const;

 private:
  TreeNode& mutable_node(std::string_view id);
  void check_child(const TreeNode& parent, const TreeNode& child, std::size_t position) const;

  TreeConfig config_;
  std::unordered_map<std::string, TreeNode> nodes_;
  std::vector<std::vector<std::string>> layers_;  // insertion order per layer
};

}  // namespace treegen
