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
#include <cstdio>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "treegen/tree.hpp"

namespace treegen {

/// On-disk run directory:
///   config.json   {"config": <canonical config>, "hash": "0x..."}
///   nodes.jsonl   root record, then per parent: its child records followed
///                 by {"commit": parent_id, "children", "shortfall", "dropped"}
///   manifest.json run status and counters
class CheckpointStore {
 public:
  explicit CheckpointStore(std::filesystem::path directory, bool include_embeddings = false);
  ~CheckpointStore();

  CheckpointStore(const CheckpointStore&) = delete;
  CheckpointStore& operator=(const CheckpointStore&) = delete;

  const std::filesystem::path& directory() const noexcept { return directory_; }
  std::filesystem::path config_path() const { return directory_ / "config.json"; }
  std::filesystem::path nodes_path() const { return directory_ / "nodes.jsonl"; }
  std::filesystem::path manifest_path() const { return directory_ / "manifest.json"; }

  bool has_checkpoint() const;

  /// Config and hash recorded in config.json.
  TreeConfig stored_config() const;
  std::uint64_t stored_hash() const;

  /// Creates the directory, config.json and a nodes.jsonl holding the root.
  /// Throws Io when a checkpoint already exists.
  void initialize(const TreeConfig& config);

  /// Rebuilds the tree from nodes.jsonl. A partial or unparsable final line
  /// and any trailing records after the last commit marker are cut off
  /// (each cut is reported in `warnings`); with `repair` the file itself is
  /// truncated to the last committed byte. Corruption before the tail
  /// throws Parse.
  Tree replay(const TreeConfig& config, std::vector<std::string>* warnings, bool repair);

  /// Appends one parent's child set and its commit marker, then syncs.
  void append_commit(const TreeNode& parent, std::span<const TreeNode> children,
                     std::uint32_t shortfall, std::uint32_t dedup_dropped);

  void write_manifest(const nlohmann::json& manifest) const;
  nlohmann::json read_manifest() const;

 private:
  void open_for_append();
  void write_and_sync(const std::string& bytes);

  std::filesystem::path directory_;
  bool include_embeddings_;
  std::FILE* nodes_ = nullptr;
};

/// Loads config.json and replays nodes.jsonl without modifying any file.
Tree load_tree(const std::filesystem::path& directory,
               std::vector<std::string>* warnings = nullptr);

/// nodes.jsonl content re-emitted in canonical (layer, id) order, one node
/// record per line, commit markers folded into the parent records.
std::string canonical_nodes_jsonl(const Tree& tree, bool include_embeddings = false);

}  // namespace treegen
