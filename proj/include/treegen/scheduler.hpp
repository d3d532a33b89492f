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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "treegen/backend.hpp"
#include "treegen/checkpoint.hpp"
#include "treegen/config.hpp"
#include "treegen/prompt.hpp"
#include "treegen/tree.hpp"

namespace treegen {

/// Outcome of one parent's expansion, children in selection order with
/// structural ids.
struct Expansion {
  std::vector<TreeNode> children;
  std::uint32_t shortfall = 0;
  std::uint32_t dedup_dropped = 0;
  std::uint32_t empty_completions = 0;
  std::uint32_t regenerations = 0;
  std::uint64_t backend_calls = 0;
};

/// FNV-1a-64 over (seed, parent id, layer index).
std::uint64_t expansion_seed(std::uint64_t seed, std::string_view parent_id,
                             std::uint32_t layer_index);

/// One SD-filtered expansion step. `path` holds the texts from layer 1 down
/// to `parent` (empty for the root). Backend failures propagate as
/// BackendError.
Expansion expand_parent(const TreeNode& parent, std::span<const std::string> path,
                        const TreeConfig& config, const ChatTemplate& tmpl,
                        const Backends& backends);

struct RunHooks {
  // Called on the writer thread after each parent's child set is committed.
  std::function<void(const std::string& parent_id, std::uint32_t child_layer,
                      std::size_t child_count)>
      on_commit;
};

struct RunOptions {
  unsigned workers = 8;
  // Stop (as a resumable abort) once this many non-root nodes are committed.
  // Zero means run to completion.
  std::uint64_t halt_after_nodes = 0;
  RunHooks hooks;
};

struct RunStats {
  std::uint64_t nodes_committed = 0;  // non-root
  std::uint64_t shortfalls = 0;
  std::uint64_t dedup_dropped = 0;
  std::uint64_t regenerations = 0;
  std::uint64_t backend_calls = 0;    // issued by this invocation
  std::vector<std::string> warnings;
};

struct RunResult {
  Tree tree;
  RunStats stats;
};

/// Expands the tree to full depth, resuming from `store` when it holds a
/// checkpoint with a matching config hash. Balance-Tree configs treat layers
/// as barriers; Wide-Tree configs dispatch a child's expansion as soon as
/// its parent result exists. Commits land in canonical (layer, id) order.
/// Throws HashMismatch, or Aborted after a backend failure or halt (the
/// checkpoint stays resumable).
RunResult run(const TreeConfig& config, const ChatTemplate& tmpl, const Backends& backends,
              CheckpointStore& store, const RunOptions& options);

/// run() that requires an existing checkpoint (NoCheckpoint otherwise).
RunResult resume(CheckpointStore& store, const TreeConfig& config, const ChatTemplate& tmpl,
                 const Backends& backends, const RunOptions& options);

}  // namespace treegen
