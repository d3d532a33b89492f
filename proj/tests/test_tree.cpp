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

#include <doctest.h>

#include "support.hpp"
#include "treegen/errors.hpp"
#include "treegen/tree.hpp"

using namespace treegen;

namespace {

std::vector<TreeNode> make_children(const Tree& tree, std::string_view parent_id_view,
                                    std::size_t count) {
  const std::string parent_id(parent_id_view);
  const TreeNode& parent = tree.node(parent_id);
  std::vector<TreeNode> out;
  for (std::size_t i = 0; i < count; ++i) {
    TreeNode child;
    child.id = child_id(parent_id, i);
    child.parent_id = parent_id;
    child.layer = parent.layer + 1;
    child.role = tree.config().layer(child.layer).role;
    child.text = "text " + child.id;
    child.token_count = word_count(child.text);
    out.push_back(std::move(child));
  }
  return out;
}

// Expands every node to its layer's full branching.
Tree full_tree(const TreeConfig& config) {
  Tree tree(config);
  for (std::uint32_t layer = 0; layer < config.depth(); ++layer) {
    for (const std::string& id : tree.layer_ids(layer)) {
      tree.commit_children(id, make_children(tree, id, config.layer(layer + 1).branching), 0, 0);
    }
  }
  return tree;
}

}  // namespace

TEST_CASE("structural ids and canonical order") {
  CHECK(child_id(kRootId, 3) == "3");
  CHECK(child_id("3", 0) == "3.0");
  CHECK(id_components("12.0.7") == std::vector<std::uint32_t>{12, 0, 7});
  CHECK(canonical_less("9", "10"));
  CHECK(canonical_less("1.5", "2.0"));
  CHECK(canonical_less("7", "0.0"));
  CHECK(canonical_less(kRootId, "0"));
  CHECK_FALSE(canonical_less("10", "9"));
}

TEST_CASE("leaf paths of complete trees") {
  const Tree small = full_tree(tgtest::sft_config({2, 2}));
  const auto paths = small.leaf_paths();
  REQUIRE(paths.size() == 4);
  for (const LeafPath& p : paths) {
    REQUIRE(p.nodes.size() == 2);
    CHECK(p.nodes[0]->role == Role::Question);
    CHECK(p.nodes[1]->role == Role::Answer);
    CHECK(p.system_prompt == "You are a helpful assistant.");
  }

  const Tree big = full_tree(tgtest::sft_config({4, 2, 2, 2}));
  const auto leaves = big.leaf_paths();
  CHECK(leaves.size() == 4 * 2 * 2 * 2);
  for (const LeafPath& p : leaves) CHECK(p.nodes.size() == 4);
  CHECK(big.size() == 1 + 4 + 8 + 16 + 32);
  CHECK(big.is_complete());
  CHECK(big.paths_to_layer(2).size() == 8);
}

TEST_CASE("a parent with a shortfall yields fewer paths") {
  Tree tree(tgtest::sft_config({2, 2}));
  tree.commit_children(kRootId, make_children(tree, kRootId, 2), 0, 0);
  tree.commit_children("0", make_children(tree, "0", 2), 0, 0);
  tree.commit_children("1", make_children(tree, "1", 1), 1, 1);
  CHECK(tree.is_complete());
  CHECK(tree.leaf_paths().size() == 3);
  CHECK(tree.total_shortfall() == 1);
  CHECK(tree.total_dedup_dropped() == 1);
}

TEST_CASE("incomplete trees") {
  Tree tree(tgtest::sft_config({2, 2, 2, 2}));
  tree.commit_children(kRootId, make_children(tree, kRootId, 2), 0, 0);
  for (const std::string& id : tree.layer_ids(1)) {
    tree.commit_children(id, make_children(tree, id, 2), 0, 0);
  }
  tree.commit_children("0.0", make_children(tree, "0.0", 2), 0, 0);
  CHECK_FALSE(tree.is_complete());
  CHECK(tree.deepest_completed_layer() == 2);
  CHECK_THROWS_AS(tree.leaf_paths(), Error);
  const auto partial = tree.leaf_paths(/*permissive=*/true);
  CHECK(partial.size() == 4);
  for (const LeafPath& p : partial) CHECK(p.nodes.size() == 2);
  // Three layer-2 nodes and the two new layer-3 nodes.
  CHECK(tree.pending_parents().size() == 5);
}

TEST_CASE("commit_children rejects malformed child sets") {
  Tree tree(tgtest::sft_config({2, 2}));
  auto children = make_children(tree, kRootId, 3);
  CHECK_THROWS_AS(tree.commit_children(kRootId, children, 0, 0), Error);

  children = make_children(tree, kRootId, 2);
  std::swap(children[0].id, children[1].id);
  CHECK_THROWS_AS(tree.commit_children(kRootId, children, 0, 0), Error);

  children = make_children(tree, kRootId, 2);
  children[1].role = Role::Answer;
  CHECK_THROWS_AS(tree.commit_children(kRootId, children, 0, 0), Error);

  tree.commit_children(kRootId, make_children(tree, kRootId, 2), 0, 0);
  CHECK_THROWS_AS(tree.commit_children(kRootId, make_children(tree, kRootId, 2), 0, 0), Error);
}

TEST_CASE("node records round-trip") {
  TreeNode node;
  node.id = "3.1";
  node.parent_id = "3";
  node.layer = 2;
  node.role = Role::Answer;
  node.text = "caf\xc3\xa9 \"quoted\"\nline";
  node.token_count = 3;
  node.embedding = EmbeddingVector{0.25, -0.5};
  node.gen_meta = {"mock", FinishReason::Length, 7};

  const TreeNode back = node_from_json(node_to_json(node, true));
  CHECK(back.id == node.id);
  CHECK(back.parent_id == node.parent_id);
  CHECK(back.text == node.text);
  CHECK(back.role == node.role);
  CHECK(back.embedding == node.embedding);
  CHECK(back.gen_meta.sample_index == 7);
  CHECK(back.gen_meta.finish_reason == FinishReason::Length);
  CHECK_FALSE(node_from_json(node_to_json(node, false)).embedding.has_value());
}
