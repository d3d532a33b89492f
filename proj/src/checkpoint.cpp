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

#include "treegen/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <unistd.h>

#include "treegen/errors.hpp"
#include "treegen/hash.hpp"

namespace treegen {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file_atomic(const fs::path& path, const std::string& bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write '" + tmp.string() + "'");
    out << bytes;
    out.flush();
    if (!out) throw Error(ErrorKind::Io, "failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot rename '" + tmp.string() + "': " + ec.message());
}

json parse_json(const std::string& text, const fs::path& where) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Parse, where.string() + ": " + e.what());
  }
}

struct ReplayResult {
  std::size_t committed_bytes = 0;
};

// Replays `content` into `tree`. Returns the byte offset just past the last
// commit marker (or the root record).
ReplayResult replay_content(const std::string& content, Tree& tree,
                            std::vector<std::string>* warnings, const fs::path& where) {
  auto warn = [&](const std::string& message) {
    if (warnings) warnings->push_back(where.string() + ": " + message);
  };

  ReplayResult result;
  std::vector<TreeNode> pending;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool saw_root = false;
  while (pos < content.size()) {
    const std::size_t newline = content.find('\n', pos);
    if (newline == std::string::npos) {
      warn("dropped partial trailing record at line " + std::to_string(line_no + 1));
      break;
    }
    ++line_no;
    const std::string line = content.substr(pos, newline - pos);
    const std::size_t next = newline + 1;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error&) {
      if (next >= content.size()) {
        warn("dropped unparsable trailing record at line " + std::to_string(line_no));
        break;
      }
      throw Error(ErrorKind::Parse, where.string() + ": corrupt record at line " +
                                        std::to_string(line_no));
    }

    if (!saw_root) {
      const TreeNode root = node_from_json(record);
      if (root.id != kRootId || root.text != tree.root().text) {
        throw Error(ErrorKind::Parse, where.string() + ": first record is not the expected root");
      }
      saw_root = true;
      result.committed_bytes = next;
    } else if (record.contains("commit")) {
      const std::string parent_id = record.at("commit").get<std::string>();
      const auto children = record.at("children").get<std::size_t>();
      if (children != pending.size()) {
        throw Error(ErrorKind::Parse, where.string() + ": commit for '" + parent_id +
                                          "' at line " + std::to_string(line_no) +
                                          " does not match its child records");
      }
      for (const TreeNode& child : pending) {
        if (child.parent_id != parent_id) {
          throw Error(ErrorKind::Parse, where.string() + ": record '" + child.id +
                                            "' is not a child of '" + parent_id + "'");
        }
      }
      if (tree.node(parent_id).expanded) {
        throw Error(ErrorKind::Parse, where.string() + ": '" + parent_id + "' committed twice");
      }
      for (TreeNode& child : pending) tree.insert_replayed(std::move(child));
      pending.clear();
      tree.mark_expanded(parent_id, record.value("shortfall", 0U), record.value("dropped", 0U));
      result.committed_bytes = next;
    } else {
      pending.push_back(node_from_json(record));
    }
    pos = next;
  }
  if (!saw_root) throw Error(ErrorKind::Parse, where.string() + ": missing root record");
  if (!pending.empty()) {
    warn("dropped " + std::to_string(pending.size()) + " uncommitted record(s)");
  }
  return result;
}

}  // namespace

CheckpointStore::CheckpointStore(fs::path directory, bool include_embeddings)
    : directory_(std::move(directory)), include_embeddings_(include_embeddings) {}

CheckpointStore::~CheckpointStore() {
  if (nodes_) std::fclose(nodes_);
}

bool CheckpointStore::has_checkpoint() const {
  return fs::exists(config_path()) && fs::exists(nodes_path());
}

TreeConfig CheckpointStore::stored_config() const {
  const json doc = parse_json(read_file(config_path()), config_path());
  return config_from_json(doc.at("config"));
}

std::uint64_t CheckpointStore::stored_hash() const {
  const json doc = parse_json(read_file(config_path()), config_path());
  return std::stoull(doc.at("hash").get<std::string>(), nullptr, 16);
}

void CheckpointStore::initialize(const TreeConfig& config) {
  if (has_checkpoint()) {
    throw Error(ErrorKind::Io, "checkpoint already exists in '" + directory_.string() + "'");
  }
  std::error_code ec;
  fs::create_directories(directory_, ec);
  if (ec) {
    throw Error(ErrorKind::Io, "cannot create '" + directory_.string() + "': " + ec.message());
  }
  const json doc{{"config", config_to_json(config)}, {"hash", hex64(config_hash(config))}};
  write_file_atomic(config_path(), doc.dump(2) + "\n");

  const Tree fresh(config);
  write_file_atomic(nodes_path(), node_to_json(fresh.root(), include_embeddings_).dump() + "\n");
}

Tree CheckpointStore::replay(const TreeConfig& config, std::vector<std::string>* warnings,
                             bool repair) {
  Tree tree(config);
  const std::string content = read_file(nodes_path());
  const ReplayResult result = replay_content(content, tree, warnings, nodes_path());
  if (repair && result.committed_bytes < content.size()) {
    if (nodes_) {
      std::fclose(nodes_);
      nodes_ = nullptr;
    }
    std::error_code ec;
    fs::resize_file(nodes_path(), result.committed_bytes, ec);
    if (ec) {
      throw Error(ErrorKind::Io, "cannot truncate '" + nodes_path().string() + "': " + ec.message());
    }
  }
  return tree;
}

void CheckpointStore::open_for_append() {
  if (nodes_) return;
  nodes_ = std::fopen(nodes_path().c_str(), "ab");
  if (!nodes_) throw Error(ErrorKind::Io, "cannot append to '" + nodes_path().string() + "'");
}

void CheckpointStore::write_and_sync(const std::string& bytes) {
  open_for_append();
  if (std::fwrite(bytes.data(), 1, bytes.size(), nodes_) != bytes.size() ||
      std::fflush(nodes_) != 0) {
    throw Error(ErrorKind::Io, "failed writing '" + nodes_path().string() + "'");
  }
  ::fdatasync(::fileno(nodes_));
}

void CheckpointStore::append_commit(const TreeNode& parent, std::span<const TreeNode> children,
                                    std::uint32_t shortfall, std::uint32_t dedup_dropped) {
  std::string bytes;
  for (const TreeNode& child : children) {
    bytes += node_to_json(child, include_embeddings_).dump();
    bytes += '\n';
  }
  const json marker{{"commit", parent.id},
                    {"children", children.size()},
                    {"shortfall", shortfall},
                    {"dropped", dedup_dropped}};
  bytes += marker.dump();
  bytes += '\n';
  write_and_sync(bytes);
}

void CheckpointStore::write_manifest(const json& manifest) const {
  write_file_atomic(manifest_path(), manifest.dump(2) + "\n");
}

json CheckpointStore::read_manifest() const {
  return parse_json(read_file(manifest_path()), manifest_path());
}

Tree load_tree(const fs::path& directory, std::vector<std::string>* warnings) {
  CheckpointStore store(directory);
  if (!store.has_checkpoint()) {
    throw Error(ErrorKind::NoCheckpoint, "no checkpoint in '" + directory.string() + "'");
  }
  return store.replay(store.stored_config(), warnings, /*repair=*/false);
}

std::string canonical_nodes_jsonl(const Tree& tree, bool include_embeddings) {
  std::string out;
  for (const std::string& id : tree.canonical_ids()) {
    const TreeNode& node = tree.node(id);
    json record = node_to_json(node, include_embeddings);
    record["expanded"] = node.expanded;
    record["shortfall"] = node.shortfall;
    record["dedup_dropped"] = node.dedup_dropped;
    out += record.dump();
    out += '\n';
  }
  return out;
}

}  // namespace treegen
