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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "treegen/backend.hpp"
#include "treegen/checkpoint.hpp"
#include "treegen/config.hpp"
#include "treegen/corpus.hpp"
#include "treegen/prompt.hpp"
#include "treegen/scheduler.hpp"

namespace tgtest {

namespace fs = std::filesystem;

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string pattern = (fs::temp_directory_path() / "treegen-test-XXXXXX").string();
    if (!::mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed");
    path_ = pattern;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << bytes;
}

// SFT config with constant question budgets and answer budgets growing with
// depth, so validation raises no warnings.
inline treegen::TreeConfig sft_config(const std::vector<std::uint32_t>& branching,
                                      std::uint64_t seed = 1, double tau = 0.95) {
  treegen::TreeConfig config;
  config.mode = treegen::Mode::SFT;
  config.system_prompt = "You are a helpful assistant.";
  config.seed = seed;
  config.dedup_threshold = tau;
  for (std::size_t i = 0; i < branching.size(); ++i) {
    treegen::LayerSpec layer;
    layer.branching = branching[i];
    const bool question = i % 2 == 0;
    layer.role = question ? treegen::Role::Question : treegen::Role::Answer;
    layer.max_tokens = question ? 32 : static_cast<std::uint32_t>(64 * (i / 2 + 1));
    layer.temperature = treegen::default_temperature(layer.role);
    config.layers.push_back(layer);
  }
  return config;
}

inline treegen::TreeConfig pt_config(const std::vector<std::uint32_t>& branching,
                                     std::uint64_t seed = 1) {
  treegen::TreeConfig config;
  config.mode = treegen::Mode::PT;
  config.system_prompt = "Here are some useful world knowledge:";
  config.seed = seed;
  config.template_id = "plain";
  for (std::uint32_t n : branching) {
    treegen::LayerSpec layer;
    layer.branching = n;
    layer.role = treegen::Role::Continuation;
    layer.max_tokens = 48;
    config.layers.push_back(layer);
  }
  return config;
}

struct MockRun {
  treegen::MockGenerator generator;
  treegen::MockEmbedder embedder;

  explicit MockRun(treegen::MockGeneratorOptions options = {}) : generator(std::move(options)) {}

  treegen::Backends backends() { return {&generator, &embedder}; }

  treegen::RunResult run(const treegen::TreeConfig& config, const fs::path& dir,
                         unsigned workers = 4, std::uint64_t halt_after = 0) {
    treegen::CheckpointStore store(dir);
    treegen::RunOptions options;
    options.workers = workers;
    options.halt_after_nodes = halt_after;
    return treegen::run(config, treegen::resolve_template(config.template_id), backends(), store,
                        options);
  }
};

// Full-depth ShareGPT export of the checkpoint in `dir`, as bytes.
inline std::string sharegpt_bytes(const fs::path& dir) {
  const treegen::Tree tree = treegen::load_tree(dir);
  const auto records = treegen::build_corpus(tree, treegen::TurnPolicy::full_depth());
  const fs::path out = dir / "export.sharegpt.json";
  treegen::export_sharegpt(records, out);
  return read_file(out);
}

}  // namespace tgtest

#include <atomic>
#include <chrono>
#include <map>
#include <mutex>
#include <thread>

namespace tgtest {

// Wraps a generator to observe concurrency and layer ordering. Every call
// records the number of commits per child layer visible at call time.
class InstrumentedGenerator final : public treegen::TextGenerator {
 public:
  explicit InstrumentedGenerator(treegen::TextGenerator& inner,
                                 std::chrono::milliseconds latency = {})
      : inner_(inner), latency_(latency) {}

  std::string id() const override { return inner_.id(); }

  treegen::GenerationResult generate(const treegen::GenerationRequest& request) override {
    const int now = ++in_flight_;
    int seen = max_in_flight_.load();
    while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
    }
    {
      std::lock_guard lock(mutex_);
      calls_.push_back({request.layer, commits_});
    }
    if (latency_.count() > 0) std::this_thread::sleep_for(latency_);
    auto result = inner_.generate(request);
    --in_flight_;
    return result;
  }

  // Hook target: a parent's children at `child_layer` were committed.
  void on_commit(std::uint32_t child_layer) {
    std::lock_guard lock(mutex_);
    ++commits_[child_layer];
  }

  struct Call {
    std::uint32_t layer;
    std::map<std::uint32_t, std::uint64_t> commits_before;
  };

  std::vector<Call> calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
  }
  int max_in_flight() const { return max_in_flight_.load(); }

 private:
  treegen::TextGenerator& inner_;
  std::chrono::milliseconds latency_;
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};
  mutable std::mutex mutex_;
  std::map<std::uint32_t, std::uint64_t> commits_;
  std::vector<Call> calls_;
};

// Runs `config` through `generator` with the commit hook wired to it.
inline treegen::RunResult run_instrumented(const treegen::TreeConfig& config, const fs::path& dir,
                                           InstrumentedGenerator& generator, unsigned workers) {
  treegen::MockEmbedder embedder;
  treegen::CheckpointStore store(dir);
  treegen::RunOptions options;
  options.workers = workers;
  options.hooks.on_commit = [&](const std::string&, std::uint32_t child_layer, std::size_t) {
    generator.on_commit(child_layer);
  };
  return treegen::run(config, treegen::resolve_template(config.template_id),
                      {&generator, &embedder}, store, options);
}

// Parents at layer `layer` in a shortfall-free tree: product of N_1..N_layer.
inline std::uint64_t nodes_at_layer(const treegen::TreeConfig& config, std::uint32_t layer) {
  std::uint64_t n = 1;
  for (std::uint32_t i = 1; i <= layer; ++i) n *= config.layer(i).branching;
  return n;
}

// True when no call for child layer j started before every parent at
// layer j-1 had been committed.
inline bool respects_barriers(const treegen::TreeConfig& config,
                              const std::vector<InstrumentedGenerator::Call>& calls) {
  for (const auto& call : calls) {
    if (call.layer < 2) continue;
    const std::uint32_t parent_layer = call.layer - 1;
    const auto it = call.commits_before.find(parent_layer);
    const std::uint64_t committed = it == call.commits_before.end() ? 0 : it->second;
    if (committed != nodes_at_layer(config, parent_layer - 1)) return false;
  }
  return true;
}

}  // namespace tgtest
