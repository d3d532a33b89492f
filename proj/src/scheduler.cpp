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

#include "treegen/scheduler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <ctime>
#include <deque>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <thread>

#include "treegen/dedup.hpp"
#include "treegen/errors.hpp"
#include "treegen/hash.hpp"

namespace treegen {

using nlohmann::json;

std::uint64_t expansion_seed(std::uint64_t seed, std::string_view parent_id,
                             std::uint32_t layer_index) {
  return Fnv1a64{}.update_u64(seed).update(parent_id).update_u64(layer_index).digest();
}

namespace {

struct Candidate {
  std::string text;
  FinishReason finish_reason;
  std::uint32_t sample_index;
};

std::uint32_t candidate_count(const TreeConfig& config, std::uint32_t branching) {
  const double wanted = std::ceil(config.oversample_factor * branching - 1e-9);
  return std::max<std::uint32_t>(branching, static_cast<std::uint32_t>(wanted));
}

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

Expansion expand_parent(const TreeNode& parent, std::span<const std::string> path,
                        const TreeConfig& config, const ChatTemplate& tmpl,
                        const Backends& backends) {
  const std::uint32_t layer_index = parent.layer + 1;
  if (layer_index > config.depth()) {
    throw Error(ErrorKind::InvalidArgument, "node '" + parent.id + "' is at the last layer");
  }
  if (path.size() != parent.layer) {
    throw Error(ErrorKind::InvalidArgument, "path length does not match the parent layer");
  }
  const LayerSpec& spec = config.layer(layer_index);
  const std::uint32_t branching = spec.branching;
  const std::uint32_t per_round = candidate_count(config, branching);
  const std::string prompt =
      render_prompt(config.mode, spec.role, path, tmpl, config.system_prompt);
  const std::uint64_t seed = expansion_seed(config.seed, parent.id, layer_index);

  Expansion out;
  std::vector<Candidate> pool;

  auto sample_round = [&](std::uint32_t offset) {
    for (std::uint32_t done = 0; done < per_round;) {
      GenerationRequest request;
      request.prompt = prompt;
      request.max_tokens = spec.max_tokens;
      request.temperature = spec.temperature;
      request.n_samples = std::min(per_round - done, kDefaultSampleCap);
      request.stop = spec.stop_markers;
      request.request_seed = seed;
      request.sample_offset = offset + done;
      request.layer = layer_index;
      const GenerationResult result = backends.generator->generate(request);
      ++out.backend_calls;
      for (std::size_t i = 0; i < result.completions.size(); ++i) {
        const Completion& completion = result.completions[i];
        try {
          pool.push_back({strip_completion(completion.text, spec, tmpl), completion.finish_reason,
                          request.sample_offset + static_cast<std::uint32_t>(i)});
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::EmptyCompletion) throw;
          ++out.empty_completions;
        }
      }
      done += request.n_samples;
    }
  };

  std::vector<EmbeddingVector> embeddings;
  EmbeddingVector query;
  MmrSelection selection;
  std::set<std::size_t> dropped;  // pool indices, counted once across rounds

  auto select = [&] {
    std::vector<std::string> texts;
    if (query.empty()) texts.push_back(parent.text);
    for (std::size_t i = embeddings.size(); i < pool.size(); ++i) texts.push_back(pool[i].text);
    if (!texts.empty()) {
      std::vector<EmbeddingVector> vectors = backends.embedder->embed(texts);
      ++out.backend_calls;
      if (vectors.size() != texts.size()) {
        throw Error(ErrorKind::Backend, "embedder returned the wrong number of vectors");
      }
      std::size_t next = 0;
      if (query.empty()) query = std::move(vectors[next++]);
      for (; next < vectors.size(); ++next) embeddings.push_back(std::move(vectors[next]));
    }
    const std::size_t k = std::min<std::size_t>(branching, pool.size());
    MmrSelection picked = mmr_select(embeddings, query, k, config.mmr_lambda);
    picked.requested = branching;
    selection = near_duplicate_filter(embeddings, query, config.mmr_lambda, picked,
                                      config.dedup_threshold);
    dropped.insert(selection.dropped_as_duplicates.begin(),
                   selection.dropped_as_duplicates.end());
  };

  sample_round(0);
  select();
  if (selection.selected.size() < branching) {
    ++out.regenerations;
    sample_round(per_round);
    select();
  }

  const std::string backend_id = backends.generator->id();
  for (std::size_t rank = 0; rank < selection.selected.size(); ++rank) {
    const std::size_t index = selection.selected[rank];
    const Candidate& candidate = pool[index];
    TreeNode child;
    child.id = child_id(parent.id, rank);
    child.parent_id = parent.id;
    child.layer = layer_index;
    child.role = spec.role;
    child.text = candidate.text;
    child.token_count = word_count(candidate.text);
    child.embedding = embeddings[index];
    child.gen_meta = {backend_id, candidate.finish_reason, candidate.sample_index};
    out.children.push_back(std::move(child));
  }
  out.shortfall = branching - static_cast<std::uint32_t>(out.children.size());
  out.dedup_dropped = static_cast<std::uint32_t>(dropped.size());
  return out;
}

namespace {

struct Task {
  TreeNode parent;
  std::vector<std::string> path;  // texts from layer 1 down to the parent
};

struct TaskResult {
  Task task;
  std::optional<Expansion> expansion;
  std::exception_ptr error;
};

/// Fixed pool of workers pulling expansion tasks. Each worker runs one task
/// at a time, so at most `workers` backend calls are ever in flight.
class WorkerPool {
 public:
  WorkerPool(unsigned workers, const TreeConfig& config, const ChatTemplate& tmpl,
             const Backends& backends)
      : config_(config), tmpl_(tmpl), backends_(backends) {
    for (unsigned i = 0; i < workers; ++i) {
      threads_.emplace_back([this](std::stop_token stop) { work(stop); });
    }
  }

  ~WorkerPool() {
    for (auto& t : threads_) t.request_stop();
  }

  void submit(Task task) {
    {
      std::lock_guard lock(mutex_);
      tasks_.push_back(std::move(task));
      ++outstanding_;
    }
    tasks_cv_.notify_one();
  }

  /// Drops queued tasks that no worker has started.
  void cancel_queued() {
    std::lock_guard lock(mutex_);
    outstanding_ -= tasks_.size();
    tasks_.clear();
  }

  /// Blocks for the next finished task; nullopt when nothing is outstanding.
  std::optional<TaskResult> next_result() {
    std::unique_lock lock(mutex_);
    results_cv_.wait(lock, [&] { return !results_.empty() || outstanding_ == 0; });
    if (results_.empty()) return std::nullopt;
    TaskResult result = std::move(results_.front());
    results_.pop_front();
    --outstanding_;
    return result;
  }

 private:
  void work(std::stop_token stop) {
    for (;;) {
      Task task;
      {
        std::unique_lock lock(mutex_);
        if (!tasks_cv_.wait(lock, stop, [&] { return !tasks_.empty(); })) return;
        task = std::move(tasks_.front());
        tasks_.pop_front();
      }
      TaskResult result;
      try {
        result.expansion = expand_parent(task.parent, task.path, config_, tmpl_, backends_);
      } catch (...) {
        result.error = std::current_exception();
      }
      result.task = std::move(task);
      {
        std::lock_guard lock(mutex_);
        results_.push_back(std::move(result));
      }
      results_cv_.notify_one();
    }
  }

  const TreeConfig& config_;
  const ChatTemplate& tmpl_;
  const Backends& backends_;
  std::mutex mutex_;
  std::condition_variable_any tasks_cv_;
  std::condition_variable results_cv_;
  std::deque<Task> tasks_;
  std::deque<TaskResult> results_;
  std::size_t outstanding_ = 0;
  std::vector<std::jthread> threads_;
};

json make_manifest(const TreeConfig& config, const Backends& backends, const std::string& status,
                   const RunStats& stats, const Tree& tree, const std::string& started_at,
                   const std::string& finished_at, const std::string& error) {
  json manifest{{"status", status},
                {"config_hash", hex64(config_hash(config))},
                {"shape", to_string(classify(config))},
                {"nodes_committed", tree.size() - 1},
                {"shortfalls", tree.total_shortfall()},
                {"dedup_dropped", tree.total_dedup_dropped()},
                {"retries", stats.regenerations},
                {"backend_calls", stats.backend_calls},
                {"generator", backends.generator->id()},
                {"embedder", backends.embedder->id()},
                {"started_at", started_at},
                {"finished_at", finished_at.empty() ? json(nullptr) : json(finished_at)},
                {"exit_status", status == "complete" ? json(0) : status == "aborted" ? json(2) : json(nullptr)}};
  if (!error.empty()) manifest["error"] = error;
  return manifest;
}

}  // namespace

RunResult run(const TreeConfig& config, const ChatTemplate& tmpl, const Backends& backends,
              CheckpointStore& store, const RunOptions& options) {
  if (!backends.generator || !backends.embedder) {
    throw Error(ErrorKind::InvalidArgument, "run needs both a generator and an embedder");
  }
  if (options.workers < 1) throw Error(ErrorKind::InvalidArgument, "workers must be >= 1");
  const ValidationReport report = validate_config(config);
  if (!report.ok()) {
    throw Error(ErrorKind::Validation, "invalid config: " + report.errors.front());
  }

  RunStats stats;
  std::optional<Tree> replayed;
  if (store.has_checkpoint()) {
    const std::uint64_t stored = store.stored_hash();
    const std::uint64_t wanted = config_hash(config);
    if (stored != wanted) {
      throw Error(ErrorKind::HashMismatch, "checkpoint in '" + store.directory().string() +
                                               "' was written for config " + hex64(stored) +
                                               ", not " + hex64(wanted));
    }
    replayed.emplace(store.replay(config, &stats.warnings, /*repair=*/true));
  } else {
    store.initialize(config);
    replayed.emplace(config);
  }
  Tree tree = std::move(*replayed);

  const std::string started_at = utc_now();
  store.write_manifest(make_manifest(config, backends, "running", stats, tree, started_at, "", ""));

  const bool eager = classify(config) == TreeShape::WideTree;
  const std::uint32_t depth = static_cast<std::uint32_t>(config.depth());

  auto make_task = [&](const TreeNode& parent, std::vector<std::string> path) {
    return Task{parent, std::move(path)};
  };

  std::uint32_t layer = tree.deepest_completed_layer();
  std::vector<std::string> commit_list;
  std::size_t cursor = 0;
  std::map<std::string, TaskResult> finished;
  std::exception_ptr failure;
  bool halted = false;

  {
    WorkerPool pool(options.workers, config, tmpl, backends);

    auto load_layer = [&] {
      commit_list.clear();
      cursor = 0;
      if (layer >= depth) return;
      for (std::string& id : tree.layer_ids(layer)) {
        if (!tree.node(id).expanded) commit_list.push_back(std::move(id));
      }
    };

    auto dispatch_layer = [&] {
      for (const std::string& id : commit_list) {
        pool.submit(make_task(tree.node(id), tree.path_texts(id)));
      }
    };

    load_layer();
    dispatch_layer();
    if (eager && layer + 1 < depth) {
      // Resumed Wide-Tree: next-layer nodes committed earlier can start now.
      for (const std::string& id : tree.layer_ids(layer + 1)) {
        if (!tree.node(id).expanded) pool.submit(make_task(tree.node(id), tree.path_texts(id)));
      }
    }

    bool stopping = false;
    while (auto result = pool.next_result()) {
      if (result->error) {
        if (!failure) failure = result->error;
        stopping = true;
        pool.cancel_queued();
        continue;
      }
      if (stopping) continue;

      const Task& task = result->task;
      if (eager && task.parent.layer + 2 <= depth) {
        for (const TreeNode& child : result->expansion->children) {
          std::vector<std::string> child_path = task.path;
          child_path.push_back(child.text);
          pool.submit(make_task(child, std::move(child_path)));
        }
      }
      stats.backend_calls += result->expansion->backend_calls;
      stats.regenerations += result->expansion->regenerations;
      finished.emplace(task.parent.id, std::move(*result));

      while (!stopping && cursor < commit_list.size()) {
        const auto it = finished.find(commit_list[cursor]);
        if (it == finished.end()) break;
        Expansion& expansion = *it->second.expansion;
        const std::string parent_id = it->first;
        store.append_commit(tree.node(parent_id), expansion.children, expansion.shortfall,
                            expansion.dedup_dropped);
        const std::size_t count = expansion.children.size();
        tree.commit_children(parent_id, std::move(expansion.children), expansion.shortfall,
                             expansion.dedup_dropped);
        finished.erase(it);
        ++cursor;
        if (options.hooks.on_commit) options.hooks.on_commit(parent_id, layer + 1, count);

        if (options.halt_after_nodes > 0 && tree.size() - 1 >= options.halt_after_nodes) {
          halted = true;
          stopping = true;
          pool.cancel_queued();
          break;
        }
        if (cursor == commit_list.size()) {
          ++layer;
          load_layer();
          if (!eager) dispatch_layer();
        }
      }
    }
  }

  stats.nodes_committed = tree.size() - 1;
  stats.shortfalls = tree.total_shortfall();
  stats.dedup_dropped = tree.total_dedup_dropped();

  if (failure || halted) {
    std::string message = "run halted after " + std::to_string(stats.nodes_committed) + " nodes";
    if (failure) {
      try {
        std::rethrow_exception(failure);
      } catch (const std::exception& e) {
        message = std::string("expansion failed: ") + e.what();
      }
    }
    store.write_manifest(
        make_manifest(config, backends, "aborted", stats, tree, started_at, utc_now(), message));
    throw Error(ErrorKind::Aborted, message + " (checkpoint is resumable)");
  }

  store.write_manifest(
      make_manifest(config, backends, "complete", stats, tree, started_at, utc_now(), ""));
  return RunResult{std::move(tree), std::move(stats)};
}

RunResult resume(CheckpointStore& store, const TreeConfig& config, const ChatTemplate& tmpl,
                 const Backends& backends, const RunOptions& options) {
  if (!store.has_checkpoint()) {
    throw Error(ErrorKind::NoCheckpoint,
                "no checkpoint in '" + store.directory().string() + "' to resume");
  }
  return run(config, tmpl, backends, store, options);
}

}  // namespace treegen
