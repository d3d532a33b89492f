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

#include "treegen/treegen.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <optional>
#include <string>

#include "treegen/analysis.hpp"
#include "treegen/backend.hpp"
#include "treegen/checkpoint.hpp"
#include "treegen/config.hpp"
#include "treegen/corpus.hpp"
#include "treegen/errors.hpp"
#include "treegen/prompt.hpp"
#include "treegen/scheduler.hpp"

struct tg_config {
  treegen::TreeConfig config;
};

struct tg_tree {
  std::unique_ptr<treegen::Tree> tree;
  std::vector<std::string> warnings;
};

namespace {

using nlohmann::json;
using treegen::Error;
using treegen::ErrorKind;

thread_local std::string g_last_error;

tg_status status_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return TG_ERR_INVALID_ARGUMENT;
    case ErrorKind::Parse: return TG_ERR_PARSE;
    case ErrorKind::Validation: return TG_ERR_VALIDATION;
    case ErrorKind::Structure: return TG_ERR_STRUCTURE;
    case ErrorKind::Mode: return TG_ERR_MODE;
    case ErrorKind::Incomplete: return TG_ERR_INCOMPLETE;
    case ErrorKind::EmptyCompletion: return TG_ERR_EMPTY_COMPLETION;
    case ErrorKind::Io: return TG_ERR_IO;
    case ErrorKind::Backend: return TG_ERR_BACKEND;
    case ErrorKind::HashMismatch: return TG_ERR_HASH_MISMATCH;
    case ErrorKind::NoCheckpoint: return TG_ERR_NO_CHECKPOINT;
    case ErrorKind::Aborted: return TG_ERR_ABORTED;
  }
  return TG_ERR_INTERNAL;
}

tg_status fail(tg_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

// Runs `body` with every exception mapped to a status code.
template <typename F>
tg_status guarded(F&& body) {
  g_last_error.clear();
  try {
    return body();
  } catch (const Error& e) {
    return fail(status_of(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(TG_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(TG_ERR_INTERNAL, e.what());
  }
}

char* duplicate(const std::string& text) {
  char* out = static_cast<char*>(std::malloc(text.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, text.data(), text.size() + 1);
  return out;
}

void emit(char** out, const json& doc) {
  if (out) *out = duplicate(doc.dump(2, ' ', false, json::error_handler_t::replace));
}

std::string or_empty(const char* text) { return text ? text : ""; }

bool is_http(const char* name, const char* fallback) {
  const std::string value = name ? name : (fallback ? fallback : "mock");
  if (value == "http") return true;
  if (value == "mock") return false;
  throw Error(ErrorKind::InvalidArgument, "unknown backend '" + value + "' (use mock or http)");
}

treegen::HttpOptions http_options(const char* base, const char* key, const std::string& model) {
  treegen::HttpOptions options;
  options.base_url = or_empty(base);
  options.api_key = or_empty(key);
  options.model = model;
  treegen::apply_http_environment(options);
  return options;
}

}  // namespace

extern "C" {

const char* tg_last_error(void) { return g_last_error.c_str(); }

const char* tg_status_name(tg_status status) {
  switch (status) {
    case TG_OK: return "ok";
    case TG_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case TG_ERR_PARSE: return "parse";
    case TG_ERR_VALIDATION: return "validation";
    case TG_ERR_STRUCTURE: return "structure";
    case TG_ERR_MODE: return "mode";
    case TG_ERR_INCOMPLETE: return "incomplete";
    case TG_ERR_EMPTY_COMPLETION: return "empty_completion";
    case TG_ERR_IO: return "io";
    case TG_ERR_BACKEND: return "backend";
    case TG_ERR_HASH_MISMATCH: return "hash_mismatch";
    case TG_ERR_NO_CHECKPOINT: return "no_checkpoint";
    case TG_ERR_ABORTED: return "aborted";
    case TG_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

void tg_string_free(char* text) { std::free(text); }

tg_status tg_config_load_file(const char* path, tg_config** out) {
  return guarded([&] {
    if (!path || !out) return fail(TG_ERR_INVALID_ARGUMENT, "null argument");
    *out = new tg_config{treegen::load_config(path)};
    return TG_OK;
  });
}

tg_status tg_config_load_json(const char* text, tg_config** out) {
  return guarded([&] {
    if (!text || !out) return fail(TG_ERR_INVALID_ARGUMENT, "null argument");
    *out = new tg_config{treegen::parse_config(text)};
    return TG_OK;
  });
}

void tg_config_free(tg_config* config) { delete config; }

tg_status tg_config_validate(const tg_config* config, char** report_json) {
  return guarded([&] {
    if (!config) return fail(TG_ERR_INVALID_ARGUMENT, "null config");
    const treegen::ValidationReport report = treegen::validate_config(config->config);
    emit(report_json, report.to_json());
    if (!report.ok()) return fail(TG_ERR_VALIDATION, report.errors.front());
    return TG_OK;
  });
}

tg_status tg_config_hash(const tg_config* config, uint64_t* out) {
  return guarded([&] {
    if (!config || !out) return fail(TG_ERR_INVALID_ARGUMENT, "null argument");
    *out = treegen::config_hash(config->config);
    return TG_OK;
  });
}

tg_status tg_config_expected_leaves(const tg_config* config, uint64_t* out) {
  return guarded([&] {
    if (!config || !out) return fail(TG_ERR_INVALID_ARGUMENT, "null argument");
    *out = treegen::expected_leaf_count(config->config);
    return TG_OK;
  });
}

void tg_generate_options_init(tg_generate_options* options) {
  if (options) *options = tg_generate_options{};
}

tg_status tg_generate(const tg_config* config, const char* out_dir,
                      const tg_generate_options* options, char** manifest_json) {
  if (manifest_json) *manifest_json = nullptr;
  std::optional<treegen::CheckpointStore> store;
  const tg_status status = guarded([&] {
    if (!config || !out_dir) return fail(TG_ERR_INVALID_ARGUMENT, "null argument");
    const tg_generate_options defaults{};
    const tg_generate_options& opts = options ? *options : defaults;

    treegen::TreeConfig cfg = config->config;
    if (opts.template_id) cfg.template_id = opts.template_id;
    if (opts.model) cfg.model = opts.model;
    const treegen::ChatTemplate tmpl = treegen::resolve_template(cfg.template_id);

    store.emplace(out_dir);
    if (opts.resume && !store->has_checkpoint()) {
      return fail(TG_ERR_NO_CHECKPOINT, std::string("no checkpoint in '") + out_dir + "'");
    }
    if (!opts.resume && store->has_checkpoint()) {
      return fail(TG_ERR_IO, std::string("'") + out_dir +
                                 "' already holds a checkpoint; resume it or pick a new directory");
    }

    std::unique_ptr<treegen::TextGenerator> generator;
    std::unique_ptr<treegen::TextEmbedder> embedder;
    if (is_http(opts.backend, nullptr)) {
      generator = std::make_unique<treegen::HttpGenerator>(
          http_options(opts.api_base, opts.api_key, cfg.model));
    } else {
      generator = std::make_unique<treegen::MockGenerator>();
    }
    if (is_http(opts.embedder, opts.backend)) {
      embedder = std::make_unique<treegen::HttpEmbedder>(
          http_options(opts.api_base, opts.api_key, or_empty(opts.embedding_model)));
    } else {
      embedder = std::make_unique<treegen::MockEmbedder>();
    }

    treegen::RunOptions run_options;
    run_options.workers = opts.workers == 0 ? 8 : opts.workers;
    run_options.halt_after_nodes = opts.halt_after_nodes;
    treegen::run(cfg, tmpl, {generator.get(), embedder.get()}, *store, run_options);
    return TG_OK;
  });
  if (manifest_json && store && std::filesystem::exists(store->manifest_path())) {
    try {
      emit(manifest_json, store->read_manifest());
    } catch (const std::exception&) {
      // The status already describes the run; a missing manifest is not worse.
    }
  }
  return status;
}

tg_status tg_tree_open(const char* dir, tg_tree** out) {
  return guarded([&] {
    if (!dir || !out) return fail(TG_ERR_INVALID_ARGUMENT, "null argument");
    auto handle = std::make_unique<tg_tree>();
    handle->tree = std::make_unique<treegen::Tree>(treegen::load_tree(dir, &handle->warnings));
    *out = handle.release();
    return TG_OK;
  });
}

void tg_tree_free(tg_tree* tree) { delete tree; }

tg_status tg_tree_info(const tg_tree* handle, char** info_json) {
  return guarded([&] {
    if (!handle || !info_json) return fail(TG_ERR_INVALID_ARGUMENT, "null argument");
    const treegen::Tree& tree = *handle->tree;
    const auto depth = static_cast<std::uint32_t>(tree.config().depth());
    emit(info_json, json{{"nodes", tree.size() - 1},
                         {"leaves", tree.layer_ids(depth).size()},
                         {"complete", tree.is_complete()},
                         {"shortfall", tree.total_shortfall()},
                         {"dedup_dropped", tree.total_dedup_dropped()},
                         {"warnings", handle->warnings}});
    return TG_OK;
  });
}

void tg_export_options_init(tg_export_options* options) {
  if (options) *options = tg_export_options{};
}

tg_status tg_turn_policy_check(const char* turn_policy) {
  return guarded([&] {
    treegen::parse_turn_policy(or_empty(turn_policy));
    return TG_OK;
  });
}

tg_status tg_export(const tg_tree* handle, const char* out_path,
                    const tg_export_options* options, char** report_json) {
  return guarded([&] {
    if (!handle || !out_path) return fail(TG_ERR_INVALID_ARGUMENT, "null argument");
    const tg_export_options defaults{};
    const tg_export_options& opts = options ? *options : defaults;
    const std::string format = opts.format ? opts.format : "sharegpt";
    const treegen::Tree& tree = *handle->tree;
    std::vector<std::string> warnings = handle->warnings;
    std::size_t written = 0;

    if (format == "pt") {
      if (opts.turn_policy || opts.target_size) {
        return fail(TG_ERR_INVALID_ARGUMENT, "turn policies and target sizes need sharegpt or jsonl");
      }
      const auto tmpl = treegen::resolve_template(tree.config().template_id);
      written = treegen::export_pt(tree, tmpl, out_path, opts.permissive != 0);
    } else if (format == "sharegpt" || format == "jsonl") {
      treegen::TurnPolicy policy = treegen::parse_turn_policy(or_empty(opts.turn_policy));
      if (policy.sample_seed == 0) policy.sample_seed = opts.seed;
      const bool mixture = policy.kind == treegen::TurnPolicy::Kind::Mixture;
      if (mixture && opts.target_size) policy.target_size = opts.target_size;
      treegen::BuildOptions build{opts.permissive != 0, opts.inline_system != 0};
      auto records = treegen::build_corpus(tree, policy, build, &warnings);
      if (!mixture && opts.target_size) {
        records = treegen::sample_to_size(records, opts.target_size, opts.seed);
      }
      if (format == "sharegpt") {
        treegen::export_sharegpt(records, out_path);
      } else {
        treegen::export_jsonl(records, out_path);
      }
      written = records.size();
    } else {
      return fail(TG_ERR_INVALID_ARGUMENT, "unknown format '" + format + "'");
    }
    emit(report_json, json{{"records", written}, {"warnings", warnings}});
    return TG_OK;
  });
}

void tg_stats_options_init(tg_stats_options* options) {
  if (options) *options = tg_stats_options{};
}

tg_status tg_corpus_stats(const char* corpus_path, const tg_stats_options* options,
                          char** stats_json) {
  return guarded([&] {
    if (!corpus_path || !stats_json) return fail(TG_ERR_INVALID_ARGUMENT, "null argument");
    const tg_stats_options defaults{};
    const tg_stats_options& opts = options ? *options : defaults;

    const auto records = treegen::import_corpus(corpus_path);
    treegen::CorpusStats stats = treegen::compute_stats(records);
    if (opts.tree_dir) {
      const treegen::Tree tree = treegen::load_tree(opts.tree_dir);
      stats.shortfall_count = tree.total_shortfall();
      stats.dedup_drop_count = tree.total_dedup_dropped();
    }
    json doc = treegen::stats_to_json(stats);

    if (opts.diversity_pairs || opts.embeddings_out) {
      std::unique_ptr<treegen::TextEmbedder> embedder;
      if (is_http(opts.embedder, nullptr)) {
        embedder = std::make_unique<treegen::HttpEmbedder>(
            http_options(opts.api_base, opts.api_key, or_empty(opts.embedding_model)));
      } else {
        embedder = std::make_unique<treegen::MockEmbedder>();
      }
      if (opts.diversity_pairs) {
        const auto d = treegen::diversity_sample(records, *embedder, opts.diversity_pairs, opts.seed);
        doc["diversity"] = {
            {"pairs", d.pairs}, {"mean_cosine", d.mean_cosine}, {"p10", d.p10}, {"p90", d.p90}};
      }
      if (opts.embeddings_out) treegen::export_embeddings(records, *embedder, opts.embeddings_out);
    }
    emit(stats_json, doc);
    return TG_OK;
  });
}

}  // extern "C"
