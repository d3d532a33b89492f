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

// treegen: command-line front end over the C API.
//
// stdout carries machine-readable JSON only; diagnostics go to stderr.
// Exit codes: 0 success, 1 hard error, 2 resumable abort, 64 usage error.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "treegen/treegen.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitResumable = 2;
constexpr int kExitUsage = 64;

int report(tg_status status) {
  if (status == TG_OK) return kExitOk;
  std::fprintf(stderr, "treegen: %s: %s\n", tg_status_name(status), tg_last_error());
  if (status == TG_ERR_ABORTED) return kExitResumable;
  return kExitError;
}

void print_json(char* text) {
  if (!text) return;
  std::fputs(text, stdout);
  std::fputc('\n', stdout);
  tg_string_free(text);
}

const char* opt(const std::string& value) { return value.empty() ? nullptr : value.c_str(); }

struct GenerateArgs {
  std::string config, out, backend = "mock", embedder, templ, model, embedding_model;
  unsigned workers = 8;
  bool resume = false;
};

int cmd_generate(const GenerateArgs& a) {
  tg_config* config = nullptr;
  if (tg_status s = tg_config_load_file(a.config.c_str(), &config); s != TG_OK) return report(s);
  tg_generate_options options;
  tg_generate_options_init(&options);
  options.backend = a.backend.c_str();
  options.embedder = opt(a.embedder);
  options.template_id = opt(a.templ);
  options.model = opt(a.model);
  options.embedding_model = opt(a.embedding_model);
  options.workers = a.workers;
  options.resume = a.resume ? 1 : 0;
  char* manifest = nullptr;
  const tg_status status = tg_generate(config, a.out.c_str(), &options, &manifest);
  tg_config_free(config);
  print_json(manifest);
  return report(status);
}

struct ExportArgs {
  std::string tree, format = "sharegpt", out, turn_policy;
  std::uint64_t target_size = 0, seed = 0;
  bool permissive = false, inline_system = false;
};

int cmd_export(const ExportArgs& a) {
  tg_tree* tree = nullptr;
  if (tg_status s = tg_tree_open(a.tree.c_str(), &tree); s != TG_OK) return report(s);
  tg_export_options options;
  tg_export_options_init(&options);
  options.format = a.format.c_str();
  options.turn_policy = opt(a.turn_policy);
  options.target_size = a.target_size;
  options.seed = a.seed;
  options.permissive = a.permissive ? 1 : 0;
  options.inline_system = a.inline_system ? 1 : 0;
  char* result = nullptr;
  const tg_status status = tg_export(tree, a.out.c_str(), &options, &result);
  tg_tree_free(tree);
  print_json(result);
  return report(status);
}

struct StatsArgs {
  std::string corpus, tree, embedder = "mock", embedding_model, embeddings_out;
  std::uint64_t pairs = 0, seed = 0;
};

int cmd_stats(const StatsArgs& a) {
  tg_stats_options options;
  tg_stats_options_init(&options);
  options.tree_dir = opt(a.tree);
  options.diversity_pairs = a.pairs;
  options.seed = a.seed;
  options.embedder = a.embedder.c_str();
  options.embedding_model = opt(a.embedding_model);
  options.embeddings_out = opt(a.embeddings_out);
  char* stats = nullptr;
  const tg_status status = tg_corpus_stats(a.corpus.c_str(), &options, &stats);
  print_json(stats);
  return report(status);
}

int cmd_validate(const std::string& path) {
  tg_config* config = nullptr;
  if (tg_status s = tg_config_load_file(path.c_str(), &config); s != TG_OK) return report(s);
  char* result = nullptr;
  const tg_status status = tg_config_validate(config, &result);
  tg_config_free(config);
  print_json(result);
  return report(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tree-generation corpus synthesis"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Expand a config into a checkpointed tree");
  generate->add_option("--config", gen.config, "Tree config JSON")->required();
  generate->add_option("--out", gen.out, "Checkpoint directory")->required();
  generate->add_option("--backend", gen.backend, "Generation backend")
      ->check(CLI::IsMember({"http", "mock"}));
  generate->add_option("--embedder", gen.embedder, "Embedding backend (default: --backend)")
      ->check(CLI::IsMember({"http", "mock"}));
  generate->add_option("--workers", gen.workers, "Concurrent backend calls")
      ->check(CLI::Range(1u, 1024u));
  generate->add_flag("--resume", gen.resume, "Continue an existing checkpoint");
  generate->add_option("--template", gen.templ, "Chat template id or JSON file");
  generate->add_option("--model", gen.model, "Model name sent to the HTTP backend");
  generate->add_option("--embedding-model", gen.embedding_model, "Embedding model name");

  ExportArgs exp;
  auto* exporter = app.add_subcommand("export", "Write a corpus from a complete tree");
  exporter->add_option("--tree", exp.tree, "Checkpoint directory")->required();
  exporter->add_option("--format", exp.format, "Output format")
      ->check(CLI::IsMember({"sharegpt", "jsonl", "pt"}));
  exporter->add_option("--out", exp.out, "Output file")->required();
  exporter->add_option("--turn-policy", exp.turn_policy,
                       "full | fixed:K | gturn[:SEED] | JSON object");
  exporter->add_option("--target-size", exp.target_size, "Records to keep (0: all)");
  exporter->add_option("--seed", exp.seed, "Sampling seed");
  exporter->add_flag("--permissive", exp.permissive, "Export an incomplete tree");
  exporter->add_flag("--inline-system", exp.inline_system,
                     "Prepend the system prompt to the first human turn");

  StatsArgs st;
  auto* stats = app.add_subcommand("stats", "Print corpus statistics as JSON");
  stats->add_option("--corpus", st.corpus, "ShareGPT or JSONL corpus")->required();
  stats->add_option("--tree", st.tree, "Checkpoint for shortfall and dedup totals");
  stats->add_option("--diversity-pairs", st.pairs, "Record pairs for the cosine sample");
  stats->add_option("--seed", st.seed, "Sampling seed");
  stats->add_option("--embedder", st.embedder, "Embedding backend")
      ->check(CLI::IsMember({"http", "mock"}));
  stats->add_option("--embedding-model", st.embedding_model, "Embedding model name");
  stats->add_option("--embeddings-out", st.embeddings_out, "Write record embeddings as TSV");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Check a tree config");
  validate->add_option("--config", validate_path, "Tree config JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (*generate) return cmd_generate(gen);
  if (*exporter) {
    if (exp.format == "pt" && (!exp.turn_policy.empty() || exp.target_size != 0)) {
      std::fprintf(stderr, "treegen: --turn-policy and --target-size need sharegpt or jsonl\n");
      return kExitUsage;
    }
    if (!exp.turn_policy.empty() && tg_turn_policy_check(exp.turn_policy.c_str()) != TG_OK) {
      std::fprintf(stderr, "treegen: %s\n", tg_last_error());
      return kExitUsage;
    }
    return cmd_export(exp);
  }
  if (*stats) {
    if (st.pairs == 0 && !st.embedding_model.empty() && st.embeddings_out.empty()) {
      std::fprintf(stderr, "treegen: --embedding-model needs --diversity-pairs or --embeddings-out\n");
      return kExitUsage;
    }
    return cmd_stats(st);
  }
  return cmd_validate(validate_path);
}
