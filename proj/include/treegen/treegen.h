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

#ifndef TREEGEN_TREEGEN_H
#define TREEGEN_TREEGEN_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define TG_API __declspec(dllexport)
#else
#define TG_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct tg_config tg_config;
typedef struct tg_tree tg_tree;

typedef enum tg_status {
  TG_OK = 0,
  TG_ERR_INVALID_ARGUMENT = 1,
  TG_ERR_PARSE = 2,
  TG_ERR_VALIDATION = 3,
  TG_ERR_STRUCTURE = 4,
  TG_ERR_MODE = 5,
  TG_ERR_INCOMPLETE = 6,
  TG_ERR_EMPTY_COMPLETION = 7,
  TG_ERR_IO = 8,
  TG_ERR_BACKEND = 9,
  TG_ERR_HASH_MISMATCH = 10,
  TG_ERR_NO_CHECKPOINT = 11,
  TG_ERR_ABORTED = 12, /* resumable: the checkpoint is intact */
  TG_ERR_INTERNAL = 13
} tg_status;

/* Message of the last failed call on this thread; "" when none. */
TG_API const char* tg_last_error(void);
TG_API const char* tg_status_name(tg_status status);

/* Frees any char* returned through an out-parameter. */
TG_API void tg_string_free(char* text);

/* Configs */
TG_API tg_status tg_config_load_file(const char* path, tg_config** out);
TG_API tg_status tg_config_load_json(const char* json, tg_config** out);
TG_API void tg_config_free(tg_config* config);
/* Writes {"errors":[...],"warnings":[...]}; TG_ERR_VALIDATION when errors exist. */
TG_API tg_status tg_config_validate(const tg_config* config, char** report_json);
TG_API tg_status tg_config_hash(const tg_config* config, uint64_t* out);
TG_API tg_status tg_config_expected_leaves(const tg_config* config, uint64_t* out);

/* Generation */
typedef struct tg_generate_options {
  const char* backend;         /* "mock" (default) or "http" */
  const char* embedder;        /* NULL: same as backend */
  const char* api_base;        /* NULL: TG_API_BASE */
  const char* api_key;         /* NULL: TG_API_KEY */
  const char* model;           /* NULL: the config's model */
  const char* embedding_model;
  const char* template_id;     /* NULL: the config's template */
  unsigned workers;            /* 0: 8 */
  int resume;                  /* continue an existing checkpoint */
  uint64_t halt_after_nodes;   /* 0: run to completion */
} tg_generate_options;

TG_API void tg_generate_options_init(tg_generate_options* options);

/* Expands the tree into out_dir. manifest_json (optional) receives the run
 * manifest, also on TG_ERR_ABORTED. */
TG_API tg_status tg_generate(const tg_config* config, const char* out_dir,
                             const tg_generate_options* options, char** manifest_json);

/* Trees */
TG_API tg_status tg_tree_open(const char* dir, tg_tree** out);
TG_API void tg_tree_free(tg_tree* tree);
/* {"nodes":..,"leaves":..,"complete":..,"shortfall":..,"dedup_dropped":..,"warnings":[..]} */
TG_API tg_status tg_tree_info(const tg_tree* tree, char** info_json);

typedef struct tg_export_options {
  const char* format;       /* "sharegpt" (default), "jsonl" or "pt" */
  const char* turn_policy;  /* "full", "fixed:K", "gturn[:SEED]" or JSON; NULL: full */
  uint64_t target_size;     /* 0: every record the policy yields */
  uint64_t seed;
  int permissive;
  int inline_system;
} tg_export_options;

TG_API void tg_export_options_init(tg_export_options* options);
/* TG_OK when the policy string parses; TG_ERR_INVALID_ARGUMENT otherwise. */
TG_API tg_status tg_turn_policy_check(const char* turn_policy);

/* report_json (optional): {"records":n,"warnings":[...]} */
TG_API tg_status tg_export(const tg_tree* tree, const char* out_path,
                           const tg_export_options* options, char** report_json);

/* Analysis */
typedef struct tg_stats_options {
  const char* tree_dir;        /* fills shortfall/dedup totals from a tree */
  uint64_t diversity_pairs;    /* 0: skip the diversity sample */
  uint64_t seed;
  const char* embedder;        /* "mock" (default) or "http" */
  const char* api_base;
  const char* api_key;
  const char* embedding_model;
  const char* embeddings_out;  /* TSV path, NULL: none */
} tg_stats_options;

TG_API void tg_stats_options_init(tg_stats_options* options);
TG_API tg_status tg_corpus_stats(const char* corpus_path, const tg_stats_options* options,
                                 char** stats_json);

#ifdef __cplusplus
}
#endif

#endif  // TREEGEN_TREEGEN_H
