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
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "treegen/backend.hpp"
#include "treegen/corpus.hpp"

namespace treegen {

struct LengthStats {
  std::uint64_t min = 0;
  std::uint64_t max = 0;
  double mean = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
};

struct CorpusStats {
  std::uint64_t record_count = 0;
  std::map<std::uint32_t, std::uint64_t> turn_histogram;
  LengthStats text_length_stats;  // Unicode code points per message
  std::uint64_t shortfall_count = 0;
  std::uint64_t dedup_drop_count = 0;
};

/// Exact counts over `records`. Shortfall and dedup totals are not visible in
/// records and stay zero unless filled from a tree or manifest.
CorpusStats compute_stats(std::span<const ConversationRecord> records);
nlohmann::json stats_to_json(const CorpusStats& stats);

/// Number of Unicode code points in UTF-8 `text`.
std::uint64_t codepoint_count(std::string_view text);

/// Linear-interpolated percentile of ascending `sorted`, q in [0, 1].
double percentile(std::span<const double> sorted, double q);

struct DiversityStats {
  double mean_cosine = 0.0;
  double p10 = 0.0;
  double p90 = 0.0;
  std::uint64_t pairs = 0;
};

/// Text a record is embedded as: every turn value joined by "\n".
std::string record_text(const ConversationRecord& record);

/// Cosine statistics over `n_pairs` distinct unordered record pairs drawn
/// uniformly with `seed`. Asks for fewer pairs when fewer exist.
DiversityStats diversity_sample(std::span<const ConversationRecord> records,
                                TextEmbedder& embedder, std::uint64_t n_pairs,
                                std::uint64_t seed);

/// TSV with header "id\te0..e{dim-1}", one row per record in input order.
void export_embeddings(std::span<const ConversationRecord> records, TextEmbedder& embedder,
                       const std::filesystem::path& path);

}  // namespace treegen
