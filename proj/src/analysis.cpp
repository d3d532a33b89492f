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

#include "treegen/analysis.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <unordered_map>

#include "treegen/dedup.hpp"
#include "treegen/errors.hpp"
#include "treegen/hash.hpp"

namespace treegen {

namespace {

constexpr std::size_t kEmbedBatch = 256;

std::vector<EmbeddingVector> embed_all(TextEmbedder& embedder,
                                       const std::vector<std::string>& texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (std::size_t start = 0; start < texts.size(); start += kEmbedBatch) {
    const std::size_t count = std::min(kEmbedBatch, texts.size() - start);
    auto batch = embedder.embed(std::span<const std::string>(texts).subspan(start, count));
    if (batch.size() != count) {
      throw Error(ErrorKind::Backend, "embedder '" + embedder.id() + "' returned " +
                                          std::to_string(batch.size()) + " vectors for " +
                                          std::to_string(count) + " texts");
    }
    for (auto& v : batch) out.push_back(std::move(v));
  }
  return out;
}

}  // namespace

std::uint64_t codepoint_count(std::string_view text) {
  std::uint64_t count = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0) != 0x80) ++count;
  }
  return count;
}

double percentile(std::span<const double> sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double rank = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - static_cast<double>(lo));
}

CorpusStats compute_stats(std::span<const ConversationRecord> records) {
  CorpusStats stats;
  stats.record_count = records.size();
  std::vector<double> lengths;
  for (const ConversationRecord& record : records) {
    ++stats.turn_histogram[record.turn_count];
    for (const Turn& turn : record.turns) {
      lengths.push_back(static_cast<double>(codepoint_count(turn.value)));
    }
  }
  if (!lengths.empty()) {
    std::sort(lengths.begin(), lengths.end());
    LengthStats& l = stats.text_length_stats;
    l.min = static_cast<std::uint64_t>(lengths.front());
    l.max = static_cast<std::uint64_t>(lengths.back());
    double sum = 0.0;
    for (double v : lengths) sum += v;
    l.mean = sum / static_cast<double>(lengths.size());
    l.p50 = percentile(lengths, 0.50);
    l.p95 = percentile(lengths, 0.95);
  }
  return stats;
}

nlohmann::json stats_to_json(const CorpusStats& stats) {
  nlohmann::json histogram = nlohmann::json::object();
  for (const auto& [turns, count] : stats.turn_histogram) histogram[std::to_string(turns)] = count;
  const LengthStats& l = stats.text_length_stats;
  return {{"record_count", stats.record_count},
          {"turn_histogram", std::move(histogram)},
          {"text_length_stats",
           {{"min", l.min}, {"max", l.max}, {"mean", l.mean}, {"p50", l.p50}, {"p95", l.p95}}},
          {"shortfall_count", stats.shortfall_count},
          {"dedup_drop_count", stats.dedup_drop_count}};
}

std::string record_text(const ConversationRecord& record) {
  std::string text;
  for (std::size_t i = 0; i < record.turns.size(); ++i) {
    if (i > 0) text += '\n';
    text += record.turns[i].value;
  }
  return text;
}

DiversityStats diversity_sample(std::span<const ConversationRecord> records,
                                TextEmbedder& embedder, std::uint64_t n_pairs,
                                std::uint64_t seed) {
  const std::uint64_t n = records.size();
  if (n < 2) throw Error(ErrorKind::InvalidArgument, "diversity needs at least two records");
  if (n_pairs < 1) throw Error(ErrorKind::InvalidArgument, "n_pairs must be >= 1");

  // Pair p in [0, n(n-1)/2) maps to (i, j), i < j, row-major.
  std::vector<std::uint64_t> row_start(n);
  std::uint64_t total = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    row_start[i] = total;
    total += n - 1 - i;
  }
  const std::uint64_t want = std::min(n_pairs, total);

  // Floyd's algorithm: `want` distinct pair indices.
  SplitMix64 rng(seed);
  std::set<std::uint64_t> chosen;
  for (std::uint64_t j = total - want; j < total; ++j) {
    const std::uint64_t t = rng.below(j + 1);
    if (!chosen.insert(t).second) chosen.insert(j);
  }

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(want);
  std::unordered_map<std::size_t, std::size_t> slot;
  std::vector<std::string> texts;
  auto slot_of = [&](std::size_t index) {
    auto [it, inserted] = slot.emplace(index, texts.size());
    if (inserted) texts.push_back(record_text(records[index]));
    return it->second;
  };
  for (std::uint64_t p : chosen) {
    const auto row = static_cast<std::size_t>(
        std::upper_bound(row_start.begin(), row_start.end(), p) - row_start.begin() - 1);
    const auto col = static_cast<std::size_t>(row + 1 + (p - row_start[row]));
    pairs.emplace_back(slot_of(row), slot_of(col));
  }

  const std::vector<EmbeddingVector> vectors = embed_all(embedder, texts);
  std::vector<double> sims;
  sims.reserve(pairs.size());
  double sum = 0.0;
  for (const auto& [a, b] : pairs) {
    sims.push_back(cosine(vectors[a], vectors[b]));
    sum += sims.back();
  }
  std::sort(sims.begin(), sims.end());
  return {sum / static_cast<double>(sims.size()), percentile(sims, 0.10), percentile(sims, 0.90),
          static_cast<std::uint64_t>(sims.size())};
}

void export_embeddings(std::span<const ConversationRecord> records, TextEmbedder& embedder,
                       const std::filesystem::path& path) {
  std::vector<std::string> texts;
  texts.reserve(records.size());
  for (const ConversationRecord& record : records) texts.push_back(record_text(record));
  const std::vector<EmbeddingVector> vectors = embed_all(embedder, texts);

  std::size_t dim = vectors.empty() ? 0 : vectors.front().size();
  for (const auto& v : vectors) {
    if (v.size() != dim) throw Error(ErrorKind::Backend, "embedding dimensions differ");
  }

  std::string out = "id";
  for (std::size_t d = 0; d < dim; ++d) out += "\te" + std::to_string(d);
  out += '\n';
  char buffer[40];
  for (std::size_t r = 0; r < records.size(); ++r) {
    out += records[r].id;
    for (double value : vectors[r]) {
      std::snprintf(buffer, sizeof buffer, "\t%.9g", value);
      out += buffer;
    }
    out += '\n';
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  file << out;
  file.flush();
  if (!file) throw Error(ErrorKind::Io, "failed writing '" + path.string() + "'");
}

}  // namespace treegen
