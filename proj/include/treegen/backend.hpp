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

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "treegen/tree.hpp"

namespace treegen {

inline constexpr std::uint32_t kDefaultSampleCap = 64;

struct GenerationRequest {
  std::string prompt;
  std::uint32_t max_tokens = 1;
  double temperature = 1.0;
  std::uint32_t n_samples = 1;
  std::vector<std::string> stop;
  std::uint64_t request_seed = 0;
  // Completion i of this request has sample_index sample_offset + i.
  std::uint32_t sample_offset = 0;
  // Tracing only; never sent over the wire.
  std::uint32_t layer = 0;
};

struct Completion {
  std::string text;
  FinishReason finish_reason = FinishReason::Stop;
};

struct GenerationResult {
  std::vector<Completion> completions;
  std::chrono::milliseconds latency{0};
};

using EmbeddingVector = std::vector<double>;

class TextGenerator {
 public:
  virtual ~TextGenerator() = default;
  virtual std::string id() const = 0;
  virtual GenerationResult generate(const GenerationRequest& request) = 0;
};

class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;
  virtual std::string id() const = 0;
  virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts) = 0;
};

/// Both halves of a backend. Non-owning; the caller keeps them alive.
struct Backends {
  TextGenerator* generator = nullptr;
  TextEmbedder* embedder = nullptr;
};

/// Throws InvalidArgument for requests outside the generation contract.
void check_request(const GenerationRequest& request, std::uint32_t sample_cap);

// ---------------------------------------------------------------------------
// Deterministic mocks

/// Pseudo-text keyed by FNV-1a-64(seed || prompt || sample_index), with
/// word count proportional to max_tokens.
std::string mock_generate_text(std::uint64_t seed, std::string_view prompt,
                               std::uint32_t sample_index, std::uint32_t max_tokens);

struct MockGeneratorOptions {
  std::chrono::milliseconds latency{0};
  // Every sample of a request repeats sample 0 (degenerate dedup pools).
  bool repeat_samples = false;
  std::uint32_t sample_cap = kDefaultSampleCap;
  // Calls for which this returns true fail with a retryable BackendError.
  std::function<bool(const GenerationRequest&)> fail_if;
};

class MockGenerator final : public TextGenerator {
 public:
  explicit MockGenerator(MockGeneratorOptions options = {});

  std::string id() const override { return "mock"; }
  GenerationResult generate(const GenerationRequest& request) override;

  std::uint64_t calls() const noexcept { return calls_.load(); }

 private:
  MockGeneratorOptions options_;
  std::atomic<std::uint64_t> calls_{0};
};

inline constexpr std::size_t kDefaultEmbeddingDim = 16;

/// Counting embedder: whitespace tokens, lowercased, bucket FNV-1a-64(token)
/// mod dim, L2-normalized. Empty text maps to e_0.
EmbeddingVector mock_embed_text(std::string_view text, std::size_t dim = kDefaultEmbeddingDim);

class MockEmbedder final : public TextEmbedder {
 public:
  explicit MockEmbedder(std::size_t dim = kDefaultEmbeddingDim) : dim_(dim) {}

  std::string id() const override { return "mock-embed-" + std::to_string(dim_); }
  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;
  std::size_t dim() const noexcept { return dim_; }

 private:
  std::size_t dim_;
};

// ---------------------------------------------------------------------------
// OpenAI-compatible HTTP backends

struct HttpOptions {
  std::string base_url;   // e.g. "http://localhost:8000/v1"
  std::string api_key;    // bearer token; empty sends no Authorization
  std::string model;
  std::chrono::milliseconds timeout{120'000};
  int max_attempts = 3;
  std::chrono::milliseconds backoff_base{500};
  double backoff_factor = 2.0;
  std::uint32_t sample_cap = kDefaultSampleCap;
};

/// Reads TG_API_BASE / TG_API_KEY into `options` where they are unset.
/// Throws InvalidArgument naming the variable when one is still missing.
void apply_http_environment(HttpOptions& options);

struct HttpMetrics {
  std::atomic<std::uint64_t> requests{0};
  std::atomic<std::uint64_t> retries{0};
  std::atomic<std::uint64_t> failures{0};
};

class HttpGenerator final : public TextGenerator {
 public:
  explicit HttpGenerator(HttpOptions options);
  ~HttpGenerator() override;

  std::string id() const override;
  GenerationResult generate(const GenerationRequest& request) override;
  const HttpMetrics& metrics() const noexcept { return metrics_; }

 private:
  HttpOptions options_;
  HttpMetrics metrics_;
};

class HttpEmbedder final : public TextEmbedder {
 public:
  explicit HttpEmbedder(HttpOptions options);
  ~HttpEmbedder() override;

  std::string id() const override;
  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;
  const HttpMetrics& metrics() const noexcept { return metrics_; }

 private:
  HttpOptions options_;
  HttpMetrics metrics_;
  std::atomic<std::size_t> known_dim_{0};
};

}  // namespace treegen
