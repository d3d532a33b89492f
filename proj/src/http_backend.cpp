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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "treegen/backend.hpp"
#include "treegen/errors.hpp"
#include "treegen/hash.hpp"

namespace treegen {

using nlohmann::json;

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path prefix without trailing slash
};

Endpoint split_base_url(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorKind::InvalidArgument, "API base '" + base_url + "' has no scheme");
  }
  const auto path_start = base_url.find('/', scheme_end + 3);
  Endpoint ep;
  ep.origin = base_url.substr(0, path_start);
  ep.prefix = path_start == std::string::npos ? "" : base_url.substr(path_start);
  while (!ep.prefix.empty() && ep.prefix.back() == '/') ep.prefix.pop_back();
  return ep;
}

// POSTs `body` with bounded retries. Transport failures and timeouts are
// retried with exponential backoff; non-2xx responses are not.
json post_json(const HttpOptions& options, HttpMetrics& metrics, const std::string& route,
               const json& body) {
  const Endpoint ep = split_base_url(options.base_url);
  httplib::Client client(ep.origin);
  const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(options.timeout);
  const auto usec = std::chrono::duration_cast<std::chrono::microseconds>(options.timeout - seconds);
  client.set_connection_timeout(seconds.count(), usec.count());
  client.set_read_timeout(seconds.count(), usec.count());
  client.set_write_timeout(seconds.count(), usec.count());
  httplib::Headers headers;
  if (!options.api_key.empty()) headers.emplace("Authorization", "Bearer " + options.api_key);

  const std::string payload = body.dump();
  const std::string path = ep.prefix + route;
  std::string last_error;
  const int attempts = std::max(1, options.max_attempts);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    metrics.requests.fetch_add(1);
    auto response = client.Post(path, headers, payload, "application/json");
    if (response) {
      if (response->status < 200 || response->status >= 300) {
        metrics.failures.fetch_add(1);
        throw BackendError("POST " + path + " returned HTTP " + std::to_string(response->status),
                           /*retryable=*/false, attempt, response->status, response->body);
      }
      try {
        return json::parse(response->body);
      } catch (const json::parse_error& e) {
        metrics.failures.fetch_add(1);
        throw BackendError("POST " + path + " returned malformed JSON: " + e.what(),
                           /*retryable=*/false, attempt, response->status, response->body);
      }
    }
    last_error = httplib::to_string(response.error());
    if (attempt < attempts) {
      metrics.retries.fetch_add(1);
      const double delay =
          static_cast<double>(options.backoff_base.count()) * std::pow(options.backoff_factor, attempt - 1);
      std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long long>(delay)));
    }
  }
  metrics.failures.fetch_add(1);
  throw BackendError("POST " + path + " failed after " + std::to_string(attempts) +
                         " attempts: " + last_error,
                     /*retryable=*/true, attempts);
}

FinishReason parse_finish_reason(const json& choice) {
  const auto it = choice.find("finish_reason");
  if (it == choice.end() || !it->is_string()) return FinishReason::Stop;
  return finish_reason_from_string(it->get<std::string>());
}

std::uint64_t sample_seed(std::uint64_t request_seed, std::uint32_t sample_index) {
  if (sample_index == 0) return request_seed;
  return Fnv1a64{}.update_u64(request_seed).update_u64(sample_index).digest();
}

bool is_blank(const std::string& text) {
  return text.find_first_not_of(" \t\r\n\f\v") == std::string::npos;
}

}  // namespace

void apply_http_environment(HttpOptions& options) {
  if (options.base_url.empty()) {
    if (const char* base = std::getenv("TG_API_BASE"); base && *base) options.base_url = base;
  }
  if (options.api_key.empty()) {
    if (const char* key = std::getenv("TG_API_KEY"); key && *key) options.api_key = key;
  }
  if (options.base_url.empty()) {
    throw Error(ErrorKind::InvalidArgument, "TG_API_BASE is not set (needed by the http backend)");
  }
  if (options.api_key.empty()) {
    throw Error(ErrorKind::InvalidArgument, "TG_API_KEY is not set (needed by the http backend)");
  }
}

HttpGenerator::HttpGenerator(HttpOptions options) : options_(std::move(options)) {
  split_base_url(options_.base_url);
}

HttpGenerator::~HttpGenerator() = default;

std::string HttpGenerator::id() const {
  return "http:" + (options_.model.empty() ? std::string("default") : options_.model);
}

GenerationResult HttpGenerator::generate(const GenerationRequest& request) {
  check_request(request, options_.sample_cap);
  const auto started = std::chrono::steady_clock::now();

  auto call = [&](std::uint32_t n, std::uint32_t first_index) {
    json body{{"prompt", request.prompt},
              {"max_tokens", request.max_tokens},
              {"temperature", request.temperature},
              {"n", n},
              {"seed", sample_seed(request.request_seed, first_index)}};
    if (!options_.model.empty()) body["model"] = options_.model;
    if (!request.stop.empty()) body["stop"] = request.stop;
    const json reply = post_json(options_, metrics_, "/completions", body);
    const auto choices = reply.find("choices");
    if (choices == reply.end() || !choices->is_array()) {
      throw BackendError("completions reply has no 'choices' array", false, 1, 200, reply.dump());
    }
    std::vector<std::pair<std::int64_t, Completion>> indexed;
    for (std::size_t i = 0; i < choices->size(); ++i) {
      const json& choice = (*choices)[i];
      const std::int64_t index = choice.value("index", static_cast<std::int64_t>(i));
      indexed.push_back({index, {choice.value("text", std::string{}), parse_finish_reason(choice)}});
    }
    std::stable_sort(indexed.begin(), indexed.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<Completion> out;
    for (auto& entry : indexed) out.push_back(std::move(entry.second));
    return out;
  };

  GenerationResult result;
  result.completions = call(request.n_samples, request.sample_offset);
  if (result.completions.size() > request.n_samples) result.completions.resize(request.n_samples);
  // Servers without native `n` support return one choice; fill the rest
  // with sequential single-sample calls.
  while (result.completions.size() < request.n_samples) {
    const auto index = request.sample_offset + static_cast<std::uint32_t>(result.completions.size());
    auto more = call(1, index);
    if (more.empty()) throw BackendError("completions reply has no choices", false, 1, 200);
    result.completions.push_back(std::move(more.front()));
  }
  result.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - started);
  return result;
}

HttpEmbedder::HttpEmbedder(HttpOptions options) : options_(std::move(options)) {
  split_base_url(options_.base_url);
}

HttpEmbedder::~HttpEmbedder() = default;

std::string HttpEmbedder::id() const {
  return "http-embed:" + (options_.model.empty() ? std::string("default") : options_.model);
}

std::vector<EmbeddingVector> HttpEmbedder::embed(std::span<const std::string> texts) {
  if (texts.empty()) throw Error(ErrorKind::InvalidArgument, "embed needs at least one text");
  std::vector<std::size_t> sent;
  json input = json::array();
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (is_blank(texts[i])) continue;
    sent.push_back(i);
    input.push_back(texts[i]);
  }

  std::vector<EmbeddingVector> out(texts.size());
  std::size_t dim = known_dim_.load();
  if (!sent.empty()) {
    json body{{"input", input}};
    if (!options_.model.empty()) body["model"] = options_.model;
    const json reply = post_json(options_, metrics_, "/embeddings", body);
    const auto data = reply.find("data");
    if (data == reply.end() || !data->is_array() || data->size() != sent.size()) {
      throw BackendError("embeddings reply does not carry one vector per input", false, 1, 200,
                         reply.dump());
    }
    for (std::size_t i = 0; i < data->size(); ++i) {
      const json& item = (*data)[i];
      const auto index = item.value("index", static_cast<std::size_t>(i));
      if (index >= sent.size()) throw BackendError("embedding index out of range", false, 1, 200);
      EmbeddingVector v = item.at("embedding").get<EmbeddingVector>();
      if (v.empty()) throw BackendError("empty embedding vector", false, 1, 200);
      for (double x : v) {
        if (!std::isfinite(x)) throw BackendError("non-finite embedding value", false, 1, 200);
      }
      if (dim == 0) dim = v.size();
      if (v.size() != dim) {
        throw Error(ErrorKind::Backend, "embedding dimension mismatch: " + std::to_string(v.size()) +
                                            " vs " + std::to_string(dim));
      }
      out[sent[index]] = std::move(v);
    }
    known_dim_.store(dim);
  }
  if (dim == 0) {
    throw Error(ErrorKind::InvalidArgument,
                "cannot infer the embedding dimension from an all-empty batch");
  }
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (out[i].empty()) {
      out[i].assign(dim, 0.0);
      out[i][0] = 1.0;
    }
  }
  return out;
}

}  // namespace treegen
