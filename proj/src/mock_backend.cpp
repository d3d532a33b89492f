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
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <thread>

#include "treegen/backend.hpp"
#include "treegen/errors.hpp"
#include "treegen/hash.hpp"

namespace treegen {

namespace {

constexpr std::array<std::string_view, 128> kVocabulary = {
    "river",     "engine",    "protein",   "market",    "glacier",   "theorem",   "lattice",
    "harvest",   "orbit",     "signal",    "compiler",  "monsoon",   "enzyme",    "ledger",
    "canyon",    "voltage",   "poem",      "migration", "fossil",    "quartz",    "treaty",
    "neuron",    "algebra",   "pigment",   "turbine",   "archive",   "coral",     "dialect",
    "furnace",   "gravity",   "habitat",   "isotope",   "journey",   "kernel",    "lantern",
    "magnet",    "nectar",    "oxygen",    "prairie",   "quantum",   "reactor",   "saddle",
    "tensor",    "umbrella",  "vaccine",   "whistle",   "yeast",     "zenith",    "anchor",
    "bridge",    "cipher",    "delta",     "eclipse",   "falcon",    "granite",   "horizon",
    "igloo",     "jasmine",   "kiln",      "lagoon",    "meadow",    "nebula",    "opera",
    "pendulum",  "quiver",    "rhythm",    "satellite", "tundra",    "utopia",    "vertex",
    "willow",    "xylem",     "yarn",      "zephyr",    "atlas",     "biome",     "cortex",
    "dynamo",    "estuary",   "fractal",   "gene",      "helix",     "inertia",   "jet",
    "kinetics",  "lens",      "mantle",    "nucleus",   "osmosis",   "photon",    "quorum",
    "radius",    "spectrum",  "tide",      "usage",     "vector",    "wavelength", "axis",
    "basalt",    "catalyst",  "dune",      "entropy",   "friction",  "geyser",    "hydrogen",
    "ion",       "joule",     "karst",     "lichen",    "momentum",  "nitrogen",  "orchid",
    "plasma",    "quasar",    "resin",     "sediment",  "thermal",   "uranium",   "valley",
    "wetland",   "xenon",     "yield",     "zinc",      "aurora",    "beacon",    "crystal",
    "drift",     "ember"};

constexpr std::array<std::string_view, 8> kOpeners = {"how", "why",  "what", "when",
                                                      "the", "each", "some", "every"};

}  // namespace

void check_request(const GenerationRequest& request, std::uint32_t sample_cap) {
  if (request.n_samples < 1) {
    throw Error(ErrorKind::InvalidArgument, "n_samples must be >= 1");
  }
  if (request.n_samples > sample_cap) {
    throw Error(ErrorKind::InvalidArgument, "n_samples " + std::to_string(request.n_samples) +
                                                " exceeds the backend cap " +
                                                std::to_string(sample_cap));
  }
  if (request.max_tokens < 1) throw Error(ErrorKind::InvalidArgument, "max_tokens must be >= 1");
  if (!(request.temperature >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "temperature must be >= 0");
  }
}

std::string mock_generate_text(std::uint64_t seed, std::string_view prompt,
                               std::uint32_t sample_index, std::uint32_t max_tokens) {
  const std::uint64_t key =
      Fnv1a64{}.update_u64(seed).update(prompt).update_u64(sample_index).digest();
  SplitMix64 rng(key);
  // Roughly one word per sixteen budgeted tokens keeps sibling texts short
  // enough for the 16-bucket mock embedder to tell them apart.
  const std::uint32_t words = std::max<std::uint32_t>(1, (max_tokens + 15) / 16);
  std::string text(kOpeners[rng.below(kOpeners.size())]);
  for (std::uint32_t i = 1; i < words; ++i) {
    text += ' ';
    text += kVocabulary[rng.below(kVocabulary.size())];
  }
  // A short hex tag makes equal word draws still produce distinct texts.
  char tag[8];
  std::snprintf(tag, sizeof tag, "%04x", static_cast<unsigned>(key & 0xffffU));
  text += ' ';
  text += tag;
  return text;
}

MockGenerator::MockGenerator(MockGeneratorOptions options) : options_(std::move(options)) {}

GenerationResult MockGenerator::generate(const GenerationRequest& request) {
  check_request(request, options_.sample_cap);
  calls_.fetch_add(1);
  if (options_.latency.count() > 0) std::this_thread::sleep_for(options_.latency);
  if (options_.fail_if && options_.fail_if(request)) {
    throw BackendError("mock backend failure injected", /*retryable=*/true, /*attempts=*/1);
  }
  GenerationResult result;
  result.latency = options_.latency;
  for (std::uint32_t i = 0; i < request.n_samples; ++i) {
    const std::uint32_t index = options_.repeat_samples ? request.sample_offset
                                                        : request.sample_offset + i;
    result.completions.push_back(
        {mock_generate_text(request.request_seed, request.prompt, index, request.max_tokens),
         FinishReason::Stop});
  }
  return result;
}

EmbeddingVector mock_embed_text(std::string_view text, std::size_t dim) {
  if (dim == 0) throw Error(ErrorKind::InvalidArgument, "embedding dim must be positive");
  EmbeddingVector v(dim, 0.0);
  std::string token;
  bool any = false;
  auto flush = [&] {
    if (token.empty()) return;
    v[fnv1a64(token) % dim] += 1.0;
    any = true;
    token.clear();
  };
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      flush();
    } else {
      token += static_cast<char>(std::tolower(c));
    }
  }
  flush();
  if (!any) {
    v[0] = 1.0;
    return v;
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

std::vector<EmbeddingVector> MockEmbedder::embed(std::span<const std::string> texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const std::string& text : texts) out.push_back(mock_embed_text(text, dim_));
  return out;
}

}  // namespace treegen
