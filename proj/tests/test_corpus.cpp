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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "support.hpp"
#include "treegen/corpus.hpp"
#include "treegen/errors.hpp"

using namespace treegen;
using nlohmann::json;

namespace {

struct Built {
  tgtest::TempDir dir;
  std::unique_ptr<Tree> tree;
};

std::unique_ptr<Built> build(const TreeConfig& config) {
  auto b = std::make_unique<Built>();
  tgtest::MockRun mock;
  mock.run(config, b->dir.path());
  b->tree = std::make_unique<Tree>(load_tree(b->dir.path()));
  return b;
}

}  // namespace

TEST_CASE("fixed-k records from an N=[4,2,2,2] tree") {
  const auto b = build(tgtest::sft_config({4, 2, 2, 2}, 1, 1.01));
  const auto full = build_corpus(*b->tree, TurnPolicy::full_depth());
  CHECK(full.size() == 32);
  for (const auto& r : full) {
    CHECK(r.turn_count == 2);
    CHECK(r.turns.size() == 4);
    CHECK(check_record(r).empty());
    CHECK(r.id == record_id(r.source_leaf, 2));
  }
  CHECK(build_corpus(*b->tree, TurnPolicy::fixed(2)).size() == 32);

  const auto one = build_corpus(*b->tree, TurnPolicy::fixed(1));
  CHECK(one.size() == 8);
  for (const auto& r : one) CHECK(r.turn_count == 1);
  CHECK_THROWS_AS(build_corpus(*b->tree, TurnPolicy::fixed(3)), Error);
}

TEST_CASE("record contents follow the path") {
  const auto b = build(tgtest::sft_config({2, 2}));
  const auto records = build_corpus(*b->tree, TurnPolicy::full_depth());
  const ConversationRecord& r = records.front();
  CHECK(r.turns[0].from == Speaker::Human);
  CHECK(r.turns[0].value == b->tree->node("0").text);
  CHECK(r.turns[1].from == Speaker::Gpt);
  CHECK(r.turns[1].value == b->tree->node("0.0").text);
  CHECK(r.system == "You are a helpful assistant.");

  const auto inlined = build_corpus(*b->tree, TurnPolicy::full_depth(), {false, true});
  CHECK(inlined.front().turns[0].value ==
        "You are a helpful assistant.\n\n" + b->tree->node("0").text);
}

TEST_CASE("PT trees and incomplete trees are refused") {
  const auto pt = build(tgtest::pt_config({3, 2}));
  CHECK_THROWS_AS(build_corpus(*pt->tree, TurnPolicy::full_depth()), Error);

  tgtest::TempDir dir;
  tgtest::MockRun mock;
  const TreeConfig config = tgtest::sft_config({2, 2, 2, 2});
  CHECK_THROWS_AS(mock.run(config, dir.path(), 1, 2 + 4 + 2), Error);
  const Tree partial = load_tree(dir.path());
  CHECK_THROWS_AS(build_corpus(partial, TurnPolicy::full_depth()), Error);
  const auto permissive = build_corpus(partial, TurnPolicy::full_depth(), {true, false});
  CHECK(permissive.size() == 4);
}

TEST_CASE("alternation validator") {
  ConversationRecord r{"x", "", {{Speaker::Human, "q"}, {Speaker::Gpt, "a"}}, "0.0", 1};
  CHECK(check_record(r).empty());
  r.turns.push_back({Speaker::Human, "q2"});
  CHECK_FALSE(check_record(r).empty());
  r.turns.back().from = Speaker::Gpt;
  r.turn_count = 2;
  r.turns.push_back({Speaker::Human, "q3"});
  r.turns.push_back({Speaker::Gpt, "a3"});
  CHECK_FALSE(check_record(r).empty());
  r.turns = {};
  CHECK_FALSE(check_record(r).empty());
}

TEST_CASE("G-turn preset weights") {
  const TurnPolicy p = TurnPolicy::gaussian_preset(0);
  // exp(-(t-2.5)^2/2) at t = 1..4, normalized.
  const double e1 = std::exp(-1.125), e2 = std::exp(-0.125);
  const double total = 2 * (e1 + e2);
  CHECK(p.weights.at(1) == doctest::Approx(e1 / total));
  CHECK(p.weights.at(2) == doctest::Approx(e2 / total));
  CHECK(p.weights.at(1) == doctest::Approx(0.1345).epsilon(0.001));
  CHECK(p.weights.at(2) == doctest::Approx(0.3655).epsilon(0.001));
  CHECK(p.weights.at(3) == p.weights.at(2));
  CHECK(p.weights.at(4) == p.weights.at(1));
}

TEST_CASE("turn policy strings") {
  CHECK(parse_turn_policy("full").k == 0);
  CHECK(parse_turn_policy("fixed:3").k == 3);
  CHECK(parse_turn_policy("gturn:9").sample_seed == 9);
  CHECK(parse_turn_policy("gturn").kind == TurnPolicy::Kind::Mixture);
  const TurnPolicy custom =
      parse_turn_policy(R"({"kind":"mixture","weights":{"1":0.5,"2":0.5},"target_size":10})");
  CHECK(custom.weights.size() == 2);
  CHECK(custom.target_size == 10);
  CHECK_THROWS_AS(parse_turn_policy("fixed:x"), Error);
  CHECK_THROWS_AS(parse_turn_policy("fixed:0"), Error);
  CHECK_THROWS_AS(parse_turn_policy("sometimes"), Error);
}

TEST_CASE("mixture quotas and redistribution") {
  const auto b = build(tgtest::sft_config({6, 2, 2, 1}, 3, 1.01));
  // Strata: 12 one-turn prefixes, 24 two-turn.
  TurnPolicy p;
  p.kind = TurnPolicy::Kind::Mixture;
  p.weights = {{1, 0.5}, {2, 0.5}};
  p.sample_seed = 4;
  const auto autosized = build_corpus(*b->tree, p);
  CHECK(autosized.size() == 24);  // min(12 / 0.5, 24 / 0.5)
  std::map<std::uint32_t, int> hist;
  for (const auto& r : autosized) ++hist[r.turn_count];
  CHECK(hist[1] == 12);
  CHECK(hist[2] == 12);

  p.target_size = 30;
  std::vector<std::string> warnings;
  const auto stretched = build_corpus(*b->tree, p, {}, &warnings);
  CHECK(stretched.size() == 30);
  CHECK_FALSE(warnings.empty());
  hist.clear();
  for (const auto& r : stretched) ++hist[r.turn_count];
  CHECK(hist[1] == 12);
  CHECK(hist[2] == 18);

  std::set<std::string> ids;
  for (const auto& r : stretched) ids.insert(r.id);
  CHECK(ids.size() == stretched.size());

  CHECK(build_corpus(*b->tree, p) == stretched);

  p.weights = {{1, 0.5}, {3, 0.5}};
  CHECK_THROWS_AS(build_corpus(*b->tree, p), Error);
  p.weights = {{1, 0.4}, {2, 0.4}};
  CHECK_THROWS_AS(build_corpus(*b->tree, p), Error);
}

TEST_CASE("sample_to_size") {
  const auto b = build(tgtest::sft_config({8, 8}, 2, 1.01));
  const auto records = build_corpus(*b->tree, TurnPolicy::full_depth());
  REQUIRE(records.size() == 64);
  CHECK(sample_to_size(records, 64, 1) == records);
  const auto half = sample_to_size(records, 32, 7);
  CHECK(half.size() == 32);
  CHECK(sample_to_size(records, 32, 7) == half);
  std::size_t cursor = 0;
  for (const auto& r : half) {
    while (cursor < records.size() && !(records[cursor] == r)) ++cursor;
    CHECK(cursor < records.size());  // subset, original order kept
  }
  CHECK_THROWS_AS(sample_to_size(records, 65, 1), Error);
}

TEST_CASE("ShareGPT and JSONL exports round-trip") {
  const auto b = build(tgtest::sft_config({8, 8}, 2, 1.01));
  const auto records = build_corpus(*b->tree, TurnPolicy::full_depth());
  const auto path = b->dir / "c.json";
  export_sharegpt(records, path);
  const json doc = json::parse(tgtest::read_file(path));
  REQUIRE(doc.is_array());
  CHECK(doc.size() == 64);
  for (const json& r : doc) {
    CHECK(r.size() == 2);
    CHECK(r.contains("id"));
    for (const json& m : r.at("conversations")) {
      CHECK(m.size() == 2);
      CHECK((m.at("from") == "human" || m.at("from") == "gpt"));
    }
  }

  auto sorted = records;
  std::sort(sorted.begin(), sorted.end(), [](auto& x, auto& y) { return x.id < y.id; });
  auto back = import_corpus(path, "You are a helpful assistant.");
  CHECK(back == sorted);

  const auto lines = b->dir / "c.jsonl";
  export_jsonl(records, lines);
  const std::string text = tgtest::read_file(lines);
  CHECK(std::count(text.begin(), text.end(), '\n') == 64);
  CHECK(text.find('\r') == std::string::npos);
  CHECK(import_corpus(lines, "You are a helpful assistant.") == sorted);

  const std::vector<ConversationRecord> single{
      {"tg-0.0-1t", "", {{Speaker::Human, "q"}, {Speaker::Gpt, "a"}}, "0.0", 1}};
  export_sharegpt(single, path);
  const json one = json::parse(tgtest::read_file(path));
  CHECK(one.size() == 1);
  CHECK(one[0].at("conversations").size() == 2);
}

TEST_CASE("import rejects records that break the shape") {
  tgtest::TempDir dir;
  tgtest::write_file(dir / "bad.json",
                     R"([{"id":"x","conversations":[{"from":"gpt","value":"a"},{"from":"human","value":"q"}]}])");
  CHECK_THROWS_AS(import_corpus(dir / "bad.json"), Error);
  tgtest::write_file(dir / "extra.json",
                     R"([{"id":"x","system":"s","conversations":[{"from":"human","value":"q"},{"from":"gpt","value":"a"}]}])");
  CHECK_THROWS_AS(import_corpus(dir / "extra.json"), Error);
  tgtest::write_file(dir / "role.jsonl",
                     R"({"id":"x","conversations":[{"from":"user","value":"q"},{"from":"gpt","value":"a"}]})");
  CHECK_THROWS_AS(import_corpus(dir / "role.jsonl"), Error);
}

TEST_CASE("PT export") {
  const auto b = build(tgtest::pt_config({3, 2}));
  const auto path = b->dir / "pt.jsonl";
  CHECK(export_pt(*b->tree, plain_template(), path) == 6);
  const std::string text = tgtest::read_file(path);
  CHECK(std::count(text.begin(), text.end(), '\n') == 6);
  for (const std::string& marker : llama2_chat_template().role_markers()) {
    CHECK(text.find(marker) == std::string::npos);
  }
  const json first = json::parse(text.substr(0, text.find('\n')));
  CHECK(first.at("text") == b->tree->node("0").text + " " + b->tree->node("0.0").text);

  const auto sft = build(tgtest::sft_config({2, 2}));
  CHECK_THROWS_AS(export_pt(*sft->tree, plain_template(), path), Error);
}
