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

// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit when any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "support.hpp"
#include "treegen/analysis.hpp"
#include "treegen/dedup.hpp"
#include "treegen/errors.hpp"

using namespace treegen;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
  void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double value, int digits = 3) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.*f", digits, value);
  return buffer;
}

// --------------------------------------------------------------------------

Outcome leaf_count_law() {
  Outcome out;
  // Products of the branching factors, written out by hand.
  const std::vector<std::pair<std::vector<std::uint32_t>, std::uint64_t>> cases{
      {{2, 2}, 4}, {{3, 2, 2, 2}, 24}, {{8, 4, 2, 2}, 128}};
  for (const auto& [shape, leaves] : cases) {
    const TreeConfig config = tgtest::sft_config(shape, 1, 1.01);
    tgtest::TempDir dir;
    tgtest::MockRun mock;
    const auto start = Clock::now();
    const RunResult r = mock.run(config, dir.path(), 8);
    const double elapsed = seconds_since(start);
    const std::size_t got = r.tree.leaf_paths().size();
    out.require(got == leaves, "leaves " + std::to_string(got) + " != " + std::to_string(leaves));
    out.require(elapsed < 30.0, "runtime " + fmt(elapsed) + " s");
    out.note(std::to_string(leaves) + " leaves in " + fmt(elapsed) + " s");
  }
  return out;
}

Outcome prompt_fidelity() {
  Outcome out;
  const tgtest::fs::path golden = TREEGEN_GOLDEN_DIR;
  const ChatTemplate& t = llama2_chat_template();
  const std::string p0 = "You are helpful.";
  const std::vector<std::string> q{"q"};
  const std::vector<std::string> qr{"q", "r"};
  out.require(render_question_prompt({}, t, p0) == tgtest::read_file(golden / "llama2_p1.txt"),
              "P_1 differs from fixture");
  out.require(render_answer_prompt(q, t, p0) == tgtest::read_file(golden / "llama2_p2.txt"),
              "P_2 differs from fixture");
  out.require(render_question_prompt(qr, t, p0) == tgtest::read_file(golden / "llama2_p3.txt"),
              "P_3 differs from fixture");
  const std::string pt0 = "Here are some useful world knowledge:";
  out.require(render_prompt(Mode::PT, Role::Continuation, {}, plain_template(), pt0) == pt0,
              "PT root prompt differs");
  const std::vector<std::string> facts{"fact A", "fact B"};
  out.require(render_prompt(Mode::PT, Role::Continuation, facts, plain_template(), pt0) ==
                  pt0 + " fact A fact B",
              "PT continuation prompt differs");
  out.note("P_1, P_2, P_3 and PT prompts byte-equal");
  return out;
}

Outcome mmr_oracle_equivalence() {
  Outcome out;
  {
    const std::vector<EmbeddingVector> cands{{1, 0}, {0.8, 0.6}, {1, 0}};
    const std::vector<double> query{1, 0};
    const MmrSelection sel = mmr_select(cands, query, 2, 0.7);
    out.require(sel.selected == std::vector<std::size_t>{0, 2}, "hand example selection");
    const MmrSelection f = near_duplicate_filter(cands, query, 0.7, sel, 0.95);
    out.require(f.selected == std::vector<std::size_t>{0, 1}, "hand example filter");
  }
  std::mt19937_64 rng(20240601);
  std::normal_distribution<double> gauss;
  const double lambdas[] = {0.0, 0.3, 0.5, 0.7, 1.0};
  int mismatches = 0;
  for (int instance = 0; instance < 1000; ++instance) {
    const std::size_t dim = 1 + rng() % 8;
    const std::size_t n = 1 + rng() % 8;
    const std::size_t k = 1 + rng() % std::min<std::size_t>(4, n);
    const double lambda = lambdas[rng() % 5];
    std::vector<EmbeddingVector> cands;
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0 && rng() % 8 == 0) {
        cands.push_back(cands[rng() % i]);
        continue;
      }
      EmbeddingVector v(dim);
      for (double& x : v) x = gauss(rng);
      cands.push_back(v);
    }
    std::vector<double> query(dim);
    for (double& x : query) x = gauss(rng);
    if (mmr_select(cands, query, k, lambda).selected != tgtest::oracle_mmr(cands, query, k, lambda)) {
      ++mismatches;
    }
  }
  out.require(mismatches == 0, std::to_string(mismatches) + " oracle mismatches");
  out.note("1000 random instances, " + std::to_string(mismatches) + " mismatches");
  return out;
}

Outcome determinism_under_concurrency() {
  Outcome out;
  const TreeConfig config = tgtest::sft_config({8, 4, 2, 2}, 42);
  std::string nodes_ref, canon_ref, export_ref;
  for (unsigned workers : {1u, 4u, 16u}) {
    tgtest::TempDir dir;
    tgtest::MockRun mock;
    const auto start = Clock::now();
    mock.run(config, dir.path(), workers);
    const double elapsed = seconds_since(start);
    const std::string nodes = tgtest::read_file(dir / "nodes.jsonl");
    const std::string canon = canonical_nodes_jsonl(load_tree(dir.path()));
    const std::string exported = tgtest::sharegpt_bytes(dir.path());
    if (nodes_ref.empty()) {
      nodes_ref = nodes;
      canon_ref = canon;
      export_ref = exported;
    }
    out.require(nodes == nodes_ref, "nodes.jsonl differs at workers=" + std::to_string(workers));
    out.require(canon == canon_ref, "canonical nodes differ at workers=" + std::to_string(workers));
    out.require(exported == export_ref, "export differs at workers=" + std::to_string(workers));
    out.require(elapsed < 60.0, "workers=" + std::to_string(workers) + " took " + fmt(elapsed));
    out.note("w=" + std::to_string(workers) + " " + fmt(elapsed) + " s");
  }
  return out;
}

Outcome crash_resume_equivalence() {
  Outcome out;
  const std::vector<std::pair<std::string, TreeConfig>> configs{
      {"wide", tgtest::sft_config({32, 1, 1, 1}, 77)},
      {"balance", tgtest::sft_config({8, 4, 2, 2}, 77)}};
  for (const auto& [name, config] : configs) {
    out.require(classify(config) == (name == "wide" ? TreeShape::WideTree : TreeShape::BalanceTree),
                name + " config misclassified");
    tgtest::TempDir ref_dir;
    tgtest::MockRun reference;
    reference.run(config, ref_dir.path());
    const std::string ref_export = tgtest::sharegpt_bytes(ref_dir.path());
    const std::string ref_nodes = canonical_nodes_jsonl(load_tree(ref_dir.path()));
    const std::uint64_t total = expected_node_count(config);

    for (double fraction : {0.25, 0.50, 0.75}) {
      const auto halt = static_cast<std::uint64_t>(std::ceil(fraction * total));
      tgtest::TempDir dir;
      tgtest::MockRun interrupted;
      bool aborted = false;
      try {
        interrupted.run(config, dir.path(), 4, halt);
      } catch (const Error& e) {
        aborted = e.kind() == ErrorKind::Aborted;
      }
      const std::string tag = name + "@" + fmt(fraction * 100, 0) + "%";
      out.require(aborted, tag + " did not abort");
      const std::size_t committed = load_tree(dir.path()).size() - 1;
      out.require(committed >= halt && committed < total, tag + " committed " + std::to_string(committed));

      // Also tear the last line, as a crash mid-write would.
      std::string nodes = tgtest::read_file(dir / "nodes.jsonl");
      nodes += R"({"id":"torn","text":"partial)";
      tgtest::write_file(dir / "nodes.jsonl", nodes);

      tgtest::MockRun resumed;
      resumed.run(config, dir.path(), 4);
      out.require(tgtest::sharegpt_bytes(dir.path()) == ref_export, tag + " export differs");
      out.require(canonical_nodes_jsonl(load_tree(dir.path())) == ref_nodes, tag + " tree differs");
    }
  }
  out.note("wide [32,1,1,1] and balance [8,4,2,2] at 25/50/75%");
  return out;
}

// Wall-clock of one instrumented run.
double timed_run(const TreeConfig& config, std::chrono::milliseconds latency, unsigned workers,
                 int* max_in_flight, bool* barriers_ok) {
  MockGenerator inner;
  tgtest::InstrumentedGenerator generator(inner, latency);
  tgtest::TempDir dir;
  const auto start = Clock::now();
  tgtest::run_instrumented(config, dir.path(), generator, workers);
  const double elapsed = seconds_since(start);
  if (max_in_flight) *max_in_flight = generator.max_in_flight();
  if (barriers_ok) *barriers_ok = tgtest::respects_barriers(config, generator.calls());
  return elapsed;
}

Outcome scheduling_semantics() {
  Outcome out;
  // (a) barriers and (b) the in-flight bound.
  for (const auto& shape : {std::vector<std::uint32_t>{4, 2, 2, 2},
                            std::vector<std::uint32_t>{8, 4, 2, 2}}) {
    for (unsigned workers : {2u, 8u}) {
      const TreeConfig config = tgtest::sft_config(shape, 5, 1.01);
      int peak = 0;
      bool barriers = false;
      timed_run(config, std::chrono::milliseconds(2), workers, &peak, &barriers);
      out.require(barriers, "layer barrier violated");
      out.require(peak <= static_cast<int>(workers),
                  "in-flight " + std::to_string(peak) + " > " + std::to_string(workers));
    }
  }
  {
    int peak = 0;
    timed_run(tgtest::sft_config({32, 1, 1, 1}, 5, 1.01), std::chrono::milliseconds(2), 8, &peak,
              nullptr);
    out.require(peak <= 8, "wide in-flight " + std::to_string(peak) + " > 8");
  }

  // (c) Wide [8,1,1,1] against Balance [2,2,2,1], both 8 leaves, 50 ms per
  // call, 8 workers. Median of three runs each.
  const auto latency = std::chrono::milliseconds(50);
  std::vector<double> wide, balance;
  for (int i = 0; i < 3; ++i) {
    wide.push_back(timed_run(tgtest::sft_config({8, 1, 1, 1}, 9 + i, 1.01), latency, 8, nullptr, nullptr));
    balance.push_back(
        timed_run(tgtest::sft_config({2, 2, 2, 1}, 9 + i, 1.01), latency, 8, nullptr, nullptr));
  }
  std::sort(wide.begin(), wide.end());
  std::sort(balance.begin(), balance.end());
  out.require(wide[1] < balance[1],
              "wide " + fmt(wide[1]) + " s not faster than balance " + fmt(balance[1]) + " s");
  out.note("barriers held, in-flight bounded; wide " + fmt(wide[1]) + " s vs balance " +
           fmt(balance[1]) + " s");
  return out;
}

Outcome gturn_distribution() {
  Outcome out;
  const TreeConfig config = tgtest::sft_config({64, 32, 2, 1, 2, 1, 1, 1}, 11, 1.01);
  tgtest::TempDir dir;
  tgtest::MockRun mock;
  const auto start = Clock::now();
  mock.run(config, dir.path(), 8);
  const double grow = seconds_since(start);
  const Tree tree = load_tree(dir.path());
  const auto records = build_corpus(tree, TurnPolicy::gaussian_preset(2024));
  std::map<std::uint32_t, std::uint64_t> hist;
  for (const auto& r : records) ++hist[r.turn_count];
  const double target[] = {0.1345, 0.3655, 0.3655, 0.1345};
  out.require(records.size() >= 10000, std::to_string(records.size()) + " records < 10000");
  std::string freqs;
  for (std::uint32_t t = 1; t <= 4; ++t) {
    const double f = static_cast<double>(hist[t]) / static_cast<double>(records.size());
    out.require(std::abs(f - target[t - 1]) <= 0.02,
                "turn " + std::to_string(t) + " at " + fmt(f, 4));
    freqs += (t > 1 ? "/" : "") + fmt(f, 4);
  }
  out.note(std::to_string(records.size()) + " records, freqs " + freqs + ", tree in " + fmt(grow) +
           " s");
  return out;
}

Outcome dedup_efficacy() {
  Outcome out;
  // Short texts and long sibling lists make near-duplicates likely; with no
  // oversampling MMR has to take every candidate, so only the filter can
  // remove them.
  auto make = [](double tau) {
    TreeConfig config = tgtest::sft_config({24, 6}, 31, tau);
    config.layers[0].max_tokens = 16;
    config.layers[1].max_tokens = 16;
    config.oversample_factor = 1.0;
    return config;
  };
  tgtest::TempDir on_dir, off_dir;
  tgtest::MockRun on_run, off_run;
  const RunResult on = on_run.run(make(0.95), on_dir.path());
  const RunResult off = off_run.run(make(1.01), off_dir.path());

  auto all_records = [](const Tree& tree) {
    return build_corpus(tree, TurnPolicy::full_depth(), {true, false});
  };
  MockEmbedder embedder;
  const auto on_records = all_records(on.tree);
  const auto off_records = all_records(off.tree);
  const DiversityStats d_on = diversity_sample(on_records, embedder, 1'000'000, 1);
  const DiversityStats d_off = diversity_sample(off_records, embedder, 1'000'000, 1);
  out.require(d_on.mean_cosine <= d_off.mean_cosine,
              "deduped mean " + fmt(d_on.mean_cosine, 4) + " > " + fmt(d_off.mean_cosine, 4));

  auto close_siblings = [](const Tree& tree) {
    std::uint64_t pairs = 0;
    for (const std::string& id : tree.canonical_ids()) {
      const auto& children = tree.node(id).children;
      for (std::size_t i = 0; i < children.size(); ++i) {
        for (std::size_t j = i + 1; j < children.size(); ++j) {
          const double c = cosine(mock_embed_text(tree.node(children[i]).text),
                                  mock_embed_text(tree.node(children[j]).text));
          if (c >= 0.95) ++pairs;
        }
      }
    }
    return pairs;
  };
  const std::uint64_t close_on = close_siblings(on.tree);
  const std::uint64_t close_off = close_siblings(off.tree);
  out.require(close_on == 0, std::to_string(close_on) + " sibling pairs at cosine >= 0.95");
  // Guard against a vacuous pass: the undeduped run must contain duplicates
  // and the filter must have removed some.
  out.require(close_off > 0, "undeduped tree has no near-duplicate siblings");
  out.require(on.tree.total_dedup_dropped() > 0, "filter dropped nothing");
  out.note("mean cosine " + fmt(d_on.mean_cosine, 4) + " (tau 0.95) vs " +
           fmt(d_off.mean_cosine, 4) + " (off); " + std::to_string(on.tree.total_dedup_dropped()) +
           " dropped, " + std::to_string(close_off) + " close pairs without the filter");
  return out;
}

Outcome format_conformance() {
  Outcome out;
  std::vector<std::pair<std::string, std::vector<ConversationRecord>>> corpora;
  tgtest::TempDir dir;
  {
    tgtest::MockRun mock;
    mock.run(tgtest::sft_config({4, 2, 2, 2}, 3), dir / "a");
    const Tree tree = load_tree(dir / "a");
    corpora.push_back({"full", build_corpus(tree, TurnPolicy::full_depth())});
    corpora.push_back({"fixed1", build_corpus(tree, TurnPolicy::fixed(1))});
    corpora.push_back({"inline", build_corpus(tree, TurnPolicy::full_depth(), {false, true})});
  }
  {
    tgtest::MockRun mock;
    mock.run(tgtest::sft_config({6, 2, 2, 2, 2, 1, 1, 1}, 4), dir / "b");
    corpora.push_back({"gturn", build_corpus(load_tree(dir / "b"), TurnPolicy::gaussian_preset(1))});
  }
  std::size_t files = 0, records_checked = 0;
  for (const auto& [name, records] : corpora) {
    const auto path = dir / (name + ".json");
    export_sharegpt(records, path);
    ++files;
    json doc;
    try {
      doc = json::parse(tgtest::read_file(path));
    } catch (const json::exception&) {
      out.require(false, name + " does not parse");
      continue;
    }
    out.require(doc.is_array() && doc.size() == records.size(), name + " wrong record count");
    for (const json& record : doc) {
      ++records_checked;
      bool shape = record.is_object() && record.size() == 2 && record.contains("id") &&
                   record.contains("conversations") && record["conversations"].is_array();
      std::size_t position = 0;
      for (const json& m : shape ? record["conversations"] : json::array()) {
        const bool keys = m.is_object() && m.size() == 2 && m.contains("from") && m.contains("value");
        const char* want = position++ % 2 == 0 ? "human" : "gpt";
        shape = shape && keys && m["from"] == want && m["value"].is_string();
      }
      shape = shape && position > 0 && position % 2 == 0;
      out.require(shape, name + " record breaks the shape");
    }
    // Re-import runs the library's own validator as well.
    try {
      import_corpus(path);
    } catch (const Error& e) {
      out.require(false, name + ": " + e.what());
    }
  }
  out.note(std::to_string(files) + " files, " + std::to_string(records_checked) + " records");
  return out;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 leaf-count law", leaf_count_law},
      {"2 prompt fidelity", prompt_fidelity},
      {"3 MMR oracle equivalence", mmr_oracle_equivalence},
      {"4 determinism under concurrency", determinism_under_concurrency},
      {"5 crash/resume equivalence", crash_resume_equivalence},
      {"6 scheduling semantics", scheduling_semantics},
      {"7 G-turn distribution", gturn_distribution},
      {"8 dedup efficacy", dedup_efficacy},
      {"9 format conformance", format_conformance},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome outcome;
    const auto start = Clock::now();
    try {
      outcome = check();
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.detail = std::string("exception: ") + e.what();
    }
    if (!outcome.pass) ++failed;
    std::printf("%s  criterion %-34s %6.2fs  %s\n", outcome.pass ? "PASS" : "FAIL", name.c_str(),
                seconds_since(start), outcome.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
