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

#include "treegen/dedup.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "treegen/errors.hpp"

namespace treegen {

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::InvalidArgument, "cosine of vectors with dims " +
                                                std::to_string(a.size()) + " and " +
                                                std::to_string(b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

namespace {

// Greedy MMR state over a candidate pool. Keeps, per candidate, its
// relevance and its maximum similarity to the picked set, so each pick
// costs O(n * dim) and no pairwise matrix is materialized.
class MmrState {
 public:
  MmrState(std::span<const EmbeddingVector> candidates, std::span<const double> query,
           double lambda)
      : candidates_(candidates),
        lambda_(lambda),
        relevance_(candidates.size()),
        max_sim_(candidates.size(), -std::numeric_limits<double>::infinity()),
        available_(candidates.size(), true) {
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      relevance_[i] = cosine(candidates[i], query);
    }
  }

  double score(std::size_t i) const {
    if (picked_ == 0) return relevance_[i];
    return lambda_ * relevance_[i] - (1.0 - lambda_) * max_sim_[i];
  }

  /// Best available candidate; strict > keeps the lowest index on ties.
  /// Returns size() when the pool is exhausted.
  std::size_t best(double* best_score) const {
    std::size_t best = available_.size();
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < available_.size(); ++i) {
      if (!available_[i]) continue;
      const double s = score(i);
      if (best == available_.size() || s > top) {
        best = i;
        top = s;
      }
    }
    *best_score = top;
    return best;
  }

  void remove(std::size_t i) { available_[i] = false; }

  /// Adds `i` to the picked set.
  void pick(std::size_t i) {
    available_[i] = false;
    ++picked_;
    for (std::size_t j = 0; j < candidates_.size(); ++j) {
      max_sim_[j] = std::max(max_sim_[j], cosine(candidates_[j], candidates_[i]));
    }
  }

  /// Max similarity of `i` to the picked set (-inf when empty).
  double max_sim(std::size_t i) const { return max_sim_[i]; }

  std::size_t size() const noexcept { return available_.size(); }

 private:
  std::span<const EmbeddingVector> candidates_;
  double lambda_;
  std::vector<double> relevance_;
  std::vector<double> max_sim_;
  std::vector<bool> available_;
  std::size_t picked_ = 0;
};

}  // namespace

MmrSelection mmr_select(std::span<const EmbeddingVector> candidates,
                        std::span<const double> query, std::size_t k, double lambda) {
  if (k > candidates.size()) {
    throw Error(ErrorKind::InvalidArgument, "mmr_select asked for " + std::to_string(k) +
                                                " of " + std::to_string(candidates.size()) +
                                                " candidates");
  }
  MmrState state(candidates, query, lambda);
  MmrSelection out;
  out.requested = k;
  while (out.selected.size() < k) {
    double score = 0.0;
    const std::size_t i = state.best(&score);
    state.pick(i);
    out.selected.push_back(i);
    out.scores.push_back(score);
  }
  return out;
}

MmrSelection near_duplicate_filter(std::span<const EmbeddingVector> candidates,
                                   std::span<const double> query, double lambda,
                                   const MmrSelection& selection, double threshold) {
  if (threshold > 1.0) return selection;

  // `state` tracks similarity to the kept set only.
  MmrState state(candidates, query, lambda);
  MmrSelection out;
  out.requested = selection.requested;

  auto consider = [&](std::size_t i, double score) {
    if (state.max_sim(i) >= threshold) {
      state.remove(i);
      out.dropped_as_duplicates.push_back(i);
    } else {
      state.pick(i);
      out.selected.push_back(i);
      out.scores.push_back(score);
    }
  };

  for (std::size_t i : selection.selected) state.remove(i);
  for (std::size_t pos = 0; pos < selection.selected.size(); ++pos) {
    consider(selection.selected[pos], selection.scores.at(pos));
  }
  while (out.selected.size() < out.requested) {
    double score = 0.0;
    const std::size_t i = state.best(&score);
    if (i == state.size()) break;
    consider(i, score);
  }
  return out;
}

}  // namespace treegen
