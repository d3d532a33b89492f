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

#include <cstddef>
#include <span>
#include <vector>

#include "treegen/backend.hpp"

namespace treegen {

/// Cosine similarity. A zero vector has similarity 0 with anything; a
/// dimension mismatch throws InvalidArgument.
double cosine(std::span<const double> a, std::span<const double> b);

struct MmrSelection {
  std::vector<std::size_t> selected;              // pick order
  std::vector<double> scores;                     // score at each pick
  std::vector<std::size_t> dropped_as_duplicates;
  std::size_t requested = 0;

  std::size_t shortfall() const noexcept {
    return requested > selected.size() ? requested - selected.size() : 0;
  }
};

/// Greedy Maximal Marginal Relevance. The first pick maximizes relevance
/// to `query`; each later pick maximizes
///   lambda * sim(c, query) - (1 - lambda) * max_{s in picked} sim(c, s).
/// Ties go to the lowest index. Throws InvalidArgument when k exceeds the
/// pool.
MmrSelection mmr_select(std::span<const EmbeddingVector> candidates,
                        std::span<const double> query, std::size_t k, double lambda);

/// Walks `selection` in pick order, dropping any candidate whose similarity
/// to an earlier kept one reaches `threshold`, then backfills from the
/// unselected pool in continued MMR order under the same rule. Thresholds
/// above 1 disable the filter.
MmrSelection near_duplicate_filter(std::span<const EmbeddingVector> candidates,
                                   std::span<const double> query, double lambda,
                                   const MmrSelection& selection, double threshold);

}  // namespace treegen
