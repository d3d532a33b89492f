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

#include "treegen/hash.hpp"

#include <cstdio>

#include "treegen/errors.hpp"

namespace treegen {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid argument";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Validation: return "validation error";
    case ErrorKind::Structure: return "structural error";
    case ErrorKind::Mode: return "mode error";
    case ErrorKind::Incomplete: return "incomplete tree";
    case ErrorKind::EmptyCompletion: return "empty completion";
    case ErrorKind::Io: return "I/O error";
    case ErrorKind::Backend: return "backend error";
    case ErrorKind::HashMismatch: return "config hash mismatch";
    case ErrorKind::NoCheckpoint: return "no checkpoint";
    case ErrorKind::Aborted: return "aborted";
  }
  return "unknown";
}

std::string hex64(std::uint64_t value) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016llx",
                static_cast<unsigned long long>(value));
  return buf;
}

std::uint64_t SplitMix64::below(std::uint64_t bound) noexcept {
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = -bound % bound;
  for (;;) {
    const std::uint64_t r = next();
    if (r >= limit) return r % bound;
  }
}

}  // namespace treegen
