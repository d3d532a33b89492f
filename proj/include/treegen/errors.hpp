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

#include <stdexcept>
#include <string>

namespace treegen {

enum class ErrorKind {
  InvalidArgument,  // rejected input
  Parse,
  Validation,
  Structure,        // prompt path inconsistent with the layer roles
  Mode,             // SFT-only operation on a PT tree or vice versa
  Incomplete,
  EmptyCompletion,
  Io,
  Backend,
  HashMismatch,
  NoCheckpoint,
  Aborted,          // run stopped; checkpoint is resumable
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Backend call failure. `retryable` is true for transport failures and
/// timeouts; `status` is the HTTP status (0 when no response arrived).
class BackendError : public Error {
 public:
  BackendError(const std::string& message, bool retryable, int attempts,
               int status = 0, std::string body = {})
      : Error(ErrorKind::Backend, message),
        retryable_(retryable),
        attempts_(attempts),
        status_(status),
        body_(std::move(body)) {}

  bool retryable() const noexcept { return retryable_; }
  int attempts() const noexcept { return attempts_; }
  int status() const noexcept { return status_; }
  const std::string& body() const noexcept { return body_; }

 private:
  bool retryable_;
  int attempts_;
  int status_;
  std::string body_;
};

}  // namespace treegen
