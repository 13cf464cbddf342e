// Copyright 2026 The tracegraph Authors. All Rights Reserved.
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
#include <string_view>

namespace tracegraph {

/// Machine-readable error category, printed by the CLI as `ERROR <code>: ...`.
enum class ErrorCode {
  kInput,       // malformed input data (spans, graphs, CSV)
  kConfig,      // unknown or ill-typed configuration key
  kDimension,   // shape mismatch between tensors, models, or graphs
  kTrace,       // invalid trace structure (roots, cycles, dangling parents)
  kNumeric,     // non-finite values or divergence
  kIo,          // filesystem / stream failure
  kState,       // API misuse (e.g. backward called twice)
};

std::string_view to_string(ErrorCode code);

/// Base error for all validation-class failures. The CLI maps these to exit
/// code 1; anything else escaping a subcommand is an internal error (exit 2).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace tracegraph
