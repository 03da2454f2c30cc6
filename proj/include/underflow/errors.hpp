// Copyright 2026 The underflow Authors
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
#include <vector>

namespace underflow {

enum class ErrorCode {
  InfeasiblePower,
  NonConvexCurve,
  BadStochasticMatrix,
  BadHoldingCost,
  OutOfRange,
  PreconditionViolated,
  GridMisaligned,
  MemoryBudgetExceeded,
  MaxIterExceeded,
  DualSearchDiverged,
  PolicyInfeasibleAction,
  ConfigError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Base exception for everything the library reports. Carries a machine
/// readable code next to the human readable message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  ErrorCode code() const noexcept { return code_; }

 protected:
  /// `what` is used verbatim, without the code prefix.
  struct Verbatim {};
  Error(ErrorCode code, const std::string& what, Verbatim);

 private:
  ErrorCode code_;
};

struct Issue {
  ErrorCode code;
  std::string message;
};

/// Thrown by validate(); lists every violated invariant, not just the first.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<Issue> issues);
  const std::vector<Issue>& issues() const noexcept { return issues_; }
  bool has(ErrorCode code) const noexcept;

 private:
  std::vector<Issue> issues_;
};

}  // namespace underflow
