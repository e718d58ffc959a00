//
// Copyright 2026 The dpadamw Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef DPADAMW_ERRORS_HPP_
#define DPADAMW_ERRORS_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace dpadamw {

enum class ErrorCode {
  kInvalidDimension,
  kDimensionMismatch,
  kBatchSizeMismatch,
  kInvalidArgument,
  kStepBudgetExhausted,
  kInvalidBudget,
  kNonPrivate,
  kEmptyCurve,
  kDomain,
  kUndefinedBound,
  kWrongTheorem,
  kInadmissibleDelta0,
  kHorizonTooShort,
  kCertificationRefused,
  kUnsupported,
  kMissingData,
  kConfig,
  kIo,
};

// Coarse grouping used by the CLI to pick an exit code.
enum class ErrorCategory { kConfig, kPrecondition, kRuntime };

std::string_view ErrorCodeName(ErrorCode code);
ErrorCategory CategoryOf(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return CategoryOf(code_); }

 private:
  ErrorCode code_;
};

}  // namespace dpadamw

#endif  // DPADAMW_ERRORS_HPP_
