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

#include "dpadamw/errors.hpp"

namespace dpadamw {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidDimension: return "invalid-dimension";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kBatchSizeMismatch: return "batch-size-mismatch";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kStepBudgetExhausted: return "step-budget-exhausted";
    case ErrorCode::kInvalidBudget: return "invalid-budget";
    case ErrorCode::kNonPrivate: return "non-private";
    case ErrorCode::kEmptyCurve: return "empty-curve";
    case ErrorCode::kDomain: return "domain-error";
    case ErrorCode::kUndefinedBound: return "undefined-bound";
    case ErrorCode::kWrongTheorem: return "wrong-theorem";
    case ErrorCode::kInadmissibleDelta0: return "inadmissible-delta0";
    case ErrorCode::kHorizonTooShort: return "horizon-too-short";
    case ErrorCode::kCertificationRefused: return "certification-refused";
    case ErrorCode::kUnsupported: return "unsupported";
    case ErrorCode::kMissingData: return "missing-data";
    case ErrorCode::kConfig: return "config-error";
    case ErrorCode::kIo: return "io-error";
  }
  return "unknown";
}

ErrorCategory CategoryOf(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig:
      return ErrorCategory::kConfig;
    case ErrorCode::kIo:
    case ErrorCode::kMissingData:
      return ErrorCategory::kRuntime;
    default:
      return ErrorCategory::kPrecondition;
  }
}

}  // namespace dpadamw
