// Copyright 2026 The QDC Authors.
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

#ifndef QDC_ERRORS_H_
#define QDC_ERRORS_H_

#include <stdexcept>
#include <string>

namespace qdc {

enum class ErrorCode {
  kZeroVector,
  kEmptyList,
  kDimMismatch,
  kEmptyBatch,
  kShapeMismatch,
  kNonFinite,
  kEmptyCorpus,
  kDuplicateDocId,
  kIo,
  kCorruptIndex,
  kCorruptSnapshot,
  kEmptyQuerySet,
  kMissingTransition,
  kMixedRecordKind,
  kTooFewQueries,
  kNoCentroids,
  kMissingQrels,
  kIncompleteMatrix,
  kEmptyPopulation,
  kInvalidSpec,
  kParseError,
  kDanglingReference,
  kDataMismatch,
  kMissingIndex,
  kInvalidArgument,
};

const char* ErrorCodeName(ErrorCode code);

// All library failures surface as this exception; callers switch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace qdc

#endif  // QDC_ERRORS_H_
