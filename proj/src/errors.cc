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

#include "qdc/errors.h"

namespace qdc {

const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kEmptyList: return "EmptyList";
    case ErrorCode::kDimMismatch: return "DimMismatch";
    case ErrorCode::kEmptyBatch: return "EmptyBatch";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kEmptyCorpus: return "EmptyCorpus";
    case ErrorCode::kDuplicateDocId: return "DuplicateDocId";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kCorruptIndex: return "CorruptIndex";
    case ErrorCode::kCorruptSnapshot: return "CorruptSnapshot";
    case ErrorCode::kEmptyQuerySet: return "EmptyQuerySet";
    case ErrorCode::kMissingTransition: return "MissingTransition";
    case ErrorCode::kMixedRecordKind: return "MixedRecordKind";
    case ErrorCode::kTooFewQueries: return "TooFewQueries";
    case ErrorCode::kNoCentroids: return "NoCentroids";
    case ErrorCode::kMissingQrels: return "MissingQrels";
    case ErrorCode::kIncompleteMatrix: return "IncompleteMatrix";
    case ErrorCode::kEmptyPopulation: return "EmptyPopulation";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kDanglingReference: return "DanglingReference";
    case ErrorCode::kDataMismatch: return "DataMismatch";
    case ErrorCode::kMissingIndex: return "MissingIndex";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
      code_(code) {}

}  // namespace qdc
