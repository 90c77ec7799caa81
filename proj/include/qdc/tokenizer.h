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

#ifndef QDC_TOKENIZER_H_
#define QDC_TOKENIZER_H_

#include <cstdint>
#include <string_view>
#include <vector>

namespace qdc {

inline constexpr uint32_t kDefaultVocabSize = 32768;

// Sparse bag of hashed tokens. indices are strictly increasing.
struct TokenFeatures {
  std::vector<uint32_t> indices;
  std::vector<uint32_t> counts;
  uint32_t total = 0;
};

uint64_t fnv1a64(std::string_view s);

// Lowercases ASCII, splits on runs of non-alphanumeric bytes, hashes each
// token with FNV-1a mod vocab_size. No tokens yields {0:1}.
TokenFeatures tokenize(std::string_view text, uint32_t vocab_size = kDefaultVocabSize);

// Number of whitespace-separated tokens; used for length bucketing.
size_t whitespace_token_count(std::string_view text);

}  // namespace qdc

#endif  // QDC_TOKENIZER_H_
