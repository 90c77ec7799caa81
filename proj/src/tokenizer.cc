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

#include "qdc/tokenizer.h"

#include <algorithm>
#include <string>

#include "qdc/errors.h"

namespace qdc {
namespace {

constexpr uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr uint64_t kFnvPrime = 0x100000001b3ULL;

bool is_alnum(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

unsigned char to_lower(unsigned char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<unsigned char>(c - 'A' + 'a') : c;
}

}  // namespace

uint64_t fnv1a64(std::string_view s) {
  uint64_t h = kFnvOffset;
  for (unsigned char c : s) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

TokenFeatures tokenize(std::string_view text, uint32_t vocab_size) {
  if (vocab_size == 0) throw Error(ErrorCode::kInvalidArgument, "tokenize: vocab_size 0");
  std::vector<uint32_t> ids;
  std::string token;
  auto flush = [&]() {
    if (!token.empty()) {
      ids.push_back(static_cast<uint32_t>(fnv1a64(token) % vocab_size));
      token.clear();
    }
  };
  for (unsigned char c : text) {
    if (is_alnum(c)) {
      token.push_back(static_cast<char>(to_lower(c)));
    } else {
      flush();
    }
  }
  flush();

  TokenFeatures f;
  if (ids.empty()) {
    f.indices = {0};
    f.counts = {1};
    f.total = 1;
    return f;
  }
  std::sort(ids.begin(), ids.end());
  for (uint32_t id : ids) {
    if (!f.indices.empty() && f.indices.back() == id) {
      ++f.counts.back();
    } else {
      f.indices.push_back(id);
      f.counts.push_back(1);
    }
  }
  f.total = static_cast<uint32_t>(ids.size());
  return f;
}

size_t whitespace_token_count(std::string_view text) {
  size_t n = 0;
  bool in_token = false;
  for (unsigned char c : text) {
    const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
    if (!space && !in_token) ++n;
    in_token = !space;
  }
  return n;
}

}  // namespace qdc
