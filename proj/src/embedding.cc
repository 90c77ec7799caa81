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

#include "qdc/embedding.h"

#include <cmath>
#include <string>

#include "qdc/errors.h"

namespace qdc {

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimMismatch,
                "dot: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

Vec l2_normalize(std::span<const double> v) {
  const double n = l2_norm(v);
  if (!(n >= kZeroNormThreshold)) {
    throw Error(ErrorCode::kZeroVector, "l2_normalize: norm below threshold");
  }
  Vec out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
  return out;
}

double cosine_sim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimMismatch, "cosine_sim: dimension mismatch");
  }
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (!(na >= kZeroNormThreshold) || !(nb >= kZeroNormThreshold)) {
    throw Error(ErrorCode::kZeroVector, "cosine_sim: zero input");
  }
  const double c = dot(a, b) / (na * nb);
  // Rounding can push |c| a hair past 1.
  if (c > 1.0) return 1.0;
  if (c < -1.0) return -1.0;
  return c;
}

Vec mean_embedding(const std::vector<Vec>& vs) {
  if (vs.empty()) throw Error(ErrorCode::kEmptyList, "mean_embedding: empty list");
  const size_t d = vs.front().size();
  Vec sum(d, 0.0);
  for (const Vec& v : vs) {
    if (v.size() != d) throw Error(ErrorCode::kDimMismatch, "mean_embedding: ragged input");
    for (size_t i = 0; i < d; ++i) sum[i] += v[i];
  }
  const double n = static_cast<double>(vs.size());
  for (double& x : sum) x /= n;
  return sum;
}

void add_inplace(Vec& out, std::span<const double> v) {
  if (out.size() != v.size()) throw Error(ErrorCode::kDimMismatch, "add_inplace");
  for (size_t i = 0; i < v.size(); ++i) out[i] += v[i];
}

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace qdc
