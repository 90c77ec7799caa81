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

#ifndef QDC_EMBEDDING_H_
#define QDC_EMBEDDING_H_

#include <span>
#include <vector>

namespace qdc {

// Embeddings are plain f64 vectors; normalization is a property of the
// producer, not of the type.
using Vec = std::vector<double>;

inline constexpr double kZeroNormThreshold = 1e-12;

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

// Throws ZeroVector when the norm is below kZeroNormThreshold.
Vec l2_normalize(std::span<const double> v);

// a.b / (|a||b|). Throws ZeroVector or DimMismatch.
double cosine_sim(std::span<const double> a, std::span<const double> b);

// Left-to-right component-wise mean, not re-normalized.
Vec mean_embedding(const std::vector<Vec>& vs);

// out += v, element-wise. Sizes must agree.
void add_inplace(Vec& out, std::span<const double> v);

bool all_finite(std::span<const double> v);

}  // namespace qdc

#endif  // QDC_EMBEDDING_H_
