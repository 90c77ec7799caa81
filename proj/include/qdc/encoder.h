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

#ifndef QDC_ENCODER_H_
#define QDC_ENCODER_H_

#include <cstdint>
#include <string>
#include <vector>

#include "qdc/embedding.h"
#include "qdc/tokenizer.h"

namespace qdc {

// kLinear skips the final normalization. It exists so tests can build
// encoders whose outputs differ by an exact translation; training and
// the losses always work on the normalized output.
enum class OutputMode { kNormalized, kLinear };

struct EncoderParams {
  uint32_t vocab_size = kDefaultVocabSize;
  uint32_t dim = 64;
  double tau = 0.05;
  uint32_t version = 0;
  OutputMode mode = OutputMode::kNormalized;
  std::vector<double> W;  // vocab_size x dim, row-major

  double* row(uint32_t i) { return W.data() + static_cast<size_t>(i) * dim; }
  const double* row(uint32_t i) const { return W.data() + static_cast<size_t>(i) * dim; }

  // W ~ N(0, scale^2). scale <= 0 picks 1/sqrt(dim).
  static EncoderParams random(uint32_t vocab_size, uint32_t dim, double tau, uint64_t seed,
                              double scale = 0.0);
  static EncoderParams zeros(uint32_t vocab_size, uint32_t dim, double tau);
};

struct Gradient {
  uint32_t vocab_size = 0;
  uint32_t dim = 0;
  std::vector<double> dW;

  static Gradient zeros_like(const EncoderParams& p);
  void add(const Gradient& other);
};

struct LossResult {
  double loss = 0.0;
  Gradient grad;
};

struct TrainExample {
  TokenFeatures query;
  TokenFeatures doc;
};

// Mean-pooled projection before normalization.
Vec encode_raw(const EncoderParams& params, const TokenFeatures& feats);
// Respects params.mode; throws ZeroVector in normalized mode on a zero raw.
Vec encode(const EncoderParams& params, const TokenFeatures& feats);

// In-batch plus hard-negative InfoNCE. hard_negs may be empty (no hard
// negatives for any query) or have one list per batch entry.
LossResult contrastive_loss(const EncoderParams& params, const std::vector<TrainExample>& batch,
                            const std::vector<std::vector<TokenFeatures>>& hard_negs);

// Mean over pairs of cosine distance to the frozen encoder, queries and docs.
LossResult distill_loss(const EncoderParams& params_new, const EncoderParams& params_old,
                        const std::vector<TrainExample>& batch);

// W <- W - lr*dW - lr*wd*W.
void sgd_step(EncoderParams& params, const Gradient& grads, double lr, double wd);

enum class LossKind { kContrastive, kDistill };

struct GradCheckOptions {
  uint32_t vocab_size = 64;
  uint32_t dim = 8;
  size_t batch = 4;
  size_t hard_negatives = 2;
  // The production tau saturates the softmax on this tiny instance, which
  // leaves most partials at the finite-difference noise floor.
  double tau = 0.5;
  double epsilon = 1e-5;
  // Outputs are invariant to scaling W, but the finite-difference truncation
  // term shrinks with the cube of the scale.
  double init_scale = 1.0;
  // Distill only: make params_new a copy of params_old.
  bool identical_params = false;
};

// Max over every coordinate of |a - n| / max(1e-8, |a| + |n|).
double grad_check(LossKind kind, uint64_t seed, const GradCheckOptions& options = {});

void save_snapshot(const EncoderParams& params, const std::string& path);
EncoderParams load_snapshot(const std::string& path);

}  // namespace qdc

#endif  // QDC_ENCODER_H_
