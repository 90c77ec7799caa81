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

#include "qdc/encoder.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <string>

#include "binary_io.h"
#include "qdc/errors.h"
#include "qdc/random.h"

namespace qdc {
namespace {

constexpr char kSnapshotMagic[8] = {'Q', 'D', 'C', 'E', 'N', 'C', '0', '1'};

// Forward state kept for backprop through pooling and normalization.
struct Forward {
  const TokenFeatures* feats = nullptr;
  Vec raw;
  double norm = 0.0;
  Vec e;
};

void check_features(const EncoderParams& p, const TokenFeatures& f) {
  if (f.total == 0 || f.indices.empty() || f.indices.size() != f.counts.size()) {
    throw Error(ErrorCode::kInvalidArgument, "malformed TokenFeatures");
  }
  if (f.indices.back() >= p.vocab_size) {
    throw Error(ErrorCode::kInvalidArgument, "token index out of range");
  }
}

Forward forward(const EncoderParams& p, const TokenFeatures& f) {
  Forward fw;
  fw.feats = &f;
  fw.raw = encode_raw(p, f);
  fw.norm = l2_norm(fw.raw);
  if (!(fw.norm >= kZeroNormThreshold)) {
    throw Error(ErrorCode::kZeroVector, "encode: raw embedding is zero");
  }
  fw.e.resize(p.dim);
  for (uint32_t k = 0; k < p.dim; ++k) fw.e[k] = fw.raw[k] / fw.norm;
  return fw;
}

// g is dLoss/de; accumulates dLoss/dW.
void backprop(const Forward& fw, const Vec& g, Gradient& grad) {
  const size_t d = g.size();
  const double eg = dot(fw.e, g);
  Vec graw(d);
  for (size_t k = 0; k < d; ++k) graw[k] = (g[k] - fw.e[k] * eg) / fw.norm;
  const TokenFeatures& f = *fw.feats;
  const double total = static_cast<double>(f.total);
  for (size_t j = 0; j < f.indices.size(); ++j) {
    const double w = static_cast<double>(f.counts[j]) / total;
    double* dst = grad.dW.data() + static_cast<size_t>(f.indices[j]) * d;
    for (size_t k = 0; k < d; ++k) dst[k] += w * graw[k];
  }
}

void axpy(Vec& y, double a, const Vec& x) {
  for (size_t k = 0; k < y.size(); ++k) y[k] += a * x[k];
}

void check_same_shape(const EncoderParams& a, const EncoderParams& b) {
  if (a.vocab_size != b.vocab_size || a.dim != b.dim || a.W.size() != b.W.size()) {
    throw Error(ErrorCode::kShapeMismatch, "encoder shapes differ");
  }
}

}  // namespace

EncoderParams EncoderParams::random(uint32_t vocab_size, uint32_t dim, double tau, uint64_t seed,
                                    double scale) {
  EncoderParams p = zeros(vocab_size, dim, tau);
  if (scale <= 0.0) scale = 1.0 / std::sqrt(static_cast<double>(dim));
  Rng rng(seed);
  for (double& w : p.W) w = scale * rng.normal();
  return p;
}

EncoderParams EncoderParams::zeros(uint32_t vocab_size, uint32_t dim, double tau) {
  if (vocab_size == 0 || dim == 0) throw Error(ErrorCode::kInvalidArgument, "empty encoder shape");
  if (!(tau > 0.0)) throw Error(ErrorCode::kInvalidArgument, "tau must be positive");
  EncoderParams p;
  p.vocab_size = vocab_size;
  p.dim = dim;
  p.tau = tau;
  p.W.assign(static_cast<size_t>(vocab_size) * dim, 0.0);
  return p;
}

Gradient Gradient::zeros_like(const EncoderParams& p) {
  Gradient g;
  g.vocab_size = p.vocab_size;
  g.dim = p.dim;
  g.dW.assign(p.W.size(), 0.0);
  return g;
}

void Gradient::add(const Gradient& other) {
  if (other.dW.size() != dW.size()) throw Error(ErrorCode::kShapeMismatch, "gradient shapes differ");
  for (size_t i = 0; i < dW.size(); ++i) dW[i] += other.dW[i];
}

Vec encode_raw(const EncoderParams& params, const TokenFeatures& feats) {
  check_features(params, feats);
  Vec raw(params.dim, 0.0);
  for (size_t j = 0; j < feats.indices.size(); ++j) {
    const double c = static_cast<double>(feats.counts[j]);
    const double* w = params.row(feats.indices[j]);
    for (uint32_t k = 0; k < params.dim; ++k) raw[k] += c * w[k];
  }
  const double total = static_cast<double>(feats.total);
  for (double& x : raw) x /= total;
  return raw;
}

Vec encode(const EncoderParams& params, const TokenFeatures& feats) {
  if (params.mode == OutputMode::kLinear) return encode_raw(params, feats);
  return forward(params, feats).e;
}

LossResult contrastive_loss(const EncoderParams& params, const std::vector<TrainExample>& batch,
                            const std::vector<std::vector<TokenFeatures>>& hard_negs) {
  const size_t n = batch.size();
  if (n == 0) throw Error(ErrorCode::kEmptyBatch, "contrastive_loss: empty batch");
  if (!hard_negs.empty() && hard_negs.size() != n) {
    throw Error(ErrorCode::kShapeMismatch, "hard_negs must be empty or one list per example");
  }
  std::vector<Forward> q(n), d(n);
  std::vector<std::vector<Forward>> h(n);
  for (size_t i = 0; i < n; ++i) {
    q[i] = forward(params, batch[i].query);
    d[i] = forward(params, batch[i].doc);
    if (!hard_negs.empty()) {
      for (const TokenFeatures& f : hard_negs[i]) h[i].push_back(forward(params, f));
    }
  }

  const double inv_tau = 1.0 / params.tau;
  const double inv_n = 1.0 / static_cast<double>(n);
  const size_t dim = params.dim;
  std::vector<Vec> gq(n, Vec(dim, 0.0)), gd(n, Vec(dim, 0.0));
  std::vector<std::vector<Vec>> gh(n);
  double loss = 0.0;
  std::vector<double> z;
  for (size_t i = 0; i < n; ++i) {
    const size_t m = h[i].size();
    z.assign(n + m, 0.0);
    for (size_t j = 0; j < n; ++j) z[j] = dot(q[i].e, d[j].e) * inv_tau;
    for (size_t k = 0; k < m; ++k) z[n + k] = dot(q[i].e, h[i][k].e) * inv_tau;
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - zmax);
    const double lse = zmax + std::log(sum);
    loss += lse - z[i];

    gh[i].assign(m, Vec(dim, 0.0));
    for (size_t j = 0; j < n + m; ++j) {
      double gz = std::exp(z[j] - lse);
      if (j == i) gz -= 1.0;
      const double c = gz * inv_n * inv_tau;
      if (j < n) {
        axpy(gq[i], c, d[j].e);
        axpy(gd[j], c, q[i].e);
      } else {
        axpy(gq[i], c, h[i][j - n].e);
        axpy(gh[i][j - n], c, q[i].e);
      }
    }
  }

  LossResult out;
  out.loss = loss * inv_n;
  out.grad = Gradient::zeros_like(params);
  for (size_t i = 0; i < n; ++i) {
    backprop(q[i], gq[i], out.grad);
    backprop(d[i], gd[i], out.grad);
    for (size_t k = 0; k < h[i].size(); ++k) backprop(h[i][k], gh[i][k], out.grad);
  }
  return out;
}

LossResult distill_loss(const EncoderParams& params_new, const EncoderParams& params_old,
                        const std::vector<TrainExample>& batch) {
  const size_t n = batch.size();
  if (n == 0) throw Error(ErrorCode::kEmptyBatch, "distill_loss: empty batch");
  check_same_shape(params_new, params_old);
  const double inv_n = 1.0 / static_cast<double>(n);

  LossResult out;
  out.grad = Gradient::zeros_like(params_new);
  double loss = 0.0;
  auto term = [&](const TokenFeatures& f) {
    const Forward a = forward(params_new, f);
    const Vec b = forward(params_old, f).e;
    // For unit a and b, 1 - cos(a, b) == |a - b|^2 / 2. The squared form
    // keeps the value and its gradient free of cancellation near a == b.
    Vec diff(a.e.size());
    double sq = 0.0;
    for (size_t k = 0; k < diff.size(); ++k) {
      diff[k] = a.e[k] - b[k];
      sq += diff[k] * diff[k];
    }
    loss += 0.5 * sq;
    for (double& x : diff) x *= inv_n;
    backprop(a, diff, out.grad);
  };
  for (const TrainExample& ex : batch) {
    term(ex.query);
    term(ex.doc);
  }
  out.loss = loss * inv_n;
  return out;
}

void sgd_step(EncoderParams& params, const Gradient& grads, double lr, double wd) {
  if (grads.dW.size() != params.W.size() || grads.dim != params.dim) {
    throw Error(ErrorCode::kShapeMismatch, "sgd_step: gradient shape");
  }
  if (lr == 0.0) return;
  std::vector<double> next(params.W.size());
  for (size_t i = 0; i < params.W.size(); ++i) {
    next[i] = params.W[i] - lr * grads.dW[i] - lr * wd * params.W[i];
    if (!std::isfinite(next[i])) throw Error(ErrorCode::kNonFinite, "sgd_step produced non-finite weight");
  }
  params.W.swap(next);
}

namespace {

TokenFeatures random_features(Rng& rng, uint32_t vocab_size) {
  const int64_t len = rng.range(2, 6);
  std::vector<uint32_t> ids;
  for (int64_t i = 0; i < len; ++i) ids.push_back(static_cast<uint32_t>(rng.below(vocab_size)));
  std::sort(ids.begin(), ids.end());
  TokenFeatures f;
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

}  // namespace

double grad_check(LossKind kind, uint64_t seed, const GradCheckOptions& o) {
  Rng rng(derive_seed(seed, 0, "grad-check"));
  EncoderParams params = EncoderParams::random(o.vocab_size, o.dim, o.tau, rng.next_u64(), o.init_scale);
  std::vector<TrainExample> batch(o.batch);
  for (TrainExample& ex : batch) {
    ex.query = random_features(rng, o.vocab_size);
    ex.doc = random_features(rng, o.vocab_size);
  }

  std::function<LossResult(const EncoderParams&)> eval;
  std::vector<std::vector<TokenFeatures>> negs;
  EncoderParams old;
  if (kind == LossKind::kContrastive) {
    negs.resize(o.batch);
    for (auto& list : negs) {
      for (size_t k = 0; k < o.hard_negatives; ++k) list.push_back(random_features(rng, o.vocab_size));
    }
    eval = [&](const EncoderParams& p) { return contrastive_loss(p, batch, negs); };
  } else {
    old = params;
    if (!o.identical_params) {
      for (double& w : params.W) w += 0.5 * o.init_scale * rng.normal();
    }
    eval = [&](const EncoderParams& p) { return distill_loss(p, old, batch); };
  }

  const Gradient analytic = eval(params).grad;
  double worst = 0.0;
  EncoderParams probe = params;
  for (size_t i = 0; i < probe.W.size(); ++i) {
    const double w = probe.W[i];
    probe.W[i] = w + o.epsilon;
    const double up = eval(probe).loss;
    probe.W[i] = w - o.epsilon;
    const double down = eval(probe).loss;
    probe.W[i] = w;
    const double numeric = (up - down) / (2.0 * o.epsilon);
    const double a = analytic.dW[i];
    const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
    worst = std::max(worst, rel);
  }
  return worst;
}

void save_snapshot(const EncoderParams& params, const std::string& path) {
  internal::ByteWriter w;
  w.put_bytes(kSnapshotMagic, 8);
  w.put_u32(params.vocab_size);
  w.put_u32(params.dim);
  w.put_f64(params.tau);
  w.put_u32(params.version);
  for (double x : params.W) w.put_f64(x);
  internal::write_file(path, w.bytes());
}

EncoderParams load_snapshot(const std::string& path) {
  const std::vector<uint8_t> bytes = internal::read_file(path);
  internal::ByteReader r(bytes.data(), bytes.size());
  char magic[8] = {};
  r.get_bytes(magic, 8);
  if (!r.ok() || std::memcmp(magic, kSnapshotMagic, 8) != 0) {
    throw Error(ErrorCode::kCorruptSnapshot, "bad magic in " + path);
  }
  EncoderParams p;
  p.vocab_size = r.get_u32();
  p.dim = r.get_u32();
  p.tau = r.get_f64();
  p.version = r.get_u32();
  if (!r.ok()) throw Error(ErrorCode::kCorruptSnapshot, "truncated header in " + path);
  if (p.vocab_size == 0 || p.dim == 0 || !(p.tau > 0.0) || !std::isfinite(p.tau)) {
    throw Error(ErrorCode::kCorruptSnapshot, "invalid header fields in " + path);
  }
  const uint64_t count = static_cast<uint64_t>(p.vocab_size) * p.dim;
  if (r.remaining() != count * 8) {
    throw Error(ErrorCode::kCorruptSnapshot, "weight payload size mismatch in " + path);
  }
  p.W.resize(count);
  for (double& x : p.W) x = r.get_f64();
  if (!all_finite(p.W)) throw Error(ErrorCode::kCorruptSnapshot, "non-finite weight in " + path);
  return p;
}

}  // namespace qdc
