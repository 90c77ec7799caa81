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

#include "qdc/drift.h"

#include <cmath>
#include <cstring>
#include <limits>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "qdc/encoder.h"
#include "qdc/errors.h"
#include "qdc/tokenizer.h"
#include "test_util.h"

namespace qdc {
namespace {

using ::qdc::testing::ExpectCode;
using ::qdc::testing::TempDir;
using ::qdc::testing::TinyRng;

DriftRecord Single(int from, Vec v) {
  DriftRecord r;
  r.kind = DriftKind::kSingle;
  r.single = DriftVector{std::move(v), from, from + 1};
  return r;
}

std::string WordForRow(uint32_t row, uint32_t v) {
  for (int i = 0;; ++i) {
    const std::string w = "tok" + std::to_string(i);
    if (fnv1a64(w) % v == row) return w;
  }
}

std::vector<TokenFeatures> RandomQueries(uint64_t seed, size_t n, uint32_t vocab) {
  TinyRng rng(seed);
  std::vector<TokenFeatures> out;
  for (size_t i = 0; i < n; ++i) {
    std::string q;
    const int len = 2 + static_cast<int>(rng.next() % 5);
    for (int w = 0; w < len; ++w) q += "q" + std::to_string(rng.next() % 500) + " ";
    out.push_back(tokenize(q, vocab));
  }
  return out;
}

// Old/new pair whose raw outputs differ by exactly c on every input.
std::pair<EncoderParams, EncoderParams> TranslatedPair(const Vec& c) {
  EncoderParams old_p = EncoderParams::random(2048, static_cast<uint32_t>(c.size()), 0.05, 17);
  old_p.mode = OutputMode::kLinear;
  old_p.version = 1;
  EncoderParams new_p = old_p;
  new_p.version = 2;
  for (uint32_t v = 0; v < new_p.vocab_size; ++v) {
    for (uint32_t j = 0; j < new_p.dim; ++j) new_p.row(v)[j] += c[j];
  }
  return {old_p, new_p};
}

TEST(EstimateDriftTest, IdenticalEncodersGiveZero) {
  EncoderParams p = EncoderParams::random(1024, 8, 0.05, 0);
  const DriftVector d = estimate_drift(p, p, RandomQueries(0, 20, 1024));
  for (double x : d.values) EXPECT_EQ(x, 0.0);
}

TEST(EstimateDriftTest, MeanOfTwoKnownDrifts) {
  EncoderParams old_p = EncoderParams::zeros(2, 2, 0.05);
  old_p.mode = OutputMode::kLinear;
  old_p.row(0)[1] = 0.5;
  old_p.row(1)[0] = 0.5;
  old_p.version = 3;
  EncoderParams new_p = old_p;
  new_p.version = 4;
  new_p.row(0)[0] += 1.0;
  new_p.row(1)[1] += 1.0;
  const DriftVector d =
      estimate_drift(new_p, old_p, {tokenize(WordForRow(0, 2), 2), tokenize(WordForRow(1, 2), 2)});
  EXPECT_EQ(d.values, (Vec{0.5, 0.5}));
  EXPECT_EQ(d.from_task, 3);
  EXPECT_EQ(d.to_task, 4);
}

TEST(EstimateDriftTest, MatchesPerQueryLoop) {
  const EncoderParams a = EncoderParams::random(4096, 16, 0.05, 0);
  const EncoderParams b = EncoderParams::random(4096, 16, 0.05, 1);
  const std::vector<TokenFeatures> qs = RandomQueries(0, 100, 4096);
  Vec want(16, 0.0);
  for (const TokenFeatures& q : qs) {
    const Vec n = encode(a, q), o = encode(b, q);
    for (size_t j = 0; j < 16; ++j) want[j] += n[j] - o[j];
  }
  for (double& x : want) x /= 100.0;
  const DriftVector d = estimate_drift(a, b, qs);
  for (size_t j = 0; j < 16; ++j) EXPECT_NEAR(d.values[j], want[j], 1e-12);
  double norm = 0.0;
  for (double x : d.values) norm += x * x;
  EXPECT_LE(std::sqrt(norm), 2.0);
}

TEST(EstimateDriftTest, Errors) {
  const EncoderParams a = EncoderParams::random(64, 8, 0.05, 0);
  const EncoderParams b = EncoderParams::random(64, 4, 0.05, 0);
  ExpectCode(ErrorCode::kEmptyQuerySet, [&] { estimate_drift(a, a, {}); });
  ExpectCode(ErrorCode::kDimMismatch, [&] { estimate_drift(a, b, RandomQueries(1, 3, 64)); });
}

TEST(AccumulateDriftTest, TwoTransitions) {
  DriftLedger ledger(2);
  ledger.append(Single(1, {1, 0}));
  ledger.append(Single(2, {0, 1}));
  const DriftVector d = accumulate_drift(ledger, 1, 3);
  EXPECT_EQ(d.values, (Vec{1, 1}));
  EXPECT_EQ(d.from_task, 1);
  EXPECT_EQ(d.to_task, 3);
  EXPECT_EQ(accumulate_drift(ledger, 2, 2).values, (Vec{0, 0}));
  EXPECT_EQ(accumulate_drift(ledger, 2, 3).values, (Vec{0, 1}));
}

TEST(AccumulateDriftTest, AdditivityOnRandomRecords) {
  TinyRng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    DriftLedger ledger(32);
    const Vec a = rng.gauss_vec(32), b = rng.gauss_vec(32);
    ledger.append(Single(1, a));
    ledger.append(Single(2, b));
    const Vec s = accumulate_drift(ledger, 1, 3).values;
    for (size_t j = 0; j < 32; ++j) EXPECT_NEAR(s[j], a[j] + b[j], 1e-15);
  }
}

TEST(AccumulateDriftTest, Errors) {
  DriftLedger ledger(2);
  ledger.append(Single(1, {1, 0}));
  ExpectCode(ErrorCode::kMissingTransition, [&] { accumulate_drift(ledger, 1, 4); });
  ExpectCode(ErrorCode::kMissingTransition, [&] { ledger.append(Single(3, {0, 0})); });

  DriftRecord multi;
  multi.kind = DriftKind::kMulti;
  multi.multi = MultiDriftRecord{2, 3, {{1, 0}}, {{0, 1}}, {4}};
  ledger.append(multi);
  ExpectCode(ErrorCode::kMixedRecordKind, [&] { accumulate_drift(ledger, 1, 3); });
}

TEST(CompensateQueryTest, ZeroDeltaIsBitIdentity) {
  TinyRng rng(5);
  for (int i = 0; i < 20; ++i) {
    const Vec q = l2_normalize(rng.gauss_vec(7));
    const Vec out = compensate_query(q, DriftVector{Vec(7, 0.0), 1, 2});
    EXPECT_EQ(std::memcmp(out.data(), q.data(), q.size() * sizeof(double)), 0);
  }
}

TEST(CompensateQueryTest, SubtractsWithoutRenormalizing) {
  const Vec out = compensate_query(Vec{0.6, 0.8}, DriftVector{{0.1, 0.3}, 1, 2});
  EXPECT_NEAR(out[0], 0.5, 1e-15);
  EXPECT_NEAR(out[1], 0.5, 1e-15);
  ExpectCode(ErrorCode::kDimMismatch, [] { compensate_query(Vec{1, 0}, DriftVector{{1}, 1, 2}); });
  ExpectCode(ErrorCode::kZeroVector, [] { compensate_query(Vec{1, 0}, DriftVector{{1, 0}, 1, 2}); });
}

TEST(TranslationTest, DeltaRecoversPlantedConstantAndOldEmbedding) {
  const Vec c = {0.25, -0.5, 0.125, 0.0625, -0.3, 0.2, 0.05, -0.1};
  auto [old_p, new_p] = TranslatedPair(c);
  for (size_t n : {1u, 7u, 300u}) {
    const std::vector<TokenFeatures> qs = RandomQueries(n, n, 2048);
    const DriftVector d = estimate_drift(new_p, old_p, qs);
    for (size_t j = 0; j < c.size(); ++j) EXPECT_NEAR(d.values[j], c[j], 1e-12);
    for (const TokenFeatures& q : qs) {
      const Vec back = compensate_query(encode(new_p, q), d);
      const Vec want = encode(old_p, q);
      for (size_t j = 0; j < c.size(); ++j) EXPECT_NEAR(back[j], want[j], 1e-12);
    }
  }
}

// Plain Lloyd written from the textbook description.
std::vector<size_t> ReferenceLloyd(const std::vector<Vec>& pts, std::vector<Vec> centers) {
  const size_t k = centers.size(), d = pts[0].size();
  std::vector<size_t> assign(pts.size());
  auto nearest = [&](const Vec& p) {
    size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < k; ++j) {
      double s = 0.0;
      for (size_t c = 0; c < d; ++c) s += (p[c] - centers[j][c]) * (p[c] - centers[j][c]);
      if (s < best_d) {
        best_d = s;
        best = j;
      }
    }
    return best;
  };
  for (int it = 0; it < 100; ++it) {
    for (size_t i = 0; i < pts.size(); ++i) assign[i] = nearest(pts[i]);
    std::vector<Vec> next(k, Vec(d, 0.0));
    std::vector<double> cnt(k, 0.0);
    for (size_t i = 0; i < pts.size(); ++i) {
      for (size_t c = 0; c < d; ++c) next[assign[i]][c] += pts[i][c];
      cnt[assign[i]] += 1.0;
    }
    double shift = 0.0;
    for (size_t j = 0; j < k; ++j) {
      for (double& x : next[j]) x /= cnt[j];
      double s = 0.0;
      for (size_t c = 0; c < d; ++c) s += (next[j][c] - centers[j][c]) * (next[j][c] - centers[j][c]);
      shift = std::max(shift, std::sqrt(s));
    }
    centers = next;
    if (shift <= 1e-6) break;
  }
  for (size_t i = 0; i < pts.size(); ++i) assign[i] = nearest(pts[i]);
  return assign;
}

TEST(MultiDriftTest, KOneMatchesSingleVector) {
  const EncoderParams a = EncoderParams::random(4096, 16, 0.05, 3);
  const EncoderParams b = EncoderParams::random(4096, 16, 0.05, 4);
  const std::vector<TokenFeatures> qs = RandomQueries(3, 150, 4096);
  const DriftVector single = estimate_drift(a, b, qs);
  const MultiDriftRecord multi = estimate_multi_drift(a, b, qs, 1, 99);
  ASSERT_EQ(multi.k(), 1u);
  EXPECT_EQ(multi.cluster_sizes[0], 150u);
  for (size_t j = 0; j < 16; ++j) EXPECT_NEAR(multi.vectors[0][j], single.values[j], 1e-12);

  TinyRng rng(8);
  for (int i = 0; i < 50; ++i) {
    const Vec q = l2_normalize(rng.gauss_vec(16));
    const Vec x = compensate_query_multi(q, multi);
    const Vec y = compensate_query(q, single);
    for (size_t j = 0; j < 16; ++j) EXPECT_NEAR(x[j], y[j], 1e-12);
  }
}

TEST(MultiDriftTest, OneQueryPerCluster) {
  const EncoderParams a = EncoderParams::random(4096, 8, 0.05, 5);
  const EncoderParams b = EncoderParams::random(4096, 8, 0.05, 6);
  std::vector<TokenFeatures> qs;
  for (const char* s : {"alpha", "beta gamma", "delta", "epsilon zeta eta", "theta"}) qs.push_back(tokenize(s, 4096));
  const MultiDriftRecord rec = estimate_multi_drift(a, b, qs, qs.size(), 0);
  ASSERT_EQ(rec.k(), qs.size());
  for (const TokenFeatures& q : qs) {
    const Vec e = encode(a, q), o = encode(b, q);
    const size_t c = nearest_centroid(e, rec.centroids);
    EXPECT_EQ(rec.cluster_sizes[c], 1u);
    for (size_t j = 0; j < 8; ++j) EXPECT_NEAR(rec.vectors[c][j], e[j] - o[j], 1e-12);
  }
}

TEST(MultiDriftTest, LloydMatchesReference) {
  const EncoderParams a = EncoderParams::random(8192, 16, 0.05, 0);
  const std::vector<TokenFeatures> qs = RandomQueries(0, 200, 8192);
  std::vector<Vec> pts;
  for (const TokenFeatures& q : qs) pts.push_back(encode(a, q));
  const std::vector<Vec> init = kmeans_plus_plus_init(pts, 5, 0);
  ASSERT_EQ(init.size(), 5u);
  for (size_t i = 0; i < init.size(); ++i) {
    for (size_t j = i + 1; j < init.size(); ++j) EXPECT_NE(init[i], init[j]);
  }
  const KMeansResult km = lloyd(pts, init);
  ASSERT_EQ(km.centroids.size(), 5u);
  EXPECT_EQ(km.assignment, ReferenceLloyd(pts, init));
  EXPECT_EQ(kmeans_plus_plus_init(pts, 5, 0), init);
}

TEST(MultiDriftTest, ClusterVectorsAreClusterMeans) {
  const EncoderParams a = EncoderParams::random(8192, 16, 0.05, 0);
  const EncoderParams b = EncoderParams::random(8192, 16, 0.05, 1);
  const std::vector<TokenFeatures> qs = RandomQueries(0, 200, 8192);
  const MultiDriftRecord rec = estimate_multi_drift(a, b, qs, 5, 0);
  std::vector<Vec> sum(rec.k(), Vec(16, 0.0));
  std::vector<size_t> cnt(rec.k(), 0);
  for (const TokenFeatures& q : qs) {
    const Vec e = encode(a, q), o = encode(b, q);
    double best = std::numeric_limits<double>::infinity();
    size_t c = 0;
    for (size_t j = 0; j < rec.k(); ++j) {
      double s = 0.0;
      for (size_t x = 0; x < 16; ++x) s += (e[x] - rec.centroids[j][x]) * (e[x] - rec.centroids[j][x]);
      if (s < best) {
        best = s;
        c = j;
      }
    }
    for (size_t x = 0; x < 16; ++x) sum[c][x] += e[x] - o[x];
    ++cnt[c];
  }
  for (size_t j = 0; j < rec.k(); ++j) {
    ASSERT_GT(cnt[j], 0u);
    EXPECT_EQ(cnt[j], rec.cluster_sizes[j]);
    for (size_t x = 0; x < 16; ++x) EXPECT_NEAR(rec.vectors[j][x], sum[j][x] / cnt[j], 1e-12);
  }
}

TEST(MultiDriftTest, Errors) {
  const EncoderParams a = EncoderParams::random(64, 4, 0.05, 0);
  ExpectCode(ErrorCode::kTooFewQueries, [&] { estimate_multi_drift(a, a, RandomQueries(0, 3, 64), 4, 0); });
}

TEST(CompensateMultiTest, SelfAssignmentAndTies) {
  MultiDriftRecord rec{1, 2, {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0, 0, -1}}, {{1, 1, 1}, {2, 2, 2}, {3, 3, 3}, {4, 4, 4}},
                       {1, 1, 1, 1}};
  const Vec out = compensate_query_multi(Vec{0, 0, 1}, rec);
  EXPECT_EQ(out, (Vec{-3, -3, -2}));
  const Vec q = l2_normalize(Vec{1, 1, 0});
  EXPECT_EQ(nearest_centroid(q, rec.centroids), 0u);
  const Vec tie = compensate_query_multi(q, rec);
  EXPECT_NEAR(tie[0], q[0] - 1, 1e-15);
  ExpectCode(ErrorCode::kDimMismatch, [&] { compensate_query_multi(Vec{1, 0}, rec); });
}

TEST(CompensateAcrossTest, SingleLedgerEqualsAccumulate) {
  TinyRng rng(12);
  DriftLedger ledger(6);
  for (int t = 1; t <= 4; ++t) ledger.append(Single(t, rng.gauss_vec(6)));
  for (int tp = 1; tp <= 5; ++tp) {
    const Vec q = l2_normalize(rng.gauss_vec(6));
    const Vec a = compensate_across(q, ledger, tp, 5);
    const Vec b = compensate_query(q, accumulate_drift(ledger, tp, 5));
    EXPECT_EQ(a, b);
  }
}

TEST(PredictTaskTest, Basics) {
  DriftLedger ledger(3);
  ExpectCode(ErrorCode::kNoCentroids, [&] { predict_task_id(Vec{1, 0, 0}, ledger); });
  set_task_centroid(ledger, 1, {1, 0, 0});
  EXPECT_EQ(predict_task_id(Vec{0, 1, 0}, ledger), 1);
  set_task_centroid(ledger, 2, {0, 1, 0.1});
  set_task_centroid(ledger, 3, {0, 0, 1});
  EXPECT_EQ(predict_task_id(Vec{0, 1, 0.1}, ledger), 2);
  TinyRng rng(1);
  for (int i = 0; i < 100; ++i) {
    const Vec q = rng.gauss_vec(3);
    Vec s = q;
    for (double& x : s) x *= 37.5;
    EXPECT_EQ(predict_task_id(q, ledger), predict_task_id(s, ledger));
  }
}

TEST(UpdateCentroidsTest, AdditiveLaws) {
  TinyRng rng(9);
  DriftLedger ledger(5);
  set_task_centroid(ledger, 1, rng.gauss_vec(5));
  set_task_centroid(ledger, 2, rng.gauss_vec(5));
  const auto original = ledger.task_centroids();

  update_task_centroids(ledger, DriftVector{Vec(5, 0.0), 2, 3});
  EXPECT_EQ(ledger.task_centroids(), original);

  const Vec d1 = rng.gauss_vec(5), d2 = rng.gauss_vec(5);
  Vec neg = d1;
  for (double& x : neg) x = -x;
  update_task_centroids(ledger, DriftVector{d1, 2, 3});
  update_task_centroids(ledger, DriftVector{neg, 2, 3});
  for (const auto& [t, c] : ledger.task_centroids()) {
    for (size_t j = 0; j < 5; ++j) EXPECT_NEAR(c[j], original.at(t)[j], 1e-12);
  }

  DriftLedger two = ledger, sum = ledger;
  update_task_centroids(two, DriftVector{d1, 1, 2});
  update_task_centroids(two, DriftVector{d2, 2, 3});
  Vec s(5);
  for (size_t j = 0; j < 5; ++j) s[j] = d1[j] + d2[j];
  update_task_centroids(sum, DriftVector{s, 1, 3});
  for (const auto& [t, c] : two.task_centroids()) {
    for (size_t j = 0; j < 5; ++j) EXPECT_NEAR(c[j], sum.task_centroids().at(t)[j], 1e-12);
  }
  ExpectCode(ErrorCode::kDimMismatch, [&] { update_task_centroids(ledger, DriftVector{Vec(4, 0.0), 2, 3}); });
}

TEST(LedgerFileTest, JsonRoundTrip) {
  TinyRng rng(21);
  DriftLedger ledger(4);
  ledger.append(Single(1, rng.gauss_vec(4)));
  DriftRecord m;
  m.kind = DriftKind::kMulti;
  m.multi = MultiDriftRecord{2, 3, {rng.gauss_vec(4), rng.gauss_vec(4)}, {rng.gauss_vec(4), rng.gauss_vec(4)}, {3, 9}};
  ledger.append(m);
  set_task_centroid(ledger, 1, rng.gauss_vec(4));
  set_task_centroid(ledger, 3, {0.1, 1e-300, -0.0, 1.0 / 3.0});
  TempDir dir("ledger");
  const std::string path = (dir.path() / "ledger.json").string();
  save_ledger(ledger, path);
  const DriftLedger back = load_ledger(path);
  EXPECT_TRUE(back == ledger);
  EXPECT_EQ(ledger_to_json(back), ledger_to_json(ledger));
  ExpectCode(ErrorCode::kParseError, [] { ledger_from_json("{\"dim\": 2, \"records\": 5}"); });
  ExpectCode(ErrorCode::kParseError, [] { ledger_from_json("not json"); });
}

}  // namespace
}  // namespace qdc
