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

#include "qdc/eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "qdc/encoder.h"
#include "qdc/errors.h"
#include "test_util.h"

namespace qdc {
namespace {

using ::qdc::testing::ExpectCode;
using ::qdc::testing::TinyRng;

RankedList Ranked(const std::vector<std::string>& ids) {
  RankedList out;
  double s = 1.0;
  for (const std::string& id : ids) {
    out.push_back({id, s});
    s -= 0.01;
  }
  return out;
}

MetricReport One(const std::vector<std::string>& ids, const std::map<std::string, int>& rel, size_t k) {
  return compute_metrics({{"q", Ranked(ids)}}, {{"q", rel}}, k);
}

struct OracleMetrics {
  double ndcg, recall, ap;
};

// Metric definitions evaluated directly on a ranking of grades.
OracleMetrics Oracle(const std::vector<int>& grades_in_rank_order, std::vector<int> all_grades, size_t k) {
  double dcg = 0.0, idcg = 0.0;
  for (size_t i = 0; i < std::min(k, grades_in_rank_order.size()); ++i) {
    dcg += (std::pow(2.0, grades_in_rank_order[i]) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
  }
  std::sort(all_grades.rbegin(), all_grades.rend());
  for (size_t i = 0; i < std::min(k, all_grades.size()); ++i) {
    idcg += (std::pow(2.0, all_grades[i]) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
  }
  size_t relevant = 0;
  for (int g : all_grades) relevant += g > 0 ? 1 : 0;
  size_t hits = 0;
  double prec_sum = 0.0;
  for (size_t i = 0; i < std::min(k, grades_in_rank_order.size()); ++i) {
    if (grades_in_rank_order[i] > 0) {
      ++hits;
      prec_sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  OracleMetrics m{};
  m.ndcg = idcg > 0 ? dcg / idcg : 0.0;
  m.recall = relevant > 0 ? static_cast<double>(hits) / static_cast<double>(relevant) : 0.0;
  m.ap = relevant > 0 ? prec_sum / static_cast<double>(std::min(relevant, k)) : 0.0;
  return m;
}

TEST(ComputeMetricsTest, HandDerivedValues) {
  MetricReport r = One({"d1", "d2", "d3"}, {{"d1", 1}}, 10);
  EXPECT_DOUBLE_EQ(r.ndcg, 1.0);
  EXPECT_DOUBLE_EQ(r.recall, 1.0);
  EXPECT_DOUBLE_EQ(r.map, 1.0);

  r = One({"d2", "d1", "d3"}, {{"d1", 1}}, 10);
  EXPECT_NEAR(r.ndcg, 1.0 / std::log2(3.0), 1e-12);
  EXPECT_NEAR(r.ndcg, 0.63093, 1e-5);
  EXPECT_DOUBLE_EQ(r.map, 0.5);
  EXPECT_DOUBLE_EQ(r.recall, 1.0);

  r = One({"d2", "d3"}, {{"d1", 1}}, 10);
  EXPECT_EQ(r.ndcg, 0.0);
  EXPECT_EQ(r.recall, 0.0);
  EXPECT_EQ(r.map, 0.0);
}

TEST(ComputeMetricsTest, CutoffAndUnjudged) {
  // Relevant doc beyond k does not count; unjudged docs are grade 0.
  const MetricReport r = One({"x", "y", "d1"}, {{"d1", 2}, {"y", 0}}, 2);
  EXPECT_EQ(r.ndcg, 0.0);
  EXPECT_EQ(r.recall, 0.0);
}

TEST(ComputeMetricsTest, MissingQrels) {
  ExpectCode(ErrorCode::kMissingQrels, [] { compute_metrics({{"q1", Ranked({"a"})}}, {{"q2", {{"a", 1}}}}, 10); });
}

TEST(ComputeMetricsTest, MeanOfPerQuery) {
  QueryRuns runs;
  Qrels qrels;
  TinyRng rng(4);
  for (int q = 0; q < 30; ++q) {
    const std::string qid = "q" + std::to_string(q);
    std::vector<std::string> ids;
    for (int d = 0; d < 10; ++d) ids.push_back("d" + std::to_string((q * 3 + d * 7) % 20));
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    runs[qid] = Ranked(ids);
    qrels[qid]["d" + std::to_string(rng.next() % 20)] = 1 + static_cast<int>(rng.next() % 2);
  }
  const MetricReport r = compute_metrics(runs, qrels, 10);
  ASSERT_EQ(r.per_query.size(), 30u);
  double n = 0, rc = 0, ap = 0;
  for (const QueryMetrics& m : r.per_query) {
    n += m.ndcg;
    rc += m.recall;
    ap += m.ap;
    EXPECT_GE(m.ndcg, 0.0);
    EXPECT_LE(m.ndcg, 1.0);
  }
  EXPECT_NEAR(r.ndcg, n / 30, 1e-12);
  EXPECT_NEAR(r.recall, rc / 30, 1e-12);
  EXPECT_NEAR(r.map, ap / 30, 1e-12);
}

TEST(ComputeMetricsTest, ExhaustivePermutationOracle) {
  TinyRng rng(0);
  int checked = 0;
  for (int inst = 0; inst < 60; ++inst) {
    const size_t n = 1 + rng.next() % 5;
    std::vector<std::string> ids;
    std::map<std::string, int> rel;
    std::vector<int> grades;
    for (size_t i = 0; i < n; ++i) {
      ids.push_back("doc" + std::to_string(i));
      const int g = static_cast<int>(rng.next() % 3);
      grades.push_back(g);
      if (g > 0 || rng.next() % 2) rel[ids.back()] = g;
    }
    if (std::none_of(grades.begin(), grades.end(), [](int g) { return g > 0; })) {
      grades[0] = 1;
      rel[ids[0]] = 1;
    }
    std::vector<size_t> perm(n);
    std::iota(perm.begin(), perm.end(), size_t{0});
    do {
      std::vector<std::string> ranked;
      std::vector<int> g;
      for (size_t i : perm) {
        ranked.push_back(ids[i]);
        g.push_back(grades[i]);
      }
      for (size_t k = 1; k <= 6; ++k) {
        const MetricReport r = One(ranked, rel, k);
        const OracleMetrics o = Oracle(g, grades, k);
        EXPECT_NEAR(r.ndcg, o.ndcg, 1e-9);
        EXPECT_NEAR(r.recall, o.recall, 1e-9);
        EXPECT_NEAR(r.map, o.ap, 1e-9);
        ++checked;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
  EXPECT_GT(checked, 1000);
}

TEST(MetricPropertiesTest, MonotoneRelabelAndRecallInK) {
  TinyRng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> ids;
    std::map<std::string, int> rel;
    for (int i = 0; i < 12; ++i) {
      ids.push_back("d" + std::to_string(i));
      if (rng.next() % 3 == 0) rel[ids.back()] = 1 + static_cast<int>(rng.next() % 3);
    }
    if (rel.empty()) rel["d5"] = 1;
    std::vector<std::string> order = ids;
    for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.next() % i]);

    const double base = One(order, rel, 10).ndcg;
    // Move a relevant doc up one rank past a non-relevant one.
    for (size_t i = 1; i < order.size(); ++i) {
      if (rel.count(order[i]) && rel.at(order[i]) > 0 && !rel.count(order[i - 1])) {
        std::vector<std::string> better = order;
        std::swap(better[i], better[i - 1]);
        EXPECT_GE(One(better, rel, 10).ndcg, base - 1e-15);
        break;
      }
    }

    std::vector<std::string> renamed;
    std::map<std::string, int> rel2;
    for (const std::string& id : order) renamed.push_back("x-" + id + "-y");
    for (const auto& [id, g] : rel) rel2["x-" + id + "-y"] = g;
    const MetricReport a = One(order, rel, 10), b = One(renamed, rel2, 10);
    EXPECT_EQ(a.ndcg, b.ndcg);
    EXPECT_EQ(a.recall, b.recall);
    EXPECT_EQ(a.map, b.map);

    double prev = -1.0;
    for (size_t k = 1; k <= 12; ++k) {
      const double r = One(order, rel, k).recall;
      EXPECT_GE(r, prev);
      prev = r;
    }
  }
}

TEST(MetricPropertiesTest, IdealOrderingIsOne) {
  const std::map<std::string, int> rel = {{"a", 3}, {"b", 2}, {"c", 1}};
  EXPECT_NEAR(One({"a", "b", "c", "z"}, rel, 10).ndcg, 1.0, 1e-15);
  EXPECT_NEAR(One({"a", "b", "z", "c"}, rel, 2).ndcg, 1.0, 1e-15);
  EXPECT_LT(One({"b", "a", "c"}, rel, 10).ndcg, 1.0);
}

TEST(PerformanceDropTest, ConstantAndReferenceHistories) {
  const PDReport flat = performance_drop({{0.5, 0.4}, {0.5, 0.4}});
  ASSERT_EQ(flat.pd.size(), 2u);
  EXPECT_EQ(*flat.pd[0], 0.0);
  EXPECT_FALSE(flat.pd[1].has_value());

  // Five-task history with only the relevant cells filled in.
  std::vector<std::vector<double>> m(5, std::vector<double>(5, 0.0));
  m[0][0] = 40.2;
  m[4][0] = 34.8;
  m[3][3] = 72.8;
  m[4][3] = 75.0;
  const PDReport pd = performance_drop(m);
  EXPECT_NEAR(*pd.pd[0], 5.4, 1e-9);
  EXPECT_NEAR(*pd.pd[3], -2.2, 1e-9);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.1f", *pd.pd[0]);
  EXPECT_STREQ(buf, "5.4");
  std::snprintf(buf, sizeof(buf), "%.1f", *pd.pd[3]);
  EXPECT_STREQ(buf, "-2.2");
}

TEST(PerformanceDropTest, IncompleteMatrix) {
  ExpectCode(ErrorCode::kIncompleteMatrix, [] { performance_drop(std::vector<std::vector<double>>{}); });
  ExpectCode(ErrorCode::kIncompleteMatrix, [] { performance_drop({{1.0, 2.0}}); });
  ExpectCode(ErrorCode::kIncompleteMatrix, [] { performance_drop({{NAN, 1.0}, {1.0, 1.0}}); });
}

TEST(DriftReportTest, IdenticalEncodersGiveZero) {
  const EncoderParams p = EncoderParams::random(4096, 16, 0.05, 0);
  const DriftLengthReport r =
      drift_report(p, p, {"a b", "c d e", "f"}, {{"d1", "", "x y z w"}, {"d2", "t", "u v"}, {"d3", "", "q"}});
  for (const PopulationDrift* pop : {&r.query, &r.corpus}) {
    for (const BucketDrift& b : pop->buckets) {
      ASSERT_TRUE(b.mean.has_value());
      EXPECT_NEAR(*b.mean, 0.0, 1e-15);
    }
  }
}

TEST(DriftReportTest, TercilesAndLoopOracle) {
  const EncoderParams a = EncoderParams::random(32768, 64, 0.05, 42);
  const EncoderParams b = EncoderParams::random(32768, 64, 0.05, 43);
  TinyRng rng(42);
  std::vector<std::string> texts;
  for (int i = 0; i < 100; ++i) {
    std::string t;
    const int len = 1 + static_cast<int>(rng.next() % 12);
    for (int w = 0; w < len; ++w) t += "w" + std::to_string(rng.next() % 1000) + " ";
    texts.push_back(t);
  }
  const PopulationDrift pop = population_drift(a, b, texts);

  std::vector<size_t> lens;
  for (const std::string& t : texts) lens.push_back(whitespace_token_count(t));
  std::vector<size_t> sorted = lens;
  std::sort(sorted.begin(), sorted.end());
  // ceil(n/3)-th and ceil(2n/3)-th smallest lengths.
  EXPECT_EQ(pop.lower_cut, sorted[33]);
  EXPECT_EQ(pop.upper_cut, sorted[66]);

  double sum[3] = {0, 0, 0};
  size_t cnt[3] = {0, 0, 0};
  for (size_t i = 0; i < texts.size(); ++i) {
    const TokenFeatures f = tokenize(texts[i]);
    const Vec x = encode(a, f), y = encode(b, f);
    double dotp = 0.0;
    for (size_t j = 0; j < x.size(); ++j) dotp += x[j] * y[j];
    const int bucket = lens[i] <= sorted[33] ? 0 : (lens[i] <= sorted[66] ? 1 : 2);
    sum[bucket] += 1.0 - dotp;
    ++cnt[bucket];
  }
  for (int k = 0; k < 3; ++k) {
    ASSERT_EQ(pop.buckets[k].count, cnt[k]);
    ASSERT_TRUE(pop.buckets[k].mean.has_value());
    EXPECT_NEAR(*pop.buckets[k].mean, sum[k] / static_cast<double>(cnt[k]), 1e-12);
  }
}

TEST(DriftReportTest, SmallPopulationsAndErrors) {
  const EncoderParams a = EncoderParams::random(1024, 8, 0.05, 1);
  const PopulationDrift one = population_drift(a, a, {"single text"});
  EXPECT_EQ(one.buckets[0].count, 1u);
  EXPECT_FALSE(one.buckets[1].mean.has_value());
  EXPECT_FALSE(one.buckets[2].mean.has_value());
  ExpectCode(ErrorCode::kEmptyPopulation, [&] { population_drift(a, a, {}); });
  ExpectCode(ErrorCode::kEmptyPopulation, [&] { drift_report(a, a, {"q"}, {}); });
}

RunResult Toy(const std::string& method) {
  RunResult r;
  r.method = method;
  r.task_ids = {1, 2};
  r.scores[Metric::kNdcg] = {{0.5, 0.25}, {0.375, 0.75}};
  r.scores[Metric::kRecall] = {{0.5, 0.5}, {0.5, 1.0}};
  r.scores[Metric::kMap] = {{0.25, 0.25}, {0.25, 0.5}};
  return r;
}

TEST(ReportingTest, CsvAndTables) {
  const RunResult r = Toy("FT");
  EXPECT_DOUBLE_EQ(r.old_task_average(Metric::kNdcg), 0.375);
  EXPECT_DOUBLE_EQ(r.final_average(Metric::kNdcg), 0.5625);
  const std::string csv = metrics_csv({r});
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "checkpoint,task,method,metric,value");
  EXPECT_NE(csv.find("2,1,FT,ndcg,0.375"), std::string::npos);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 3 * 4);

  const std::string table = render_matrix(r, Metric::kNdcg);
  EXPECT_NE(table.find("PD"), std::string::npos);
  EXPECT_NE(table.find("12.5"), std::string::npos);  // PD of task 1: 50.0 - 37.5
  EXPECT_NE(table.find("25.0*"), std::string::npos);

  const std::string cmp = comparison_csv({r, Toy("FT+QDC")});
  EXPECT_EQ(std::count(cmp.begin(), cmp.end(), '\n'), 3);
  EXPECT_EQ(format_score(0.4567), "45.7");
  EXPECT_EQ(format_score(-1e-9), "0.0");
}

}  // namespace
}  // namespace qdc
