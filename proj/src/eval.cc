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
#include <functional>
#include <sstream>

#include "qdc/errors.h"
#include "qdc/tokenizer.h"

namespace qdc {
namespace {

std::string fmt_full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string pad(const std::string& s, size_t width, bool left = false) {
  if (s.size() >= width) return s;
  return left ? s + std::string(width - s.size(), ' ') : std::string(width - s.size(), ' ') + s;
}

std::string task_label(const RunResult& r, size_t i, const std::vector<std::string>& names) {
  if (i < names.size() && !names[i].empty()) return names[i];
  return "T" + std::to_string(r.task_ids[i]);
}

}  // namespace

MetricReport compute_metrics(const QueryRuns& runs, const Qrels& qrels, size_t k) {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "compute_metrics: k == 0");
  MetricReport report;
  report.k = k;
  for (const auto& [qid, ranked] : runs) {
    auto it = qrels.find(qid);
    if (it == qrels.end()) throw Error(ErrorCode::kMissingQrels, "no qrels for query " + qid);
    const std::map<std::string, int>& judged = it->second;

    std::vector<int> grades;
    for (const auto& [doc, grade] : judged) {
      if (grade > 0) grades.push_back(grade);
    }
    QueryMetrics m;
    m.query_id = qid;
    if (!grades.empty()) {
      std::sort(grades.begin(), grades.end(), std::greater<int>());
      double idcg = 0.0;
      for (size_t i = 0; i < std::min(k, grades.size()); ++i) {
        idcg += (std::pow(2.0, grades[i]) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
      }
      double dcg = 0.0;
      size_t hits = 0;
      double precision_sum = 0.0;
      for (size_t i = 0; i < std::min(k, ranked.size()); ++i) {
        auto g = judged.find(ranked[i].doc_id);
        const int grade = g == judged.end() ? 0 : g->second;
        if (grade <= 0) continue;
        dcg += (std::pow(2.0, grade) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
        ++hits;
        precision_sum += static_cast<double>(hits) / static_cast<double>(i + 1);
      }
      m.ndcg = dcg / idcg;
      m.recall = static_cast<double>(hits) / static_cast<double>(grades.size());
      m.ap = precision_sum / static_cast<double>(std::min(k, grades.size()));
    }
    report.per_query.push_back(m);
  }
  if (!report.per_query.empty()) {
    double n = 0, r = 0, a = 0;
    for (const QueryMetrics& m : report.per_query) {
      n += m.ndcg;
      r += m.recall;
      a += m.ap;
    }
    const double count = static_cast<double>(report.per_query.size());
    report.ndcg = n / count;
    report.recall = r / count;
    report.map = a / count;
  }
  return report;
}

const char* metric_name(Metric m) {
  switch (m) {
    case Metric::kNdcg: return "ndcg";
    case Metric::kRecall: return "recall";
    case Metric::kMap: return "map";
  }
  return "?";
}

const std::vector<std::vector<double>>& RunResult::matrix(Metric m) const {
  auto it = scores.find(m);
  if (it == scores.end()) throw Error(ErrorCode::kIncompleteMatrix, "metric not recorded");
  return it->second;
}

std::vector<double> RunResult::final_scores(Metric m) const {
  const auto& mat = matrix(m);
  if (mat.empty()) throw Error(ErrorCode::kIncompleteMatrix, "empty matrix");
  return mat.back();
}

double RunResult::old_task_average(Metric m) const {
  const std::vector<double> f = final_scores(m);
  if (f.size() < 2) throw Error(ErrorCode::kIncompleteMatrix, "no old tasks");
  double s = 0.0;
  for (size_t i = 0; i + 1 < f.size(); ++i) s += f[i];
  return s / static_cast<double>(f.size() - 1);
}

double RunResult::final_average(Metric m) const {
  const std::vector<double> f = final_scores(m);
  double s = 0.0;
  for (double v : f) s += v;
  return s / static_cast<double>(f.size());
}

PDReport performance_drop(const std::vector<std::vector<double>>& matrix) {
  const size_t t = matrix.size();
  if (t == 0) throw Error(ErrorCode::kIncompleteMatrix, "performance_drop: empty matrix");
  PDReport out;
  for (const auto& row : matrix) {
    if (row.size() != t) throw Error(ErrorCode::kIncompleteMatrix, "performance_drop: matrix not square");
  }
  for (size_t task = 0; task < t; ++task) {
    if (task + 1 == t) {
      out.pd.push_back(std::nullopt);
      continue;
    }
    const double own = matrix[task][task];
    const double last = matrix[t - 1][task];
    if (!std::isfinite(own) || !std::isfinite(last)) {
      throw Error(ErrorCode::kIncompleteMatrix, "performance_drop: missing checkpoint");
    }
    out.pd.push_back(own - last);
  }
  return out;
}

PDReport performance_drop(const RunResult& result, Metric m) {
  return performance_drop(result.matrix(m));
}

PopulationDrift population_drift(const EncoderParams& params_new, const EncoderParams& params_old,
                                 const std::vector<std::string>& texts) {
  if (texts.empty()) throw Error(ErrorCode::kEmptyPopulation, "drift_report: empty population");
  std::vector<size_t> lengths(texts.size());
  for (size_t i = 0; i < texts.size(); ++i) lengths[i] = whitespace_token_count(texts[i]);
  std::vector<size_t> sorted = lengths;
  std::sort(sorted.begin(), sorted.end());
  const size_t n = sorted.size();
  PopulationDrift out;
  out.lower_cut = sorted[(n + 2) / 3 - 1];
  out.upper_cut = sorted[(2 * n + 2) / 3 - 1];

  double sums[3] = {0.0, 0.0, 0.0};
  for (size_t i = 0; i < texts.size(); ++i) {
    const TokenFeatures f = tokenize(texts[i], params_new.vocab_size);
    const double drift = 1.0 - cosine_sim(encode(params_new, f), encode(params_old, f));
    const int b = lengths[i] <= out.lower_cut ? 0 : (lengths[i] <= out.upper_cut ? 1 : 2);
    sums[b] += drift;
    ++out.buckets[b].count;
  }
  for (int b = 0; b < 3; ++b) {
    if (out.buckets[b].count > 0) {
      out.buckets[b].mean = sums[b] / static_cast<double>(out.buckets[b].count);
    }
  }
  return out;
}

DriftLengthReport drift_report(const EncoderParams& params_new, const EncoderParams& params_old,
                               const std::vector<std::string>& queries,
                               const std::vector<DocRecord>& corpus) {
  std::vector<std::string> docs;
  docs.reserve(corpus.size());
  for (const DocRecord& d : corpus) docs.push_back(doc_text(d));
  DriftLengthReport r;
  r.query = population_drift(params_new, params_old, queries);
  r.corpus = population_drift(params_new, params_old, docs);
  return r;
}

std::string drift_report_csv(const DriftLengthReport& report) {
  static const char* kNames[3] = {"short", "medium", "long"};
  std::ostringstream os;
  os << "population,bucket,min_len,max_len,count,mean_drift\n";
  auto emit = [&](const char* pop, const PopulationDrift& p) {
    for (int b = 0; b < 3; ++b) {
      const std::string lo = b == 0 ? "0" : std::to_string((b == 1 ? p.lower_cut : p.upper_cut) + 1);
      const std::string hi = b == 0 ? std::to_string(p.lower_cut)
                                    : (b == 1 ? std::to_string(p.upper_cut) : "inf");
      os << pop << ',' << kNames[b] << ',' << lo << ',' << hi << ',' << p.buckets[b].count << ','
         << (p.buckets[b].mean ? fmt_full(*p.buckets[b].mean) : "absent") << '\n';
    }
  };
  emit("query", report.query);
  emit("corpus", report.corpus);
  return os.str();
}

std::string metrics_csv(const std::vector<RunResult>& results) {
  std::ostringstream os;
  os << "checkpoint,task,method,metric,value\n";
  for (const RunResult& r : results) {
    for (Metric m : {Metric::kNdcg, Metric::kRecall, Metric::kMap}) {
      auto it = r.scores.find(m);
      if (it == r.scores.end()) continue;
      for (size_t c = 0; c < it->second.size(); ++c) {
        for (size_t t = 0; t < it->second[c].size(); ++t) {
          os << r.checkpoint_id(c) << ',' << r.task_ids[t] << ',' << r.method << ',' << metric_name(m) << ','
             << fmt_full(it->second[c][t]) << '\n';
        }
      }
    }
  }
  return os.str();
}

std::string format_score(double score01) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", score01 * 100.0);
  // Avoid "-0.0" in tables.
  if (std::string(buf) == "-0.0") return "0.0";
  return buf;
}

std::string render_matrix(const RunResult& r, Metric m, const std::vector<std::string>& names) {
  const auto& mat = r.matrix(m);
  const size_t t = r.num_tasks();
  const PDReport pd = performance_drop(mat);
  constexpr size_t kCol = 10;
  size_t label_w = 8;
  for (size_t i = 0; i < t; ++i) label_w = std::max(label_w, task_label(r, i, names).size());

  std::ostringstream os;
  os << "[" << r.method << "] " << metric_name(m) << "@k x100; columns = checkpoint after training\n";
  os << pad("Eval on", label_w, true);
  for (size_t c = 0; c < t; ++c) os << pad("T" + std::to_string(r.task_ids[c]), kCol);
  os << pad("PD", kCol) << '\n';
  for (size_t task = 0; task < t; ++task) {
    os << pad(task_label(r, task, names), label_w, true);
    for (size_t c = 0; c < t; ++c) {
      // '*' marks zero-shot cells, '~' old-task cells.
      const char tag = c < task ? '*' : (c > task ? '~' : ' ');
      os << pad(format_score(mat[c][task]) + tag, kCol);
    }
    os << pad(pd.pd[task] ? format_score(*pd.pd[task]) : "-", kCol) << '\n';
  }
  os << pad("Avg", label_w, true);
  for (size_t c = 0; c < t; ++c) {
    double s = 0.0;
    for (size_t task = 0; task < t; ++task) s += mat[c][task];
    os << pad(format_score(s / static_cast<double>(t)) + ' ', kCol);
  }
  os << '\n';
  return os.str();
}

std::string render_comparison(const std::vector<RunResult>& results, Metric m,
                              const std::vector<std::string>& names) {
  if (results.empty()) return "";
  const RunResult& first = results.front();
  size_t method_w = 6;
  for (const RunResult& r : results) method_w = std::max(method_w, r.method.size());
  size_t kCol = 10;
  for (size_t i = 0; i < first.num_tasks(); ++i) kCol = std::max(kCol, task_label(first, i, names).size() + 2);
  std::ostringstream os;
  os << metric_name(m) << "@k x100 at the final checkpoint\n";
  os << pad("Method", method_w, true);
  for (size_t i = 0; i < first.num_tasks(); ++i) os << pad(task_label(first, i, names), kCol);
  os << pad("Avg", kCol) << '\n';
  for (const RunResult& r : results) {
    os << pad(r.method, method_w, true);
    for (double v : r.final_scores(m)) os << pad(format_score(v), kCol);
    os << pad(format_score(r.final_average(m)), kCol) << '\n';
  }
  return os.str();
}

std::string comparison_csv(const std::vector<RunResult>& results) {
  std::ostringstream os;
  os << "method";
  if (!results.empty()) {
    for (int id : results.front().task_ids) os << ",ndcg_T" << id;
  }
  os << ",ndcg_avg,ndcg_old_avg,recall_avg,map_avg\n";
  for (const RunResult& r : results) {
    os << r.method;
    for (double v : r.final_scores(Metric::kNdcg)) os << ',' << fmt_full(v);
    os << ',' << fmt_full(r.final_average(Metric::kNdcg)) << ','
       << (r.num_tasks() > 1 ? fmt_full(r.old_task_average(Metric::kNdcg)) : "") << ','
       << fmt_full(r.final_average(Metric::kRecall)) << ',' << fmt_full(r.final_average(Metric::kMap))
       << '\n';
  }
  return os.str();
}

}  // namespace qdc
