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

#ifndef QDC_EVAL_H_
#define QDC_EVAL_H_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qdc/encoder.h"
#include "qdc/index_store.h"

namespace qdc {

// query_id -> doc_id -> graded relevance. Grade 0 means judged non-relevant.
using Qrels = std::map<std::string, std::map<std::string, int>>;

// query_id -> ranked list.
using QueryRuns = std::map<std::string, RankedList>;

struct QueryMetrics {
  std::string query_id;
  double ndcg = 0.0;
  double recall = 0.0;
  double ap = 0.0;
};

struct MetricReport {
  size_t k = 10;
  std::vector<QueryMetrics> per_query;  // ascending query_id
  double ndcg = 0.0;
  double recall = 0.0;
  double map = 0.0;
};

// Gain 2^rel - 1, discount log2(rank + 1). Unjudged docs have grade 0.
// Throws MissingQrels for a run query without judgments.
MetricReport compute_metrics(const QueryRuns& runs, const Qrels& qrels, size_t k);

enum class Metric { kNdcg, kRecall, kMap };
const char* metric_name(Metric m);

// Score matrix in [checkpoint][task] order, both 0-based over task_ids.
// Scores are on the 0-1 scale; rendering multiplies by 100.
struct RunResult {
  std::string method;
  std::vector<int> task_ids;
  // Checkpoint labels for the matrix rows; empty means one per task.
  std::vector<int> checkpoint_ids;
  std::map<Metric, std::vector<std::vector<double>>> scores;

  size_t num_tasks() const { return task_ids.size(); }
  int checkpoint_id(size_t row) const {
    return checkpoint_ids.empty() ? task_ids[row] : checkpoint_ids[row];
  }
  const std::vector<std::vector<double>>& matrix(Metric m) const;
  // Final-checkpoint score per task.
  std::vector<double> final_scores(Metric m) const;
  // Mean over the old tasks (all but the last) at the final checkpoint.
  double old_task_average(Metric m) const;
  // Mean over all tasks at the final checkpoint.
  double final_average(Metric m) const;
};

// PD per task: own-checkpoint score minus final score; nullopt for the last.
struct PDReport {
  std::vector<std::optional<double>> pd;
};

PDReport performance_drop(const std::vector<std::vector<double>>& matrix);
PDReport performance_drop(const RunResult& result, Metric m);

struct BucketDrift {
  std::optional<double> mean;  // absent when the bucket is empty
  size_t count = 0;
};

struct PopulationDrift {
  size_t lower_cut = 0;  // short: len <= lower_cut
  size_t upper_cut = 0;  // medium: lower_cut < len <= upper_cut; long: above
  BucketDrift buckets[3];
};

struct DriftLengthReport {
  PopulationDrift query;
  PopulationDrift corpus;
};

// Tercile cuts over whitespace token counts; drift is 1 - cos(f_new, f_old).
PopulationDrift population_drift(const EncoderParams& params_new, const EncoderParams& params_old,
                                 const std::vector<std::string>& texts);
DriftLengthReport drift_report(const EncoderParams& params_new, const EncoderParams& params_old,
                               const std::vector<std::string>& queries,
                               const std::vector<DocRecord>& corpus);
std::string drift_report_csv(const DriftLengthReport& report);

// checkpoint,task,method,metric,value with full-precision values.
std::string metrics_csv(const std::vector<RunResult>& results);

// One block per method: rows are evaluated tasks, columns checkpoints,
// plus a PD column and an average row. Scores x100, one decimal.
std::string render_matrix(const RunResult& result, Metric m,
                          const std::vector<std::string>& task_names = {});

// One row per method with final-checkpoint scores and their average.
std::string render_comparison(const std::vector<RunResult>& results, Metric m,
                              const std::vector<std::string>& task_names = {});
std::string comparison_csv(const std::vector<RunResult>& results);

std::string format_score(double score01);

}  // namespace qdc

#endif  // QDC_EVAL_H_
