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

#ifndef QDC_PIPELINE_H_
#define QDC_PIPELINE_H_

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "qdc/dataset.h"
#include "qdc/drift.h"
#include "qdc/encoder.h"
#include "qdc/eval.h"
#include "qdc/index_store.h"

namespace qdc {

struct TrainConfig {
  uint64_t seed = 42;
  uint32_t vocab_size = kDefaultVocabSize;
  uint32_t dim = 64;
  double tau = 0.05;
  double init_scale = 0.0;  // <= 0 means 1/sqrt(dim)
  double lr = 0.6;
  double weight_decay = 0.01;
  size_t batch_size = 128;
  size_t hard_negatives = 7;
  int epochs = 1;
  size_t drift_query_cap = 10000;
  size_t k = 10;
  size_t multi_k = 1;
  // Store k-means records even when multi_k == 1.
  bool force_multi = false;
  int threads = 1;

  bool multi_records() const { return force_multi || multi_k > 1; }
  void validate() const;  // throws InvalidArgument
};

enum class Strategy { kPlain, kQdc, kReindex };
const char* strategy_name(Strategy s);
Strategy parse_strategy(const std::string& name);

struct Method {
  bool kd = false;
  Strategy strategy = Strategy::kPlain;

  std::string name() const;
};

// Accepts FT, FT+KD, FT+QDC, FT+KD+QDC, FT+REINDEX, FT+KD+REINDEX.
Method parse_method(const std::string& name);
std::vector<Method> all_methods();

struct ContinualState {
  EncoderParams params;    // f_t
  EncoderParams previous;  // f_{t-1}, frozen during training
  std::vector<EncoderParams> snapshots;  // f_0 .. f_t
  std::map<int, CorpusIndex> indexes;    // I_z built with f_z
  DriftLedger ledger;
  bool kd = false;
  int last_task = 0;
};

ContinualState init_state(const TrainConfig& config, bool kd);

// Deterministic batch order for one epoch of one task.
std::vector<size_t> batch_order(const TrainConfig& config, int task_id, int epoch, size_t n);

// Top-H corpus docs per pair under params, excluding every doc paired with
// the same query text. Ties by ascending doc_id.
std::vector<std::vector<std::string>> mine_hard_negatives(const EncoderParams& params,
                                                          const std::vector<TrainPair>& pairs,
                                                          const std::vector<DocRecord>& corpus,
                                                          size_t H);

void train_task(ContinualState& state, const TaskDataset& data, const TrainConfig& config);

struct RetrievalRun {
  int evaluated_task = 0;
  int checkpoint = 0;
  std::vector<std::string> query_ids;
  std::vector<RankedList> lists;

  QueryRuns as_runs() const;
};

// Evaluates dataset (task t') at the state's current checkpoint t. Future
// tasks are scored zero-shot against an index built on the fly with f_t.
RetrievalRun retrieve_eval(const ContinualState& state, const TaskDataset& data, Strategy strategy,
                           size_t k, int threads = 1);

// Query embedding under f_t mapped for the given strategy and target task.
Vec strategy_query(const ContinualState& state, int t_prime, Strategy strategy, const Vec& q_t);

struct Trajectory {
  std::vector<RunResult> results;  // one per requested strategy
  ContinualState state;            // after the last task
};

// Observer is invoked after each task is trained and evaluated.
using TaskObserver = std::function<void(const ContinualState&, int task_id)>;

// One training run (FT or FT+KD) scored under several retrieval strategies.
Trajectory run_trajectory(const std::vector<TaskDataset>& datasets, bool kd,
                          const std::vector<Strategy>& strategies, const TrainConfig& config,
                          const TaskObserver& observer = {});

RunResult run_continual(const std::vector<TaskDataset>& datasets, const Method& method,
                        const TrainConfig& config);

// One model over the union of all train pairs; hard negatives mined per
// dataset with f_0. Dataset order does not matter.
EncoderParams joint_train(const std::vector<TaskDataset>& datasets, const TrainConfig& config);

// Scores of one encoder on every task, each corpus indexed with it.
RunResult evaluate_single_model(const std::vector<TaskDataset>& datasets, const EncoderParams& params,
                                const std::string& method, const TrainConfig& config);

}  // namespace qdc

#endif  // QDC_PIPELINE_H_
