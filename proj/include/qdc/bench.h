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

#ifndef QDC_BENCH_H_
#define QDC_BENCH_H_

#include <string>
#include <vector>

#include "qdc/config.h"
#include "qdc/dataset.h"
#include "qdc/eval.h"
#include "qdc/pipeline.h"

namespace qdc {

// Synthetic stream when config.datasets is empty, else BEIR dirs in order
// with task ids 1..T.
std::vector<TaskDataset> load_datasets(const Config& config);

// run_dir/data/task{t}/ in BEIR layout.
void write_datasets(const std::vector<TaskDataset>& datasets, const std::string& run_dir);
// Reads back what write_datasets produced.
std::vector<TaskDataset> read_datasets(const std::string& run_dir);

std::string snapshot_path(const std::string& dir, int version);
std::string index_path(const std::string& dir, int task_id);
std::string ledger_path(const std::string& dir);

// snapshots/f{0..t}.qdcenc, indexes/task{1..t}.qdcidx, ledger.json.
void save_state(const ContinualState& state, const std::string& dir);
// State as it was right after training task `checkpoint`.
ContinualState load_checkpoint(const std::string& dir, int checkpoint);
int stored_checkpoints(const std::string& dir);

// Directory holding config.json and data/ for an artifact dir: the dir
// itself or its parent.
std::string find_run_root(const std::string& artifact_dir);

// Rebuilds the score matrix of one method from stored artifacts.
RunResult evaluate_stored(const std::string& artifact_dir, const std::vector<TaskDataset>& datasets,
                          const Method& method, size_t k, int threads);

struct BenchReport {
  std::vector<RunResult> methods;  // FT, FT+QDC, FT+KD, FT+KD+QDC, FT+REINDEX, FT+KD+REINDEX
  RunResult joint;
  RunResult zero_shot;
  std::string table;
};

// Writes ft/, ft-kd/, joint/, data/, config.json, metrics.csv,
// comparison.csv, joint.csv and table.txt under run_dir.
BenchReport run_bench(const Config& config, const std::string& run_dir);

// One method: snapshots/, indexes/, ledger.json, metrics.csv, table.txt.
RunResult run_train(const Config& config, const std::string& run_dir);

}  // namespace qdc

#endif  // QDC_BENCH_H_
