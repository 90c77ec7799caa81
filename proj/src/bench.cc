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

#include "qdc/bench.h"

#include <filesystem>
#include <sstream>

#include "binary_io.h"
#include "qdc/errors.h"

namespace qdc {
namespace {

namespace fs = std::filesystem;

std::string task_dir(const std::string& run_dir, int task_id) {
  return (fs::path(run_dir) / "data" / ("task" + std::to_string(task_id))).string();
}

std::vector<std::string> task_names(const std::vector<TaskDataset>& datasets) {
  std::vector<std::string> names;
  for (const TaskDataset& d : datasets) names.push_back("T" + std::to_string(d.task_id) + " " + d.name);
  return names;
}

void write_run_files(const std::string& dir, const std::vector<RunResult>& results,
                     const std::vector<TaskDataset>& datasets) {
  internal::write_text_file((fs::path(dir) / "metrics.csv").string(), metrics_csv(results));
  std::ostringstream table;
  const std::vector<std::string> names = task_names(datasets);
  for (const RunResult& r : results) {
    table << render_matrix(r, Metric::kNdcg, names) << '\n';
  }
  internal::write_text_file((fs::path(dir) / "table.txt").string(), table.str());
}

}  // namespace

std::vector<TaskDataset> load_datasets(const Config& config) {
  if (config.datasets.empty()) return generate_task_stream(config.stream);
  std::vector<TaskDataset> out;
  for (size_t i = 0; i < config.datasets.size(); ++i) {
    out.push_back(load_beir_dir(config.datasets[i], static_cast<int>(i) + 1));
  }
  return out;
}

void write_datasets(const std::vector<TaskDataset>& datasets, const std::string& run_dir) {
  for (const TaskDataset& d : datasets) export_beir(d, task_dir(run_dir, d.task_id));
}

std::vector<TaskDataset> read_datasets(const std::string& run_dir) {
  std::vector<TaskDataset> out;
  for (int t = 1; fs::exists(task_dir(run_dir, t)); ++t) out.push_back(load_beir_dir(task_dir(run_dir, t), t));
  if (out.empty()) throw Error(ErrorCode::kIo, "no datasets under " + run_dir + "/data");
  return out;
}

std::string snapshot_path(const std::string& dir, int version) {
  return (fs::path(dir) / "snapshots" / ("f" + std::to_string(version) + ".qdcenc")).string();
}

std::string index_path(const std::string& dir, int task_id) {
  return (fs::path(dir) / "indexes" / ("task" + std::to_string(task_id) + ".qdcidx")).string();
}

std::string ledger_path(const std::string& dir) { return (fs::path(dir) / "ledger.json").string(); }

void save_state(const ContinualState& state, const std::string& dir) {
  for (const EncoderParams& p : state.snapshots) save_snapshot(p, snapshot_path(dir, static_cast<int>(p.version)));
  for (const auto& [task, index] : state.indexes) save_index(index, index_path(dir, task));
  save_ledger(state.ledger, ledger_path(dir));
}

int stored_checkpoints(const std::string& dir) {
  int t = 0;
  while (fs::exists(snapshot_path(dir, t + 1))) ++t;
  return t;
}

ContinualState load_checkpoint(const std::string& dir, int checkpoint) {
  if (checkpoint < 1) throw Error(ErrorCode::kInvalidArgument, "checkpoint must be >= 1");
  ContinualState s;
  s.params = load_snapshot(snapshot_path(dir, checkpoint));
  s.previous = load_snapshot(snapshot_path(dir, checkpoint - 1));
  for (int z = 1; z <= checkpoint; ++z) {
    const std::string path = index_path(dir, z);
    if (!fs::exists(path)) throw Error(ErrorCode::kMissingIndex, "missing " + path);
    s.indexes[z] = load_index(path);
  }
  s.ledger = load_ledger(ledger_path(dir));
  s.last_task = checkpoint;
  return s;
}

std::string find_run_root(const std::string& artifact_dir) {
  const fs::path dir(artifact_dir);
  if (fs::exists(dir / "config.json")) return dir.string();
  if (fs::exists(dir.parent_path() / "config.json")) return dir.parent_path().string();
  throw Error(ErrorCode::kIo, "no config.json in " + artifact_dir + " or its parent");
}

RunResult evaluate_stored(const std::string& artifact_dir, const std::vector<TaskDataset>& datasets,
                          const Method& method, size_t k, int threads) {
  const int checkpoints = stored_checkpoints(artifact_dir);
  if (checkpoints != static_cast<int>(datasets.size())) {
    throw Error(ErrorCode::kDataMismatch, "stored checkpoints do not match the dataset count");
  }
  RunResult r;
  r.method = method.name();
  for (const TaskDataset& d : datasets) r.task_ids.push_back(d.task_id);
  for (Metric m : {Metric::kNdcg, Metric::kRecall, Metric::kMap}) {
    r.scores[m].assign(datasets.size(), std::vector<double>(datasets.size(), 0.0));
  }
  for (int t = 1; t <= checkpoints; ++t) {
    const ContinualState state = load_checkpoint(artifact_dir, t);
    for (size_t col = 0; col < datasets.size(); ++col) {
      const RetrievalRun run = retrieve_eval(state, datasets[col], method.strategy, k, threads);
      const MetricReport rep = compute_metrics(run.as_runs(), datasets[col].qrels, k);
      r.scores[Metric::kNdcg][static_cast<size_t>(t - 1)][col] = rep.ndcg;
      r.scores[Metric::kRecall][static_cast<size_t>(t - 1)][col] = rep.recall;
      r.scores[Metric::kMap][static_cast<size_t>(t - 1)][col] = rep.map;
    }
  }
  return r;
}

BenchReport run_bench(const Config& config, const std::string& run_dir) {
  const std::vector<TaskDataset> datasets = load_datasets(config);
  write_datasets(datasets, run_dir);
  internal::write_text_file((fs::path(run_dir) / "config.json").string(), config_to_json(config));

  const std::vector<Strategy> strategies = {Strategy::kPlain, Strategy::kQdc, Strategy::kReindex};
  Trajectory ft = run_trajectory(datasets, false, strategies, config.train);
  save_state(ft.state, (fs::path(run_dir) / "ft").string());
  write_run_files((fs::path(run_dir) / "ft").string(), ft.results, datasets);
  const EncoderParams f0 = ft.state.snapshots.front();
  ft.state = ContinualState();

  Trajectory kd = run_trajectory(datasets, true, strategies, config.train);
  save_state(kd.state, (fs::path(run_dir) / "ft-kd").string());
  write_run_files((fs::path(run_dir) / "ft-kd").string(), kd.results, datasets);
  kd.state = ContinualState();

  BenchReport report;
  // Plain and QDC rows alternate; re-index rows come last.
  report.methods = {ft.results[0], ft.results[1], kd.results[0], kd.results[1], ft.results[2], kd.results[2]};

  const EncoderParams joint = joint_train(datasets, config.train);
  const std::string joint_dir = (fs::path(run_dir) / "joint").string();
  save_snapshot(joint, snapshot_path(joint_dir, static_cast<int>(joint.version)));
  for (const TaskDataset& d : datasets) {
    save_index(build_index(joint, d.corpus, static_cast<uint32_t>(d.task_id), config.train.threads),
               index_path(joint_dir, d.task_id));
  }
  report.joint = evaluate_single_model(datasets, joint, "Joint", config.train);
  report.zero_shot = evaluate_single_model(datasets, f0, "ZeroShot-f0", config.train);

  std::vector<RunResult> all = report.methods;
  all.push_back(report.joint);
  all.push_back(report.zero_shot);
  internal::write_text_file((fs::path(run_dir) / "metrics.csv").string(), metrics_csv(all));
  internal::write_text_file((fs::path(run_dir) / "comparison.csv").string(), comparison_csv(report.methods));
  internal::write_text_file((fs::path(run_dir) / "joint.csv").string(),
                            comparison_csv({report.joint, report.zero_shot}));

  const std::vector<std::string> names = task_names(datasets);
  std::vector<RunResult> table1 = {report.zero_shot, report.joint};
  table1.insert(table1.end(), report.methods.begin(), report.methods.end());
  std::ostringstream table;
  table << render_comparison(table1, Metric::kNdcg, names) << '\n';
  table << render_comparison(table1, Metric::kRecall, names) << '\n';
  table << render_comparison(table1, Metric::kMap, names) << '\n';
  table << "Old-task average nDCG x100 at the final checkpoint\n";
  for (const RunResult& r : report.methods) {
    table << "  " << r.method << ": " << format_score(r.old_task_average(Metric::kNdcg)) << '\n';
  }
  table << "\n* zero-shot cell, ~ old-task cell\n\n";
  for (const RunResult& r : report.methods) table << render_matrix(r, Metric::kNdcg, names) << '\n';
  report.table = table.str();
  internal::write_text_file((fs::path(run_dir) / "table.txt").string(), report.table);
  return report;
}

RunResult run_train(const Config& config, const std::string& run_dir) {
  const Method method = parse_method(config.method);
  const std::vector<TaskDataset> datasets = load_datasets(config);
  write_datasets(datasets, run_dir);
  internal::write_text_file((fs::path(run_dir) / "config.json").string(), config_to_json(config));
  Trajectory tr = run_trajectory(datasets, method.kd, {method.strategy}, config.train);
  save_state(tr.state, run_dir);
  write_run_files(run_dir, tr.results, datasets);
  return tr.results.front();
}

}  // namespace qdc
