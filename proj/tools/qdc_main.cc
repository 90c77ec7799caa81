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

// Command-line entry point: gen-data, train, bench, retrieve, eval,
// drift-report, grad-check.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "qdc/bench.h"
#include "qdc/config.h"
#include "qdc/datagen.h"
#include "qdc/encoder.h"
#include "qdc/errors.h"
#include "qdc/eval.h"
#include "qdc/pipeline.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct CommonFlags {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<std::string> method;
  std::optional<size_t> k;
  std::optional<size_t> multi_k;
  std::string out;
  std::string run_id;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_method = true) {
  cmd->add_option("--config", f.config_path, "JSON config file");
  cmd->add_option("--seed", f.seed, "Root seed (overrides config)");
  if (with_method) cmd->add_option("--method", f.method, "FT, FT+KD, FT+QDC, FT+KD+QDC, FT+REINDEX, FT+KD+REINDEX");
  cmd->add_option("--k", f.k, "Retrieval depth");
  cmd->add_option("--multi-k", f.multi_k, "Drift vectors per transition");
  cmd->add_option("--out", f.out, "Output root (runs go to <out>/<run_id>)");
  cmd->add_option("--run-id", f.run_id, "Run directory name under --out");
}

int env_threads() {
  const char* v = std::getenv("QDC_THREADS");
  if (v == nullptr || *v == '\0') return 1;
  const int n = std::atoi(v);
  return n > 0 ? n : 1;
}

qdc::Config resolve(const CommonFlags& f) {
  qdc::Config c = f.config_path.empty() ? qdc::Config() : qdc::load_config(f.config_path);
  if (f.seed) c.seed = *f.seed;
  if (f.method) {
    qdc::parse_method(*f.method);
    c.method = *f.method;
  }
  if (f.k) c.train.k = *f.k;
  if (f.multi_k) c.train.multi_k = *f.multi_k;
  if (!f.out.empty()) c.out_dir = f.out;
  if (!f.run_id.empty()) c.run_id = f.run_id;
  c.train.threads = env_threads();
  c.sync_seed();
  c.train.validate();
  return c;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continual dense retrieval with query drift compensation"};
  app.require_subcommand(1);

  CommonFlags gen_f, train_f, bench_f;
  CLI::App* gen = app.add_subcommand("gen-data", "Write the synthetic task stream in BEIR layout");
  add_common(gen, gen_f, false);
  CLI::App* train = app.add_subcommand("train", "Run one method and persist its artifacts");
  add_common(train, train_f);
  CLI::App* bench = app.add_subcommand("bench", "Run all six methods plus joint training");
  add_common(bench, bench_f, false);

  std::string run_dir, query, strategy_name, method_name, csv_path;
  int task = 0, checkpoint = 0, from = 0, to = 0;
  size_t k = 10;
  CLI::App* retrieve = app.add_subcommand("retrieve", "Ad-hoc query against a stored run");
  retrieve->add_option("--run", run_dir, "Artifact directory (snapshots/, indexes/, ledger.json)")->required();
  retrieve->add_option("--task", task, "Task whose corpus is searched")->required();
  retrieve->add_option("--query", query, "Query text")->required();
  retrieve->add_option("--strategy", strategy_name, "plain, qdc or reindex");
  retrieve->add_option("--method", method_name, "Method name; its strategy is used");
  retrieve->add_option("--checkpoint", checkpoint, "Model checkpoint (default: last)");
  retrieve->add_option("--k", k, "Retrieval depth");

  size_t eval_k = 10;
  CLI::App* eval = app.add_subcommand("eval", "Recompute the metric matrix from stored artifacts");
  eval->add_option("--run", run_dir, "Artifact directory")->required();
  eval->add_option("--method", method_name, "Method to evaluate")->required();
  eval->add_option("--k", eval_k, "Retrieval depth");
  eval->add_option("--csv", csv_path, "Also write metrics CSV here");

  CLI::App* drift = app.add_subcommand("drift-report", "Drift by text length between two checkpoints");
  drift->add_option("--run", run_dir, "Artifact directory")->required();
  drift->add_option("--from", from, "Older checkpoint")->required();
  drift->add_option("--to", to, "Newer checkpoint")->required();
  drift->add_option("--task", task, "Task whose texts are measured (default: --to)");
  drift->add_option("--csv", csv_path, "Also write the CSV here");

  uint64_t gc_seed = 0;
  int gc_count = 10;
  CLI::App* gc = app.add_subcommand("grad-check", "Finite-difference check of both losses");
  gc->add_option("--seed", gc_seed, "First seed");
  gc->add_option("--count", gc_count, "Number of consecutive seeds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) {
      const qdc::Config c = resolve(gen_f);
      const std::vector<qdc::TaskDataset> data = qdc::generate_task_stream(c.stream);
      qdc::write_datasets(data, c.run_dir());
      std::cout << "wrote " << data.size() << " tasks to " << c.run_dir() << "/data\n";
      return kExitOk;
    }
    if (train->parsed()) {
      const qdc::Config c = resolve(train_f);
      const auto start = std::chrono::steady_clock::now();
      const qdc::RunResult r = qdc::run_train(c, c.run_dir());
      std::cout << qdc::render_matrix(r, qdc::Metric::kNdcg);
      std::fprintf(stdout, "artifacts in %s (%.1fs)\n", c.run_dir().c_str(), seconds_since(start));
      return kExitOk;
    }
    if (bench->parsed()) {
      const qdc::Config c = resolve(bench_f);
      const auto start = std::chrono::steady_clock::now();
      const qdc::BenchReport report = qdc::run_bench(c, c.run_dir());
      std::cout << report.table;
      std::fprintf(stdout, "artifacts in %s (%.1fs)\n", c.run_dir().c_str(), seconds_since(start));
      return kExitOk;
    }
    if (retrieve->parsed()) {
      qdc::Strategy strategy = qdc::Strategy::kQdc;
      if (!strategy_name.empty() && !method_name.empty()) {
        throw CLI::ValidationError("--strategy and --method are exclusive");
      }
      if (!strategy_name.empty()) strategy = qdc::parse_strategy(strategy_name);
      if (!method_name.empty()) strategy = qdc::parse_method(method_name).strategy;
      const int last = qdc::stored_checkpoints(run_dir);
      if (checkpoint == 0) checkpoint = last;
      if (checkpoint < 1 || checkpoint > last) {
        throw qdc::Error(qdc::ErrorCode::kInvalidArgument, "checkpoint out of range");
      }
      const qdc::ContinualState state = qdc::load_checkpoint(run_dir, checkpoint);
      const qdc::Vec q = qdc::encode(state.params, qdc::tokenize(query, state.params.vocab_size));
      qdc::RankedList list;
      if (task <= checkpoint && strategy != qdc::Strategy::kReindex) {
        const qdc::Vec mapped = qdc::strategy_query(state, task, strategy, q);
        list = qdc::search_topk(state.indexes.at(task), mapped, k);
      } else {
        const std::vector<qdc::TaskDataset> data = qdc::read_datasets(qdc::find_run_root(run_dir));
        if (task < 1 || task > static_cast<int>(data.size())) {
          throw qdc::Error(qdc::ErrorCode::kInvalidArgument, "task out of range");
        }
        const qdc::CorpusIndex index =
            qdc::build_index(state.params, data[static_cast<size_t>(task - 1)].corpus, static_cast<uint32_t>(task),
                             env_threads());
        list = qdc::search_topk(index, q, k);
      }
      std::cout << "rank\tdoc_id\tscore\n";
      for (size_t i = 0; i < list.size(); ++i) {
        std::fprintf(stdout, "%zu\t%s\t%.6f\n", i + 1, list[i].doc_id.c_str(), list[i].score);
      }
      return kExitOk;
    }
    if (eval->parsed()) {
      const qdc::Method method = qdc::parse_method(method_name);
      const std::vector<qdc::TaskDataset> data = qdc::read_datasets(qdc::find_run_root(run_dir));
      const qdc::RunResult r = qdc::evaluate_stored(run_dir, data, method, eval_k, env_threads());
      const std::string csv = qdc::metrics_csv({r});
      if (!csv_path.empty()) {
        std::FILE* f = std::fopen(csv_path.c_str(), "wb");
        if (f == nullptr) throw qdc::Error(qdc::ErrorCode::kIo, "cannot write " + csv_path);
        std::fwrite(csv.data(), 1, csv.size(), f);
        std::fclose(f);
      }
      std::cout << csv << '\n' << qdc::render_matrix(r, qdc::Metric::kNdcg);
      return kExitOk;
    }
    if (drift->parsed()) {
      if (task == 0) task = to;
      const qdc::EncoderParams newer = qdc::load_snapshot(qdc::snapshot_path(run_dir, to));
      const qdc::EncoderParams older = qdc::load_snapshot(qdc::snapshot_path(run_dir, from));
      const std::vector<qdc::TaskDataset> data = qdc::read_datasets(qdc::find_run_root(run_dir));
      if (task < 1 || task > static_cast<int>(data.size())) {
        throw qdc::Error(qdc::ErrorCode::kInvalidArgument, "task out of range");
      }
      const qdc::TaskDataset& d = data[static_cast<size_t>(task - 1)];
      std::vector<std::string> queries;
      for (const qdc::TrainPair& p : d.train_pairs) queries.push_back(p.query);
      for (const qdc::TestQuery& q : d.queries_test) queries.push_back(q.text);
      const std::string csv = qdc::drift_report_csv(qdc::drift_report(newer, older, queries, d.corpus));
      if (!csv_path.empty()) {
        std::FILE* f = std::fopen(csv_path.c_str(), "wb");
        if (f == nullptr) throw qdc::Error(qdc::ErrorCode::kIo, "cannot write " + csv_path);
        std::fwrite(csv.data(), 1, csv.size(), f);
        std::fclose(f);
      }
      std::cout << csv;
      return kExitOk;
    }
    if (gc->parsed()) {
      if (gc_count < 1) throw CLI::ValidationError("--count must be >= 1");
      double worst = 0.0;
      std::cout << "seed\tcontrastive\tdistill\n";
      for (int i = 0; i < gc_count; ++i) {
        const uint64_t s = gc_seed + static_cast<uint64_t>(i);
        const double c = qdc::grad_check(qdc::LossKind::kContrastive, s);
        const double d = qdc::grad_check(qdc::LossKind::kDistill, s);
        worst = std::max({worst, c, d});
        std::fprintf(stdout, "%llu\t%.3e\t%.3e\n", static_cast<unsigned long long>(s), c, d);
      }
      std::fprintf(stdout, "max relative error %.3e (limit 1e-4)\n", worst);
      return worst <= 1e-4 ? kExitOk : kExitRuntime;
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const qdc::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == qdc::ErrorCode::kInvalidArgument ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
