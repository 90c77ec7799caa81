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

#include "qdc/pipeline.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <unordered_map>
#include <unordered_set>

#include "qdc/errors.h"
#include "qdc/random.h"

namespace qdc {
namespace {

constexpr Metric kAllMetrics[] = {Metric::kNdcg, Metric::kRecall, Metric::kMap};

std::vector<TokenFeatures> tokenize_all(const std::vector<std::string>& texts, uint32_t vocab) {
  std::vector<TokenFeatures> out;
  out.reserve(texts.size());
  for (const std::string& t : texts) out.push_back(tokenize(t, vocab));
  return out;
}

// Unit-norm f64 embedding regardless of output mode.
Vec unit_embedding(const EncoderParams& p, const TokenFeatures& f) {
  Vec e = encode(p, f);
  return p.mode == OutputMode::kLinear ? l2_normalize(e) : e;
}

std::vector<std::vector<size_t>> mine_indices(const EncoderParams& params,
                                              const std::vector<TrainPair>& pairs,
                                              const std::vector<DocRecord>& corpus,
                                              const std::vector<TokenFeatures>& doc_feats, size_t H) {
  std::vector<std::vector<size_t>> out(pairs.size());
  if (H == 0 || pairs.empty()) return out;
  std::unordered_map<std::string, size_t> doc_index;
  for (size_t i = 0; i < corpus.size(); ++i) doc_index.emplace(corpus[i].doc_id, i);
  std::unordered_map<std::string, std::vector<size_t>> positives;
  for (const TrainPair& p : pairs) {
    auto it = doc_index.find(p.doc_id);
    if (it == doc_index.end()) throw Error(ErrorCode::kDanglingReference, "train pair doc " + p.doc_id);
    positives[p.query].push_back(it->second);
  }
  std::vector<Vec> docs(corpus.size());
  for (size_t i = 0; i < corpus.size(); ++i) docs[i] = unit_embedding(params, doc_feats[i]);

  std::vector<double> scores(corpus.size());
  std::vector<size_t> cand;
  for (size_t p = 0; p < pairs.size(); ++p) {
    const Vec q = unit_embedding(params, tokenize(pairs[p].query, params.vocab_size));
    const std::vector<size_t>& excluded = positives[pairs[p].query];
    cand.clear();
    for (size_t i = 0; i < corpus.size(); ++i) {
      if (std::find(excluded.begin(), excluded.end(), i) != excluded.end()) continue;
      scores[i] = dot(q, docs[i]);
      cand.push_back(i);
    }
    const size_t take = std::min(H, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end(),
                      [&](size_t a, size_t b) {
                        if (scores[a] != scores[b]) return scores[a] > scores[b];
                        return corpus[a].doc_id < corpus[b].doc_id;
                      });
    out[p].assign(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take));
  }
  return out;
}

struct Example {
  TrainExample pair;
  std::vector<TokenFeatures> negatives;
};

std::vector<Example> build_examples(const EncoderParams& miner, const TaskDataset& data,
                                    size_t H, uint32_t vocab) {
  std::vector<std::string> texts;
  texts.reserve(data.corpus.size());
  for (const DocRecord& d : data.corpus) texts.push_back(doc_text(d));
  const std::vector<TokenFeatures> doc_feats = tokenize_all(texts, vocab);
  const auto negs = mine_indices(miner, data.train_pairs, data.corpus, doc_feats, H);

  std::unordered_map<std::string, size_t> doc_index;
  for (size_t i = 0; i < data.corpus.size(); ++i) doc_index.emplace(data.corpus[i].doc_id, i);
  std::vector<Example> out(data.train_pairs.size());
  for (size_t p = 0; p < data.train_pairs.size(); ++p) {
    out[p].pair.query = tokenize(data.train_pairs[p].query, vocab);
    out[p].pair.doc = doc_feats[doc_index.at(data.train_pairs[p].doc_id)];
    for (size_t i : negs[p]) out[p].negatives.push_back(doc_feats[i]);
  }
  return out;
}

// One pass of SGD over the examples in batch_order.
void run_epochs(EncoderParams& params, const EncoderParams* teacher, const std::vector<Example>& examples,
                const TrainConfig& config, int order_task_id) {
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<size_t> order = batch_order(config, order_task_id, epoch, examples.size());
    for (size_t start = 0; start < order.size(); start += config.batch_size) {
      const size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<TrainExample> batch;
      std::vector<std::vector<TokenFeatures>> negs;
      batch.reserve(end - start);
      negs.reserve(end - start);
      for (size_t i = start; i < end; ++i) {
        batch.push_back(examples[order[i]].pair);
        negs.push_back(examples[order[i]].negatives);
      }
      LossResult lc = contrastive_loss(params, batch, negs);
      double loss = lc.loss;
      if (teacher != nullptr) {
        const LossResult ld = distill_loss(params, *teacher, batch);
        loss += ld.loss;
        lc.grad.add(ld.grad);
      }
      if (!std::isfinite(loss)) throw Error(ErrorCode::kNonFinite, "training loss diverged");
      sgd_step(params, lc.grad, config.lr, config.weight_decay);
    }
  }
}

std::vector<TokenFeatures> drift_queries(const TaskDataset& data, const TrainConfig& config) {
  std::vector<size_t> keep(data.train_pairs.size());
  std::iota(keep.begin(), keep.end(), size_t{0});
  if (keep.size() > config.drift_query_cap) {
    Rng rng(derive_seed(config.seed, static_cast<uint64_t>(data.task_id), "drift-sample"));
    keep = rng.sample_without_replacement(keep.size(), config.drift_query_cap);
    std::sort(keep.begin(), keep.end());
  }
  std::vector<TokenFeatures> out;
  out.reserve(keep.size());
  for (size_t i : keep) out.push_back(tokenize(data.train_pairs[i].query, config.vocab_size));
  return out;
}

RunResult empty_result(const std::string& method, const std::vector<TaskDataset>& datasets,
                       size_t checkpoints) {
  RunResult r;
  r.method = method;
  for (const TaskDataset& d : datasets) r.task_ids.push_back(d.task_id);
  for (Metric m : kAllMetrics) {
    r.scores[m] = std::vector<std::vector<double>>(
        checkpoints, std::vector<double>(datasets.size(), std::numeric_limits<double>::quiet_NaN()));
  }
  return r;
}

void store_metrics(RunResult& r, size_t row, size_t col, const MetricReport& rep) {
  r.scores[Metric::kNdcg][row][col] = rep.ndcg;
  r.scores[Metric::kRecall][row][col] = rep.recall;
  r.scores[Metric::kMap][row][col] = rep.map;
}

// Every requested strategy on one (checkpoint, task) cell, sharing encodes.
std::vector<RetrievalRun> evaluate_cell(const ContinualState& state, const TaskDataset& data,
                                        const std::vector<Strategy>& strategies, size_t k, int threads) {
  const int t = state.last_task;
  const int t_prime = data.task_id;
  if (t < 1) throw Error(ErrorCode::kMissingIndex, "no task has been trained yet");

  std::vector<Vec> q_t(data.queries_test.size());
  parallel_for(q_t.size(), threads, [&](size_t i) {
    q_t[i] = encode(state.params, tokenize(data.queries_test[i].text, state.params.vocab_size));
  });

  std::optional<CorpusIndex> fresh;
  auto fresh_index = [&]() -> const CorpusIndex& {
    if (!fresh) fresh = build_index(state.params, data.corpus, static_cast<uint32_t>(t_prime), threads);
    return *fresh;
  };

  std::vector<RetrievalRun> out;
  std::optional<std::vector<RankedList>> shared;
  for (Strategy s : strategies) {
    RetrievalRun run;
    run.evaluated_task = t_prime;
    run.checkpoint = t;
    for (const TestQuery& q : data.queries_test) run.query_ids.push_back(q.query_id);

    if (t_prime >= t) {
      // No drift to compensate: own task, or zero-shot on a fresh index.
      if (!shared) {
        const CorpusIndex* index = nullptr;
        if (t_prime == t) {
          auto it = state.indexes.find(t);
          if (it == state.indexes.end()) throw Error(ErrorCode::kMissingIndex, "no index for current task");
          index = &it->second;
        } else {
          index = &fresh_index();
        }
        shared = search_batch(*index, q_t, k, threads);
      }
      run.lists = *shared;
    } else if (s == Strategy::kReindex) {
      run.lists = search_batch(fresh_index(), q_t, k, threads);
    } else {
      auto it = state.indexes.find(t_prime);
      if (it == state.indexes.end()) {
        throw Error(ErrorCode::kMissingIndex, "no index for task " + std::to_string(t_prime));
      }
      std::vector<Vec> queries(q_t.size());
      for (size_t i = 0; i < q_t.size(); ++i) queries[i] = strategy_query(state, t_prime, s, q_t[i]);
      run.lists = search_batch(it->second, queries, k, threads);
    }
    out.push_back(std::move(run));
  }
  return out;
}

bool all_single(const DriftLedger& ledger, int t_prime, int t) {
  for (int j = t_prime; j < t; ++j) {
    const DriftRecord* r = ledger.find(j);
    if (r != nullptr && r->kind != DriftKind::kSingle) return false;
  }
  return true;
}

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::kInvalidArgument, why); };
  if (vocab_size == 0 || dim == 0) fail("vocab_size and dim must be positive");
  if (!(tau > 0.0)) fail("tau must be positive");
  if (!(lr >= 0.0) || !(weight_decay >= 0.0)) fail("lr and weight_decay must be non-negative");
  if (batch_size == 0) fail("batch_size must be positive");
  if (epochs < 1) fail("epochs must be >= 1");
  if (drift_query_cap == 0) fail("drift_query_cap must be positive");
  if (k == 0) fail("k must be positive");
  if (multi_k == 0) fail("multi_k must be >= 1");
}

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kPlain: return "plain";
    case Strategy::kQdc: return "qdc";
    case Strategy::kReindex: return "reindex";
  }
  return "?";
}

Strategy parse_strategy(const std::string& name) {
  if (name == "plain") return Strategy::kPlain;
  if (name == "qdc") return Strategy::kQdc;
  if (name == "reindex") return Strategy::kReindex;
  throw Error(ErrorCode::kInvalidArgument, "unknown strategy " + name);
}

std::string Method::name() const {
  std::string n = kd ? "FT+KD" : "FT";
  if (strategy == Strategy::kQdc) n += "+QDC";
  if (strategy == Strategy::kReindex) n += "+REINDEX";
  return n;
}

Method parse_method(const std::string& name) {
  for (const Method& m : all_methods()) {
    if (m.name() == name) return m;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown method " + name);
}

std::vector<Method> all_methods() {
  return {{false, Strategy::kPlain}, {false, Strategy::kQdc}, {true, Strategy::kPlain},
          {true, Strategy::kQdc},    {false, Strategy::kReindex}, {true, Strategy::kReindex}};
}

ContinualState init_state(const TrainConfig& config, bool kd) {
  config.validate();
  ContinualState s;
  s.params = EncoderParams::random(config.vocab_size, config.dim, config.tau,
                                   derive_seed(config.seed, 0, "init"), config.init_scale);
  s.params.version = 0;
  s.previous = s.params;
  s.snapshots.push_back(s.params);
  s.ledger = DriftLedger(config.dim);
  s.kd = kd;
  return s;
}

std::vector<size_t> batch_order(const TrainConfig& config, int task_id, int epoch, size_t n) {
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(derive_seed(config.seed, static_cast<uint64_t>(task_id),
                      "shuffle-" + std::to_string(epoch)));
  rng.shuffle(order);
  return order;
}

std::vector<std::vector<std::string>> mine_hard_negatives(const EncoderParams& params,
                                                          const std::vector<TrainPair>& pairs,
                                                          const std::vector<DocRecord>& corpus,
                                                          size_t H) {
  std::vector<std::string> texts;
  for (const DocRecord& d : corpus) texts.push_back(doc_text(d));
  const auto idx = mine_indices(params, pairs, corpus, tokenize_all(texts, params.vocab_size), H);
  std::vector<std::vector<std::string>> out(idx.size());
  for (size_t p = 0; p < idx.size(); ++p) {
    for (size_t i : idx[p]) out[p].push_back(corpus[i].doc_id);
  }
  return out;
}

void train_task(ContinualState& state, const TaskDataset& data, const TrainConfig& config) {
  config.validate();
  if (data.task_id != state.last_task + 1) {
    throw Error(ErrorCode::kDataMismatch, "expected task " + std::to_string(state.last_task + 1) +
                                              ", got " + std::to_string(data.task_id));
  }
  data.validate();
  if (data.train_pairs.empty()) throw Error(ErrorCode::kDataMismatch, "task has no train pairs");
  const int t = data.task_id;
  const EncoderParams old = state.params;
  const std::vector<Example> examples = build_examples(old, data, config.hard_negatives, config.vocab_size);

  EncoderParams next = old;
  const bool distill = state.kd && state.last_task >= 1;
  run_epochs(next, distill ? &old : nullptr, examples, config, t);
  next.version = static_cast<uint32_t>(t);

  const std::vector<TokenFeatures> queries = drift_queries(data, config);
  if (state.last_task >= 1) {
    const DriftVector delta = estimate_drift(next, old, queries);
    DriftRecord rec;
    if (config.multi_records()) {
      rec.kind = DriftKind::kMulti;
      rec.multi = estimate_multi_drift(next, old, queries, std::min(config.multi_k, queries.size()),
                                       derive_seed(config.seed, static_cast<uint64_t>(t), "kmeans"));
    } else {
      rec.kind = DriftKind::kSingle;
      rec.single = delta;
    }
    state.ledger.append(std::move(rec));
    update_task_centroids(state.ledger, delta);
  }
  std::vector<Vec> embedded;
  embedded.reserve(queries.size());
  for (const TokenFeatures& q : queries) embedded.push_back(encode(next, q));
  set_task_centroid(state.ledger, t, mean_embedding(embedded));

  state.indexes[t] = build_index(next, data.corpus, static_cast<uint32_t>(t), config.threads);
  state.previous = old;
  state.params = std::move(next);
  state.snapshots.push_back(state.params);
  state.last_task = t;
}

QueryRuns RetrievalRun::as_runs() const {
  QueryRuns runs;
  for (size_t i = 0; i < query_ids.size(); ++i) runs[query_ids[i]] = lists[i];
  return runs;
}

Vec strategy_query(const ContinualState& state, int t_prime, Strategy strategy, const Vec& q_t) {
  const int t = state.last_task;
  if (strategy != Strategy::kQdc || t_prime >= t) return q_t;
  if (all_single(state.ledger, t_prime, t)) {
    return compensate_query(q_t, accumulate_drift(state.ledger, t_prime, t));
  }
  return compensate_across(q_t, state.ledger, t_prime, t);
}

RetrievalRun retrieve_eval(const ContinualState& state, const TaskDataset& data, Strategy strategy,
                           size_t k, int threads) {
  if (data.task_id < 1) throw Error(ErrorCode::kInvalidArgument, "task ids start at 1");
  return evaluate_cell(state, data, {strategy}, k, threads).front();
}

Trajectory run_trajectory(const std::vector<TaskDataset>& datasets, bool kd,
                          const std::vector<Strategy>& strategies, const TrainConfig& config,
                          const TaskObserver& observer) {
  if (datasets.empty()) throw Error(ErrorCode::kDataMismatch, "no datasets");
  Trajectory out;
  out.state = init_state(config, kd);
  for (Strategy s : strategies) {
    out.results.push_back(empty_result(Method{kd, s}.name(), datasets, datasets.size()));
  }
  for (size_t row = 0; row < datasets.size(); ++row) {
    train_task(out.state, datasets[row], config);
    for (size_t col = 0; col < datasets.size(); ++col) {
      const std::vector<RetrievalRun> runs =
          evaluate_cell(out.state, datasets[col], strategies, config.k, config.threads);
      for (size_t s = 0; s < strategies.size(); ++s) {
        store_metrics(out.results[s], row, col,
                      compute_metrics(runs[s].as_runs(), datasets[col].qrels, config.k));
      }
    }
    if (observer) observer(out.state, datasets[row].task_id);
  }
  return out;
}

RunResult run_continual(const std::vector<TaskDataset>& datasets, const Method& method,
                        const TrainConfig& config) {
  return run_trajectory(datasets, method.kd, {method.strategy}, config).results.front();
}

EncoderParams joint_train(const std::vector<TaskDataset>& datasets, const TrainConfig& config) {
  config.validate();
  if (datasets.empty()) throw Error(ErrorCode::kDataMismatch, "no datasets");
  std::vector<const TaskDataset*> sorted;
  for (const TaskDataset& d : datasets) sorted.push_back(&d);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const TaskDataset* a, const TaskDataset* b) { return a->task_id < b->task_id; });

  EncoderParams params = init_state(config, false).params;
  std::vector<Example> examples;
  for (const TaskDataset* d : sorted) {
    d->validate();
    std::vector<Example> part = build_examples(params, *d, config.hard_negatives, config.vocab_size);
    examples.insert(examples.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  if (examples.empty()) throw Error(ErrorCode::kDataMismatch, "no train pairs");
  run_epochs(params, nullptr, examples, config, sorted.front()->task_id);
  params.version = static_cast<uint32_t>(sorted.back()->task_id);
  return params;
}

RunResult evaluate_single_model(const std::vector<TaskDataset>& datasets, const EncoderParams& params,
                                const std::string& method, const TrainConfig& config) {
  RunResult r = empty_result(method, datasets, 1);
  r.checkpoint_ids = {static_cast<int>(params.version)};
  for (size_t col = 0; col < datasets.size(); ++col) {
    const TaskDataset& d = datasets[col];
    const CorpusIndex index = build_index(params, d.corpus, static_cast<uint32_t>(d.task_id), config.threads);
    std::vector<Vec> queries;
    for (const TestQuery& q : d.queries_test) queries.push_back(encode(params, tokenize(q.text, params.vocab_size)));
    RetrievalRun run;
    for (const TestQuery& q : d.queries_test) run.query_ids.push_back(q.query_id);
    run.lists = search_batch(index, queries, config.k, config.threads);
    store_metrics(r, 0, col, compute_metrics(run.as_runs(), d.qrels, config.k));
  }
  return r;
}

}  // namespace qdc
