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

#include "qdc/config.h"

#include <filesystem>
#include <set>

#include "binary_io.h"
#include "json.hpp"
#include "qdc/errors.h"

namespace qdc {
namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw Error(ErrorCode::kParseError, where + ": expected object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) throw Error(ErrorCode::kParseError, where + ": unknown key " + it.key());
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  auto it = obj.find(key);
  if (it != obj.end()) out = it->get<T>();
}

void read_range(const json& obj, const char* key, LengthRange& out) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  if (!it->is_array() || it->size() != 2) {
    throw Error(ErrorCode::kParseError, std::string(key) + ": expected [min, max]");
  }
  out.min = (*it)[0].get<int>();
  out.max = (*it)[1].get<int>();
}

}  // namespace

void Config::sync_seed() {
  stream.seed = seed;
  train.seed = seed;
}

std::string Config::run_dir() const { return (std::filesystem::path(out_dir) / run_id).string(); }

Config config_from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("config: ") + e.what());
  }
  Config c;
  try {
    reject_unknown(root, {"seed", "stream", "encoder", "train", "retrieval", "method", "datasets", "out_dir", "run_id"},
                   "config");
    read(root, "seed", c.seed);
    read(root, "method", c.method);
    read(root, "datasets", c.datasets);
    read(root, "out_dir", c.out_dir);
    read(root, "run_id", c.run_id);
    if (root.contains("stream")) {
      const json& s = root["stream"];
      reject_unknown(s,
                     {"num_tasks", "docs_per_task", "train_pairs_per_task", "test_queries_per_task",
                      "vocab_size", "vocab_overlap", "doc_length", "query_length", "synonyms",
                      "focus_concepts", "noise_vocab", "noise_fraction", "query_doc_word_prob", "num_styles",
                      "style_words", "style_fraction", "style_preference", "query_marker"},
                     "stream");
      read(s, "num_tasks", c.stream.num_tasks);
      read(s, "docs_per_task", c.stream.docs_per_task);
      read(s, "train_pairs_per_task", c.stream.train_pairs_per_task);
      read(s, "test_queries_per_task", c.stream.test_queries_per_task);
      read(s, "vocab_size", c.stream.vocab_size);
      read(s, "vocab_overlap", c.stream.vocab_overlap);
      read_range(s, "doc_length", c.stream.doc_length);
      read_range(s, "query_length", c.stream.query_length);
      read(s, "synonyms", c.stream.synonyms);
      read(s, "focus_concepts", c.stream.focus_concepts);
      read(s, "noise_vocab", c.stream.noise_vocab);
      read(s, "noise_fraction", c.stream.noise_fraction);
      read(s, "query_doc_word_prob", c.stream.query_doc_word_prob);
      read(s, "num_styles", c.stream.num_styles);
      read(s, "style_words", c.stream.style_words);
      read(s, "style_fraction", c.stream.style_fraction);
      read(s, "style_preference", c.stream.style_preference);
      read(s, "query_marker", c.stream.query_marker);
    }
    if (root.contains("encoder")) {
      const json& e = root["encoder"];
      reject_unknown(e, {"vocab_size", "dim", "tau", "init_scale"}, "encoder");
      read(e, "vocab_size", c.train.vocab_size);
      read(e, "dim", c.train.dim);
      read(e, "tau", c.train.tau);
      read(e, "init_scale", c.train.init_scale);
    }
    if (root.contains("train")) {
      const json& t = root["train"];
      reject_unknown(t, {"lr", "weight_decay", "batch_size", "hard_negatives", "epochs", "drift_query_cap", "threads"},
                     "train");
      read(t, "lr", c.train.lr);
      read(t, "weight_decay", c.train.weight_decay);
      read(t, "batch_size", c.train.batch_size);
      read(t, "hard_negatives", c.train.hard_negatives);
      read(t, "epochs", c.train.epochs);
      read(t, "drift_query_cap", c.train.drift_query_cap);
      read(t, "threads", c.train.threads);
    }
    if (root.contains("retrieval")) {
      const json& r = root["retrieval"];
      reject_unknown(r, {"k", "multi_k", "force_multi"}, "retrieval");
      read(r, "k", c.train.k);
      read(r, "multi_k", c.train.multi_k);
      read(r, "force_multi", c.train.force_multi);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("config: ") + e.what());
  }
  c.sync_seed();
  return c;
}

Config load_config(const std::string& path) { return config_from_json(internal::read_text_file(path)); }

std::string config_to_json(const Config& c) {
  json root;
  root["seed"] = c.seed;
  root["method"] = c.method;
  root["datasets"] = c.datasets;
  root["out_dir"] = c.out_dir;
  root["run_id"] = c.run_id;
  const StreamSpec& s = c.stream;
  root["stream"] = {{"num_tasks", s.num_tasks},
                    {"docs_per_task", s.docs_per_task},
                    {"train_pairs_per_task", s.train_pairs_per_task},
                    {"test_queries_per_task", s.test_queries_per_task},
                    {"vocab_size", s.vocab_size},
                    {"vocab_overlap", s.vocab_overlap},
                    {"doc_length", {s.doc_length.min, s.doc_length.max}},
                    {"query_length", {s.query_length.min, s.query_length.max}},
                    {"synonyms", s.synonyms},
                    {"focus_concepts", s.focus_concepts},
                    {"noise_vocab", s.noise_vocab},
                    {"noise_fraction", s.noise_fraction},
                    {"query_doc_word_prob", s.query_doc_word_prob},
                    {"num_styles", s.num_styles},
                    {"style_words", s.style_words},
                    {"style_fraction", s.style_fraction},
                    {"style_preference", s.style_preference},
                    {"query_marker", s.query_marker}};
  const TrainConfig& t = c.train;
  root["encoder"] = {{"vocab_size", t.vocab_size}, {"dim", t.dim}, {"tau", t.tau}, {"init_scale", t.init_scale}};
  root["train"] = {{"lr", t.lr},
                   {"weight_decay", t.weight_decay},
                   {"batch_size", t.batch_size},
                   {"hard_negatives", t.hard_negatives},
                   {"epochs", t.epochs},
                   {"drift_query_cap", t.drift_query_cap},
                   {"threads", t.threads}};
  root["retrieval"] = {{"k", t.k}, {"multi_k", t.multi_k}, {"force_multi", t.force_multi}};
  return root.dump(2) + "\n";
}

}  // namespace qdc
