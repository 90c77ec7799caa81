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

#include "qdc/datagen.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include "binary_io.h"
#include "json.hpp"
#include "qdc/errors.h"
#include "qdc/random.h"

namespace qdc {
namespace {

using nlohmann::json;

constexpr char kConsonants[] = "bdfghjklmnprstvz";
constexpr char kVowels[] = "aeiou";
constexpr int kSyllables = 16 * 5;

// Pronounceable, collision-free spelling of a word id.
std::string spell(int id) {
  std::string out;
  int x = id;
  for (int i = 0; i < 3 || x > 0; ++i) {
    const int s = x % kSyllables;
    x /= kSyllables;
    out.push_back(kConsonants[s / 5]);
    out.push_back(kVowels[s % 5]);
  }
  return out;
}

struct Concept {
  std::vector<int> doc_words;
  std::vector<int> query_words;
};

struct TaskVocab {
  std::vector<Concept> concepts;
  std::vector<int> noise;
};

struct StreamVocab {
  std::vector<std::vector<int>> styles;
  std::vector<TaskVocab> tasks;
};

StreamVocab plan_vocabulary(const StreamSpec& spec) {
  Rng rng(derive_seed(spec.seed, 0, "datagen-vocab"));
  int next_id = 0;
  auto fresh = [&](int n) {
    std::vector<int> ids(static_cast<size_t>(n));
    for (int& id : ids) id = next_id++;
    return ids;
  };
  StreamVocab v;
  for (int s = 0; s < spec.num_styles; ++s) v.styles.push_back(fresh(spec.style_words));

  const size_t nc = static_cast<size_t>(spec.vocab_size);
  const size_t nn = static_cast<size_t>(spec.noise_vocab);
  for (int t = 0; t < spec.num_tasks; ++t) {
    TaskVocab tv;
    size_t shared_c = 0;
    size_t shared_n = 0;
    if (t > 0) {
      const TaskVocab& prev = v.tasks.back();
      shared_c = static_cast<size_t>(std::lround(spec.vocab_overlap * static_cast<double>(nc)));
      shared_n = static_cast<size_t>(std::lround(spec.vocab_overlap * static_cast<double>(nn)));
      for (size_t i : rng.sample_without_replacement(nc, shared_c)) tv.concepts.push_back(prev.concepts[i]);
      for (size_t i : rng.sample_without_replacement(nn, shared_n)) tv.noise.push_back(prev.noise[i]);
    }
    for (size_t i = shared_c; i < nc; ++i) {
      Concept c;
      c.doc_words = fresh(spec.synonyms);
      c.query_words = fresh(spec.synonyms);
      tv.concepts.push_back(std::move(c));
    }
    const std::vector<int> extra = fresh(static_cast<int>(nn - shared_n));
    tv.noise.insert(tv.noise.end(), extra.begin(), extra.end());
    v.tasks.push_back(std::move(tv));
  }
  return v;
}

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (const std::string& w : words) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

std::string padded(int value, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%0*d", width, value);
  return buf;
}

struct QrelLine {
  std::string query_id;
  std::string doc_id;
  int grade = 0;
};

std::vector<QrelLine> parse_qrel_lines(const std::string& text) {
  std::vector<QrelLine> out;
  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cols;
    size_t start = 0;
    while (true) {
      const size_t tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (cols.size() != 3) {
      throw Error(ErrorCode::kParseError, "qrels line " + std::to_string(line_no) + ": expected 3 columns");
    }
    int grade = 0;
    try {
      size_t used = 0;
      grade = std::stoi(cols[2], &used);
      if (used != cols[2].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      if (line_no == 1) continue;  // header row
      throw Error(ErrorCode::kParseError, "qrels line " + std::to_string(line_no) + ": bad score");
    }
    if (grade < 0) throw Error(ErrorCode::kParseError, "qrels: negative grade");
    out.push_back(QrelLine{cols[0], cols[1], grade});
  }
  return out;
}

std::vector<json> parse_jsonl(const std::string& path) {
  const std::string text = internal::read_text_file(path);
  std::vector<json> out;
  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParseError, path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!out.back().is_object()) {
      throw Error(ErrorCode::kParseError, path + ":" + std::to_string(line_no) + ": expected object");
    }
  }
  return out;
}

std::string string_field(const json& obj, const char* key, bool required, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) {
    if (required) throw Error(ErrorCode::kParseError, where + ": missing field " + key);
    return "";
  }
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  throw Error(ErrorCode::kParseError, where + ": field " + key + " is not a string");
}

}  // namespace

void StreamSpec::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::kInvalidSpec, why); };
  if (num_tasks < 1 || docs_per_task < 1 || train_pairs_per_task < 1 || test_queries_per_task < 1 ||
      vocab_size < 1) {
    fail("all counts must be >= 1");
  }
  if (!(vocab_overlap >= 0.0 && vocab_overlap <= 1.0)) fail("vocab_overlap must be in [0, 1]");
  if (doc_length.min < 1 || doc_length.max < doc_length.min) fail("bad doc_length range");
  if (query_length.min < 1 || query_length.max < query_length.min) fail("bad query_length range");
  if (synonyms < 1 || focus_concepts < 1 || focus_concepts > vocab_size) fail("bad concept settings");
  if (num_styles < 1 || style_words < 1) fail("need at least one style word");
  if (noise_vocab < 1) fail("noise_vocab must be >= 1");
  for (double f : {noise_fraction, style_fraction, query_doc_word_prob, style_preference}) {
    if (!(f >= 0.0 && f <= 1.0)) fail("fractions must be in [0, 1]");
  }
  if (noise_fraction + style_fraction >= 1.0) fail("noise + style fraction leaves no topic words");
  if (train_pairs_per_task + test_queries_per_task > docs_per_task) {
    fail("need at least one document per train pair and test query");
  }
  if (query_marker.empty()) fail("query_marker must be non-empty");
}

std::vector<TaskDataset> generate_task_stream(const StreamSpec& spec) {
  spec.validate();
  const StreamVocab vocab = plan_vocabulary(spec);
  std::vector<TaskDataset> out;
  const int doc_width = static_cast<int>(std::to_string(spec.docs_per_task - 1).size());

  for (int t = 0; t < spec.num_tasks; ++t) {
    const int task_id = t + 1;
    const TaskVocab& tv = vocab.tasks[static_cast<size_t>(t)];
    Rng rng(derive_seed(spec.seed, static_cast<uint64_t>(task_id), "datagen-task"));
    TaskDataset ds;
    ds.task_id = task_id;
    ds.name = "synthetic-t" + std::to_string(task_id);

    const size_t nd = static_cast<size_t>(spec.docs_per_task);
    std::vector<std::vector<size_t>> focus(nd);
    std::vector<int> style(nd);
    for (size_t i = 0; i < nd; ++i) {
      const int len = static_cast<int>(rng.range(spec.doc_length.min, spec.doc_length.max));
      focus[i] = rng.sample_without_replacement(tv.concepts.size(), static_cast<size_t>(spec.focus_concepts));
      style[i] = static_cast<int>(rng.below(static_cast<uint64_t>(spec.num_styles)));
      std::vector<std::string> words;
      words.reserve(static_cast<size_t>(len));
      for (int w = 0; w < len; ++w) {
        const double r = rng.uniform();
        int id;
        if (r < spec.noise_fraction) {
          id = tv.noise[rng.below(tv.noise.size())];
        } else if (r < spec.noise_fraction + spec.style_fraction) {
          const auto& sw = vocab.styles[static_cast<size_t>(style[i])];
          id = sw[rng.below(sw.size())];
        } else {
          const Concept& c = tv.concepts[focus[i][rng.below(focus[i].size())]];
          id = c.doc_words[rng.below(c.doc_words.size())];
        }
        words.push_back(spell(id));
      }
      ds.corpus.push_back(DocRecord{"t" + std::to_string(task_id) + "-d" + padded(static_cast<int>(i), doc_width),
                                    "", join_words(words)});
    }

    auto make_query = [&](size_t doc) {
      const int len = static_cast<int>(rng.range(spec.query_length.min, spec.query_length.max));
      std::vector<std::string> words{spec.query_marker};
      for (int w = 0; w < len; ++w) {
        const Concept& c = tv.concepts[focus[doc][rng.below(focus[doc].size())]];
        const bool doc_side = rng.uniform() < spec.query_doc_word_prob;
        const std::vector<int>& pool = doc_side ? c.doc_words : c.query_words;
        words.push_back(spell(pool[rng.below(pool.size())]));
      }
      return join_words(words);
    };

    const int preferred = t % spec.num_styles;
    size_t n_pref = 0;
    for (int s : style) n_pref += (s == preferred);
    std::vector<double> weights(nd);
    for (size_t i = 0; i < nd; ++i) {
      if (n_pref == 0 || n_pref == nd) {
        weights[i] = 1.0;
      } else if (style[i] == preferred) {
        weights[i] = spec.style_preference / static_cast<double>(n_pref);
      } else {
        weights[i] = (1.0 - spec.style_preference) / static_cast<double>(nd - n_pref);
      }
    }
    const size_t total = static_cast<size_t>(spec.train_pairs_per_task + spec.test_queries_per_task);
    std::vector<size_t> picked;
    for (size_t j = 0; j < total; ++j) {
      bool any = false;
      for (double w : weights) any = any || w > 0.0;
      // A zero-mass preference can exhaust one side; fall back to uniform.
      if (!any) {
        for (size_t i = 0; i < nd; ++i) {
          if (std::find(picked.begin(), picked.end(), i) == picked.end()) weights[i] = 1.0;
        }
      }
      const size_t i = rng.weighted_index(weights);
      picked.push_back(i);
      weights[i] = 0.0;
    }
    for (size_t j = 0; j < total; ++j) {
      const size_t doc = picked[j];
      const std::string text = make_query(doc);
      if (j < static_cast<size_t>(spec.train_pairs_per_task)) {
        ds.train_pairs.push_back(TrainPair{text, ds.corpus[doc].doc_id});
      } else {
        const std::string qid =
            "t" + std::to_string(task_id) + "-q" + padded(static_cast<int>(j) - spec.train_pairs_per_task, 4);
        ds.queries_test.push_back(TestQuery{qid, text});
        ds.qrels[qid][ds.corpus[doc].doc_id] = 1;
      }
    }
    out.push_back(std::move(ds));
  }
  return out;
}

std::vector<std::vector<std::string>> stream_topic_vocabularies(const StreamSpec& spec) {
  spec.validate();
  const StreamVocab v = plan_vocabulary(spec);
  std::vector<std::vector<std::string>> out;
  for (const TaskVocab& tv : v.tasks) {
    std::set<std::string> words;
    for (const Concept& c : tv.concepts) {
      for (int id : c.doc_words) words.insert(spell(id));
      for (int id : c.query_words) words.insert(spell(id));
    }
    for (int id : tv.noise) words.insert(spell(id));
    out.emplace_back(words.begin(), words.end());
  }
  return out;
}

void TaskDataset::validate() const {
  std::unordered_set<std::string> ids;
  for (const DocRecord& d : corpus) {
    if (!ids.insert(d.doc_id).second) throw Error(ErrorCode::kDuplicateDocId, "duplicate doc " + d.doc_id);
  }
  for (const TrainPair& p : train_pairs) {
    if (!ids.count(p.doc_id)) throw Error(ErrorCode::kDanglingReference, "train pair doc " + p.doc_id);
  }
  for (const auto& [qid, docs] : qrels) {
    for (const auto& [doc, grade] : docs) {
      if (!ids.count(doc)) throw Error(ErrorCode::kDanglingReference, "qrels doc " + doc);
    }
  }
  for (const TestQuery& q : queries_test) {
    auto it = qrels.find(q.query_id);
    if (it == qrels.end() || it->second.empty()) {
      throw Error(ErrorCode::kDataMismatch, "test query without qrels: " + q.query_id);
    }
  }
}

Qrels parse_qrels(const std::string& text) {
  Qrels q;
  for (const QrelLine& l : parse_qrel_lines(text)) q[l.query_id][l.doc_id] = l.grade;
  return q;
}

void export_beir(const TaskDataset& ds, const std::string& dir) {
  std::string corpus;
  for (const DocRecord& d : ds.corpus) {
    corpus += json{{"_id", d.doc_id}, {"title", d.title}, {"text", d.text}}.dump() + "\n";
  }
  std::string queries;
  std::string test = "query-id\tcorpus-id\tscore\n";
  for (const TestQuery& q : ds.queries_test) {
    queries += json{{"_id", q.query_id}, {"text", q.text}}.dump() + "\n";
    auto it = ds.qrels.find(q.query_id);
    if (it == ds.qrels.end()) continue;
    for (const auto& [doc, grade] : it->second) {
      test += q.query_id + "\t" + doc + "\t" + std::to_string(grade) + "\n";
    }
  }
  std::string train = "query-id\tcorpus-id\tscore\n";
  for (size_t i = 0; i < ds.train_pairs.size(); ++i) {
    const std::string qid = "t" + std::to_string(ds.task_id) + "-tr" + padded(static_cast<int>(i), 5);
    queries += json{{"_id", qid}, {"text", ds.train_pairs[i].query}}.dump() + "\n";
    train += qid + "\t" + ds.train_pairs[i].doc_id + "\t1\n";
  }
  const std::filesystem::path root(dir);
  internal::write_text_file((root / "corpus.jsonl").string(), corpus);
  internal::write_text_file((root / "queries.jsonl").string(), queries);
  internal::write_text_file((root / "qrels" / "test.tsv").string(), test);
  internal::write_text_file((root / "qrels" / "train.tsv").string(), train);
}

TaskDataset load_beir_dataset(const std::string& corpus_path, const std::string& queries_path,
                              const std::string& qrels_path, const std::string& train_qrels_path,
                              int task_id) {
  TaskDataset ds;
  ds.task_id = task_id;
  ds.name = std::filesystem::path(corpus_path).parent_path().filename().string();

  std::unordered_set<std::string> doc_ids;
  for (const json& obj : parse_jsonl(corpus_path)) {
    DocRecord d;
    d.doc_id = string_field(obj, "_id", true, corpus_path);
    d.title = string_field(obj, "title", false, corpus_path);
    d.text = string_field(obj, "text", true, corpus_path);
    if (!doc_ids.insert(d.doc_id).second) {
      throw Error(ErrorCode::kDuplicateDocId, corpus_path + ": duplicate _id " + d.doc_id);
    }
    ds.corpus.push_back(std::move(d));
  }

  std::vector<std::pair<std::string, std::string>> queries;
  std::unordered_map<std::string, std::string> query_text;
  for (const json& obj : parse_jsonl(queries_path)) {
    const std::string id = string_field(obj, "_id", true, queries_path);
    const std::string text = string_field(obj, "text", true, queries_path);
    if (!query_text.emplace(id, text).second) {
      throw Error(ErrorCode::kParseError, queries_path + ": duplicate _id " + id);
    }
    queries.emplace_back(id, text);
  }

  for (const QrelLine& l : parse_qrel_lines(internal::read_text_file(qrels_path))) {
    if (!doc_ids.count(l.doc_id)) throw Error(ErrorCode::kDanglingReference, "qrels doc " + l.doc_id);
    if (!query_text.count(l.query_id)) {
      throw Error(ErrorCode::kDanglingReference, "qrels query " + l.query_id);
    }
    ds.qrels[l.query_id][l.doc_id] = l.grade;
  }
  for (const auto& [id, text] : queries) {
    if (ds.qrels.count(id)) ds.queries_test.push_back(TestQuery{id, text});
  }

  if (!train_qrels_path.empty()) {
    for (const QrelLine& l : parse_qrel_lines(internal::read_text_file(train_qrels_path))) {
      if (l.grade <= 0) continue;
      if (!doc_ids.count(l.doc_id)) throw Error(ErrorCode::kDanglingReference, "train qrels doc " + l.doc_id);
      auto it = query_text.find(l.query_id);
      if (it == query_text.end()) {
        throw Error(ErrorCode::kDanglingReference, "train qrels query " + l.query_id);
      }
      ds.train_pairs.push_back(TrainPair{it->second, l.doc_id});
    }
  }
  ds.validate();
  return ds;
}

TaskDataset load_beir_dir(const std::string& dir, int task_id) {
  const std::filesystem::path root(dir);
  const std::filesystem::path train = root / "qrels" / "train.tsv";
  TaskDataset ds = load_beir_dataset((root / "corpus.jsonl").string(), (root / "queries.jsonl").string(),
                                     (root / "qrels" / "test.tsv").string(),
                                     std::filesystem::exists(train) ? train.string() : "", task_id);
  ds.name = root.filename().string();
  return ds;
}

}  // namespace qdc
