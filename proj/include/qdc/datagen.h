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

#ifndef QDC_DATAGEN_H_
#define QDC_DATAGEN_H_

#include <cstdint>
#include <string>
#include <vector>

#include "qdc/dataset.h"

namespace qdc {

struct LengthRange {
  int min = 1;
  int max = 1;
};

// Each task owns a set of concepts. A concept has document-side words and
// query-side synonyms, so queries only partly overlap their positives
// lexically and training has something to learn. Every query starts with a
// shared marker word, and every document carries one of a few shared style
// vocabularies. Each task prefers a different style for its positives; the
// marker row absorbs that preference during training, which moves all query
// embeddings of the task together.
struct StreamSpec {
  int num_tasks = 3;
  int docs_per_task = 2000;
  int train_pairs_per_task = 500;
  int test_queries_per_task = 200;
  int vocab_size = 150;          // concepts per task
  double vocab_overlap = 0.2;    // share of concepts and noise words kept from the previous task
  LengthRange doc_length{30, 80};
  LengthRange query_length{3, 6};  // content words, excluding the marker
  uint64_t seed = 42;

  int synonyms = 2;              // words per concept side
  int focus_concepts = 3;        // concepts per document
  int noise_vocab = 300;         // per-task filler words
  double noise_fraction = 0.1;
  double query_doc_word_prob = 0.8;  // query word drawn from the doc side
  int num_styles = 4;
  int style_words = 2;
  double style_fraction = 0.2;
  double style_preference = 0.95;  // positive-sampling mass on the task's style
  std::string query_marker = "query";

  void validate() const;  // throws InvalidSpec
};

std::vector<TaskDataset> generate_task_stream(const StreamSpec& spec);

// Topic vocabulary (concept and noise words) of every task, for overlap checks.
std::vector<std::vector<std::string>> stream_topic_vocabularies(const StreamSpec& spec);

// BEIR layout: corpus.jsonl, queries.jsonl, qrels/test.tsv, qrels/train.tsv.
// train.tsv references train queries stored in queries.jsonl.
void export_beir(const TaskDataset& dataset, const std::string& dir);

// Train pairs come from train_qrels_path when non-empty (positive grades only).
TaskDataset load_beir_dataset(const std::string& corpus_path, const std::string& queries_path,
                              const std::string& qrels_path, const std::string& train_qrels_path = "",
                              int task_id = 1);
TaskDataset load_beir_dir(const std::string& dir, int task_id);

Qrels parse_qrels(const std::string& text);

}  // namespace qdc

#endif  // QDC_DATAGEN_H_
