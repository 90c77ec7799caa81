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

#ifndef QDC_DATASET_H_
#define QDC_DATASET_H_

#include <string>
#include <vector>

#include "qdc/eval.h"
#include "qdc/index_store.h"

namespace qdc {

struct TrainPair {
  std::string query;
  std::string doc_id;
};

struct TestQuery {
  std::string query_id;
  std::string text;
};

struct TaskDataset {
  int task_id = 1;
  std::string name;
  std::vector<TrainPair> train_pairs;
  std::vector<TestQuery> queries_test;
  std::vector<DocRecord> corpus;
  Qrels qrels;  // test judgments

  // Throws DataMismatch or DanglingReference when an invariant is broken.
  void validate() const;
};

}  // namespace qdc

#endif  // QDC_DATASET_H_
