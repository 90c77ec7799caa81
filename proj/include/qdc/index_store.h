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

#ifndef QDC_INDEX_STORE_H_
#define QDC_INDEX_STORE_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "qdc/embedding.h"
#include "qdc/encoder.h"

namespace qdc {

struct DocRecord {
  std::string doc_id;
  std::string title;
  std::string text;
};

// The string fed to the encoder for a document.
std::string doc_text(const DocRecord& doc);

struct ScoredDoc {
  std::string doc_id;
  double score = 0.0;
};

// Descending by score, ties by ascending doc_id.
using RankedList = std::vector<ScoredDoc>;

class CorpusIndex {
 public:
  CorpusIndex() = default;
  // Rows are copied as given; norms are recomputed.
  CorpusIndex(uint32_t task_id, uint32_t encoder_version, uint32_t dim, std::vector<float> rows,
              std::vector<std::string> doc_ids);

  uint32_t task_id() const { return task_id_; }
  uint32_t encoder_version() const { return encoder_version_; }
  uint32_t dim() const { return dim_; }
  size_t size() const { return doc_ids_.size(); }
  const float* row(size_t i) const { return rows_.data() + i * dim_; }
  const std::vector<float>& rows() const { return rows_; }
  const std::vector<std::string>& doc_ids() const { return doc_ids_; }
  double row_norm(size_t i) const { return norms_[i]; }

  bool operator==(const CorpusIndex& other) const;

 private:
  uint32_t task_id_ = 0;
  uint32_t encoder_version_ = 0;
  uint32_t dim_ = 0;
  std::vector<float> rows_;
  std::vector<std::string> doc_ids_;
  std::vector<double> norms_;
};

// threads <= 1 runs inline; results never depend on the thread count.
CorpusIndex build_index(const EncoderParams& params, const std::vector<DocRecord>& corpus,
                        uint32_t task_id, int threads = 1);

void save_index(const CorpusIndex& index, const std::string& path);
CorpusIndex load_index(const std::string& path);

// Exact top-k by cosine. k is clamped to the index size.
RankedList search_topk(const CorpusIndex& index, std::span<const double> q, size_t k);

std::vector<RankedList> search_batch(const CorpusIndex& index, const std::vector<Vec>& queries,
                                     size_t k, int threads = 1);

// Runs fn(i) for i in [0, n) over up to `threads` workers, static chunking.
void parallel_for(size_t n, int threads, const std::function<void(size_t)>& fn);

}  // namespace qdc

#endif  // QDC_INDEX_STORE_H_
