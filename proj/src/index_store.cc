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

#include "qdc/index_store.h"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <exception>
#include <numeric>
#include <thread>
#include <unordered_set>

#include "binary_io.h"
#include "qdc/errors.h"
#include "qdc/tokenizer.h"

namespace qdc {
namespace {

constexpr char kIndexMagic[8] = {'Q', 'D', 'C', 'I', 'D', 'X', '0', '1'};
constexpr size_t kHeaderBytes = 8 + 5 * 4;

double float_row_norm(const float* r, uint32_t d) {
  double s = 0.0;
  for (uint32_t k = 0; k < d; ++k) s += static_cast<double>(r[k]) * r[k];
  return std::sqrt(s);
}

}  // namespace

std::string doc_text(const DocRecord& doc) { return doc.title + " " + doc.text; }

CorpusIndex::CorpusIndex(uint32_t task_id, uint32_t encoder_version, uint32_t dim,
                         std::vector<float> rows, std::vector<std::string> doc_ids)
    : task_id_(task_id),
      encoder_version_(encoder_version),
      dim_(dim),
      rows_(std::move(rows)),
      doc_ids_(std::move(doc_ids)) {
  if (dim_ == 0 || rows_.size() != doc_ids_.size() * dim_) {
    throw Error(ErrorCode::kDimMismatch, "CorpusIndex: rows do not match ids x dim");
  }
  norms_.resize(doc_ids_.size());
  for (size_t i = 0; i < doc_ids_.size(); ++i) norms_[i] = float_row_norm(row(i), dim_);
}

bool CorpusIndex::operator==(const CorpusIndex& other) const {
  return task_id_ == other.task_id_ && encoder_version_ == other.encoder_version_ &&
         dim_ == other.dim_ && doc_ids_ == other.doc_ids_ && rows_.size() == other.rows_.size() &&
         std::memcmp(rows_.data(), other.rows_.data(), rows_.size() * sizeof(float)) == 0;
}

void parallel_for(size_t n, int threads, const std::function<void(size_t)>& fn) {
  const size_t workers = std::min<size_t>(n, threads > 1 ? static_cast<size_t>(threads) : 1);
  if (workers <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const size_t chunk = (n + workers - 1) / workers;
  for (size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      try {
        const size_t end = std::min(n, (w + 1) * chunk);
        for (size_t i = w * chunk; i < end; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

CorpusIndex build_index(const EncoderParams& params, const std::vector<DocRecord>& corpus,
                        uint32_t task_id, int threads) {
  if (corpus.empty()) throw Error(ErrorCode::kEmptyCorpus, "build_index: empty corpus");
  std::unordered_set<std::string> seen;
  std::vector<std::string> ids;
  ids.reserve(corpus.size());
  for (const DocRecord& doc : corpus) {
    if (!seen.insert(doc.doc_id).second) {
      throw Error(ErrorCode::kDuplicateDocId, "build_index: duplicate doc_id " + doc.doc_id);
    }
    ids.push_back(doc.doc_id);
  }
  const uint32_t d = params.dim;
  std::vector<float> rows(corpus.size() * d);
  parallel_for(corpus.size(), threads, [&](size_t i) {
    Vec e = encode(params, tokenize(doc_text(corpus[i]), params.vocab_size));
    // Linear-mode encoders still produce unit rows.
    if (params.mode == OutputMode::kLinear) e = l2_normalize(e);
    for (uint32_t k = 0; k < d; ++k) rows[i * d + k] = static_cast<float>(e[k]);
  });
  return CorpusIndex(task_id, params.version, d, std::move(rows), std::move(ids));
}

void save_index(const CorpusIndex& index, const std::string& path) {
  internal::ByteWriter payload;
  for (float f : index.rows()) payload.put_f32(f);
  for (const std::string& id : index.doc_ids()) {
    payload.put_u32(static_cast<uint32_t>(id.size()));
    payload.put_bytes(id.data(), id.size());
  }
  const std::vector<uint8_t>& body = payload.bytes();
  const uint32_t crc = static_cast<uint32_t>(
      crc32(0L, body.data(), static_cast<uInt>(body.size())));

  internal::ByteWriter out;
  out.put_bytes(kIndexMagic, 8);
  out.put_u32(index.task_id());
  out.put_u32(index.encoder_version());
  out.put_u32(static_cast<uint32_t>(index.size()));
  out.put_u32(index.dim());
  out.put_u32(crc);
  out.put_bytes(body.data(), body.size());
  internal::write_file(path, out.bytes());
}

CorpusIndex load_index(const std::string& path) {
  const std::vector<uint8_t> bytes = internal::read_file(path);
  auto corrupt = [&](const std::string& why) {
    return Error(ErrorCode::kCorruptIndex, why + " in " + path);
  };
  if (bytes.size() < kHeaderBytes) throw corrupt("truncated header");
  internal::ByteReader r(bytes.data(), bytes.size());
  char magic[8];
  r.get_bytes(magic, 8);
  if (std::memcmp(magic, kIndexMagic, 8) != 0) throw corrupt("bad magic");
  const uint32_t task_id = r.get_u32();
  const uint32_t version = r.get_u32();
  const uint32_t n = r.get_u32();
  const uint32_t d = r.get_u32();
  const uint32_t crc = r.get_u32();
  if (n == 0 || d == 0) throw corrupt("empty shape");

  const uint8_t* body = bytes.data() + kHeaderBytes;
  const size_t body_size = bytes.size() - kHeaderBytes;
  if (static_cast<uint32_t>(crc32(0L, body, static_cast<uInt>(body_size))) != crc) {
    throw corrupt("CRC mismatch");
  }
  const uint64_t row_bytes = static_cast<uint64_t>(n) * d * 4;
  if (row_bytes > body_size) throw corrupt("row data shorter than header shape");

  std::vector<float> rows(static_cast<size_t>(n) * d);
  for (float& f : rows) f = r.get_f32();
  std::vector<std::string> ids(n);
  std::unordered_set<std::string> seen;
  for (std::string& id : ids) {
    const uint32_t len = r.get_u32();
    if (!r.ok() || len > r.remaining()) throw corrupt("truncated doc id table");
    id.resize(len);
    r.get_bytes(id.data(), len);
    if (!seen.insert(id).second) throw corrupt("duplicate doc id");
  }
  if (!r.ok()) throw corrupt("truncated payload");
  if (r.remaining() != 0) throw corrupt("trailing bytes after doc id table");
  for (float f : rows) {
    if (!std::isfinite(f)) throw corrupt("non-finite row value");
  }
  return CorpusIndex(task_id, version, d, std::move(rows), std::move(ids));
}

RankedList search_topk(const CorpusIndex& index, std::span<const double> q, size_t k) {
  if (q.size() != index.dim()) throw Error(ErrorCode::kDimMismatch, "search_topk: query dim");
  const double qn = l2_norm(q);
  if (!(qn >= kZeroNormThreshold)) throw Error(ErrorCode::kZeroVector, "search_topk: zero query");
  const size_t n = index.size();
  k = std::min(k, n);
  std::vector<double> scores(n);
  for (size_t i = 0; i < n; ++i) {
    const float* r = index.row(i);
    double s = 0.0;
    for (uint32_t j = 0; j < index.dim(); ++j) s += q[j] * static_cast<double>(r[j]);
    const double rn = index.row_norm(i);
    scores[i] = rn > 0.0 ? s / (qn * rn) : 0.0;
  }
  const std::vector<std::string>& ids = index.doc_ids();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](size_t a, size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return ids[a] < ids[b];
                    });
  RankedList out(k);
  for (size_t i = 0; i < k; ++i) out[i] = ScoredDoc{ids[order[i]], scores[order[i]]};
  return out;
}

std::vector<RankedList> search_batch(const CorpusIndex& index, const std::vector<Vec>& queries,
                                     size_t k, int threads) {
  std::vector<RankedList> out(queries.size());
  parallel_for(queries.size(), threads, [&](size_t i) { out[i] = search_topk(index, queries[i], k); });
  return out;
}

}  // namespace qdc
