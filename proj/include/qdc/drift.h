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

#ifndef QDC_DRIFT_H_
#define QDC_DRIFT_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "qdc/embedding.h"
#include "qdc/encoder.h"
#include "qdc/tokenizer.h"

namespace qdc {

// Mean query-embedding displacement across one (or, when accumulated,
// several) encoder transitions. Not unit-norm.
struct DriftVector {
  Vec values;
  int from_task = 0;
  int to_task = 0;
};

// k centroids in the to_task space, one displacement per cluster.
struct MultiDriftRecord {
  int from_task = 0;
  int to_task = 0;
  std::vector<Vec> centroids;
  std::vector<Vec> vectors;
  std::vector<size_t> cluster_sizes;

  size_t k() const { return centroids.size(); }
};

enum class DriftKind { kSingle, kMulti };

struct DriftRecord {
  DriftKind kind = DriftKind::kSingle;
  DriftVector single;     // valid when kind == kSingle
  MultiDriftRecord multi;  // valid when kind == kMulti

  int from_task() const { return kind == DriftKind::kSingle ? single.from_task : multi.from_task; }
  int to_task() const { return kind == DriftKind::kSingle ? single.to_task : multi.to_task; }
};

class DriftLedger {
 public:
  DriftLedger() = default;
  explicit DriftLedger(uint32_t dim) : dim_(dim) {}

  uint32_t dim() const { return dim_; }
  // Records must be appended in order, each starting where the last ended.
  void append(DriftRecord record);
  const std::vector<DriftRecord>& records() const { return records_; }
  // Record for transition from -> from+1, or nullptr.
  const DriftRecord* find(int from_task) const;

  // Per-task mean query embedding, kept in the current model's space.
  std::map<int, Vec>& task_centroids() { return centroids_; }
  const std::map<int, Vec>& task_centroids() const { return centroids_; }

  bool operator==(const DriftLedger& other) const;

 private:
  uint32_t dim_ = 0;
  std::vector<DriftRecord> records_;
  std::map<int, Vec> centroids_;
};

// Delta = mean_q (f_new(q) - f_old(q)), tagged old.version -> new.version.
DriftVector estimate_drift(const EncoderParams& params_new, const EncoderParams& params_old,
                           const std::vector<TokenFeatures>& queries);

// Sum of single-vector records t_prime..t-1 in ascending order.
DriftVector accumulate_drift(const DriftLedger& ledger, int t_prime, int t);

// q - delta, not re-normalized.
Vec compensate_query(std::span<const double> q, const DriftVector& delta);

struct KMeansResult {
  std::vector<Vec> centroids;
  std::vector<size_t> assignment;
  int iterations = 0;
};

inline constexpr int kKMeansMaxIterations = 100;
inline constexpr double kKMeansTolerance = 1e-6;

// k-means++ seeding: first center uniform, the rest by squared distance.
std::vector<Vec> kmeans_plus_plus_init(const std::vector<Vec>& points, size_t k, uint64_t seed);
// Lloyd from the given centers; empty clusters move to the point farthest
// from its assigned centroid.
KMeansResult lloyd(const std::vector<Vec>& points, std::vector<Vec> centers,
                   int max_iterations = kKMeansMaxIterations, double tolerance = kKMeansTolerance);

MultiDriftRecord estimate_multi_drift(const EncoderParams& params_new,
                                      const EncoderParams& params_old,
                                      const std::vector<TokenFeatures>& queries, size_t k,
                                      uint64_t seed);

// Index of the max-cosine centroid, lowest index on ties.
size_t nearest_centroid(std::span<const double> q, const std::vector<Vec>& centroids);

Vec compensate_query_multi(std::span<const double> q, const MultiDriftRecord& record);

// Maps a t-space query into the t_prime space hop by hop, newest transition
// first. Each hop picks its cluster from the partially compensated query;
// the selected vectors are then summed oldest first and subtracted once,
// so an all-single ledger reproduces compensate_query(accumulate_drift).
Vec compensate_across(std::span<const double> q, const DriftLedger& ledger, int t_prime, int t);

// Argmax cosine over stored task centroids; lowest task id on ties.
int predict_task_id(std::span<const double> q, const DriftLedger& ledger);

// c <- c + delta for every stored centroid.
void update_task_centroids(DriftLedger& ledger, const DriftVector& delta);
void set_task_centroid(DriftLedger& ledger, int task_id, Vec centroid);

std::string ledger_to_json(const DriftLedger& ledger);
DriftLedger ledger_from_json(const std::string& text);
void save_ledger(const DriftLedger& ledger, const std::string& path);
DriftLedger load_ledger(const std::string& path);

}  // namespace qdc

#endif  // QDC_DRIFT_H_
