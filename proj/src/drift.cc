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

#include "qdc/drift.h"

#include <cmath>
#include <limits>
#include <string>

#include "binary_io.h"
#include "json.hpp"
#include "qdc/errors.h"
#include "qdc/random.h"

namespace qdc {
namespace {

using nlohmann::json;

struct QueryDrifts {
  std::vector<Vec> new_embeddings;
  std::vector<Vec> drifts;
};

QueryDrifts query_drifts(const EncoderParams& params_new, const EncoderParams& params_old,
                         const std::vector<TokenFeatures>& queries) {
  if (queries.empty()) throw Error(ErrorCode::kEmptyQuerySet, "no queries for drift estimation");
  if (params_new.dim != params_old.dim) {
    throw Error(ErrorCode::kDimMismatch, "drift: encoders have different dims");
  }
  QueryDrifts out;
  out.new_embeddings.reserve(queries.size());
  out.drifts.reserve(queries.size());
  for (const TokenFeatures& q : queries) {
    Vec a = encode(params_new, q);
    const Vec b = encode(params_old, q);
    Vec diff(a.size());
    for (size_t k = 0; k < a.size(); ++k) diff[k] = a[k] - b[k];
    out.new_embeddings.push_back(std::move(a));
    out.drifts.push_back(std::move(diff));
  }
  return out;
}

// Shared by the single and multi estimators so that k = 1 agrees bit for bit.
Vec ordered_mean(const std::vector<Vec>& vs, const std::vector<size_t>* assignment, size_t cluster,
                 size_t dim) {
  Vec sum(dim, 0.0);
  size_t count = 0;
  for (size_t i = 0; i < vs.size(); ++i) {
    if (assignment != nullptr && (*assignment)[i] != cluster) continue;
    for (size_t k = 0; k < dim; ++k) sum[k] += vs[i][k];
    ++count;
  }
  if (count == 0) throw Error(ErrorCode::kEmptyList, "ordered_mean: empty cluster");
  const double n = static_cast<double>(count);
  for (double& x : sum) x /= n;
  return sum;
}

double squared_distance(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (size_t k = 0; k < a.size(); ++k) {
    const double t = a[k] - b[k];
    s += t * t;
  }
  return s;
}

size_t nearest_euclidean(const Vec& p, const std::vector<Vec>& centers) {
  size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (size_t j = 0; j < centers.size(); ++j) {
    const double d = squared_distance(p, centers[j]);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

Vec subtract_checked(std::span<const double> q, const Vec& delta) {
  if (q.size() != delta.size()) throw Error(ErrorCode::kDimMismatch, "compensation: dim mismatch");
  Vec out(q.size());
  for (size_t k = 0; k < q.size(); ++k) out[k] = q[k] - delta[k];
  if (!(l2_norm(out) >= kZeroNormThreshold)) {
    throw Error(ErrorCode::kZeroVector, "compensated query is zero");
  }
  return out;
}

json vec_json(const Vec& v) { return json(v); }

Vec json_vec(const json& j) {
  if (!j.is_array()) throw Error(ErrorCode::kParseError, "ledger: expected array");
  Vec v;
  v.reserve(j.size());
  for (const json& x : j) {
    if (!x.is_number()) throw Error(ErrorCode::kParseError, "ledger: expected number");
    v.push_back(x.get<double>());
  }
  return v;
}

}  // namespace

void DriftLedger::append(DriftRecord record) {
  const int from = record.from_task();
  const int to = record.to_task();
  if (to != from + 1) {
    throw Error(ErrorCode::kInvalidArgument, "drift record must span one transition");
  }
  if (!records_.empty() && records_.back().to_task() != from) {
    throw Error(ErrorCode::kMissingTransition, "ledger transitions must be contiguous");
  }
  records_.push_back(std::move(record));
}

const DriftRecord* DriftLedger::find(int from_task) const {
  for (const DriftRecord& r : records_) {
    if (r.from_task() == from_task) return &r;
  }
  return nullptr;
}

bool DriftLedger::operator==(const DriftLedger& o) const {
  if (dim_ != o.dim_ || centroids_ != o.centroids_ || records_.size() != o.records_.size()) {
    return false;
  }
  for (size_t i = 0; i < records_.size(); ++i) {
    const DriftRecord& a = records_[i];
    const DriftRecord& b = o.records_[i];
    if (a.kind != b.kind) return false;
    if (a.kind == DriftKind::kSingle) {
      if (a.single.from_task != b.single.from_task || a.single.to_task != b.single.to_task ||
          a.single.values != b.single.values) {
        return false;
      }
    } else if (a.multi.from_task != b.multi.from_task || a.multi.to_task != b.multi.to_task ||
               a.multi.centroids != b.multi.centroids || a.multi.vectors != b.multi.vectors ||
               a.multi.cluster_sizes != b.multi.cluster_sizes) {
      return false;
    }
  }
  return true;
}

DriftVector estimate_drift(const EncoderParams& params_new, const EncoderParams& params_old,
                           const std::vector<TokenFeatures>& queries) {
  const QueryDrifts qd = query_drifts(params_new, params_old, queries);
  DriftVector out;
  out.values = ordered_mean(qd.drifts, nullptr, 0, params_new.dim);
  out.from_task = static_cast<int>(params_old.version);
  out.to_task = static_cast<int>(params_new.version);
  return out;
}

DriftVector accumulate_drift(const DriftLedger& ledger, int t_prime, int t) {
  if (t_prime > t) throw Error(ErrorCode::kInvalidArgument, "accumulate_drift: t_prime > t");
  DriftVector out;
  out.from_task = t_prime;
  out.to_task = t;
  out.values.assign(ledger.dim(), 0.0);
  for (int j = t_prime; j < t; ++j) {
    const DriftRecord* r = ledger.find(j);
    if (r == nullptr) {
      throw Error(ErrorCode::kMissingTransition,
                  "no drift record for " + std::to_string(j) + "->" + std::to_string(j + 1));
    }
    if (r->kind != DriftKind::kSingle) {
      throw Error(ErrorCode::kMixedRecordKind, "accumulate_drift needs single-vector records");
    }
    if (r->single.values.size() != out.values.size()) {
      throw Error(ErrorCode::kDimMismatch, "accumulate_drift: record dim");
    }
    for (size_t k = 0; k < out.values.size(); ++k) out.values[k] += r->single.values[k];
  }
  return out;
}

Vec compensate_query(std::span<const double> q, const DriftVector& delta) {
  return subtract_checked(q, delta.values);
}

std::vector<Vec> kmeans_plus_plus_init(const std::vector<Vec>& points, size_t k, uint64_t seed) {
  if (k == 0 || k > points.size()) {
    throw Error(ErrorCode::kTooFewQueries, "k-means++: need 1 <= k <= #points");
  }
  Rng rng(seed);
  std::vector<Vec> centers;
  std::vector<bool> chosen(points.size(), false);
  const size_t first = static_cast<size_t>(rng.below(points.size()));
  centers.push_back(points[first]);
  chosen[first] = true;
  std::vector<double> d2(points.size(), std::numeric_limits<double>::infinity());
  while (centers.size() < k) {
    double total = 0.0;
    for (size_t i = 0; i < points.size(); ++i) {
      d2[i] = std::min(d2[i], squared_distance(points[i], centers.back()));
      total += d2[i];
    }
    size_t pick = points.size();
    if (total > 0.0) {
      pick = rng.weighted_index(d2);
    } else {
      // Every point coincides with a center; fall back to the first unused.
      for (size_t i = 0; i < points.size(); ++i) {
        if (!chosen[i]) {
          pick = i;
          break;
        }
      }
    }
    centers.push_back(points[pick]);
    chosen[pick] = true;
  }
  return centers;
}

KMeansResult lloyd(const std::vector<Vec>& points, std::vector<Vec> centers, int max_iterations,
                   double tolerance) {
  if (points.empty() || centers.empty()) {
    throw Error(ErrorCode::kTooFewQueries, "lloyd: empty input");
  }
  const size_t k = centers.size();
  const size_t dim = points.front().size();
  std::vector<size_t> assign(points.size(), 0);
  KMeansResult out;
  for (int it = 1; it <= max_iterations; ++it) {
    out.iterations = it;
    for (size_t i = 0; i < points.size(); ++i) assign[i] = nearest_euclidean(points[i], centers);

    std::vector<Vec> next(k, Vec(dim, 0.0));
    std::vector<size_t> counts(k, 0);
    for (size_t i = 0; i < points.size(); ++i) {
      for (size_t c = 0; c < dim; ++c) next[assign[i]][c] += points[i][c];
      ++counts[assign[i]];
    }
    for (size_t j = 0; j < k; ++j) {
      if (counts[j] == 0) continue;
      for (double& x : next[j]) x /= static_cast<double>(counts[j]);
    }
    std::vector<bool> taken(points.size(), false);
    for (size_t j = 0; j < k; ++j) {
      if (counts[j] != 0) continue;
      size_t far = points.size();
      double far_d = -1.0;
      for (size_t i = 0; i < points.size(); ++i) {
        if (taken[i]) continue;
        const double d = squared_distance(points[i], centers[assign[i]]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far == points.size()) break;
      taken[far] = true;
      next[j] = points[far];
    }

    double shift = 0.0;
    for (size_t j = 0; j < k; ++j) shift = std::max(shift, std::sqrt(squared_distance(next[j], centers[j])));
    centers.swap(next);
    if (shift <= tolerance) break;
  }
  for (size_t i = 0; i < points.size(); ++i) assign[i] = nearest_euclidean(points[i], centers);

  // Drop clusters that ended empty so every record cluster has members.
  std::vector<size_t> counts(k, 0);
  for (size_t a : assign) ++counts[a];
  std::vector<size_t> remap(k, 0);
  for (size_t j = 0; j < k; ++j) {
    if (counts[j] == 0) continue;
    remap[j] = out.centroids.size();
    out.centroids.push_back(centers[j]);
  }
  for (size_t& a : assign) a = remap[a];
  out.assignment = std::move(assign);
  return out;
}

MultiDriftRecord estimate_multi_drift(const EncoderParams& params_new,
                                      const EncoderParams& params_old,
                                      const std::vector<TokenFeatures>& queries, size_t k,
                                      uint64_t seed) {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "estimate_multi_drift: k == 0");
  if (k > queries.size()) throw Error(ErrorCode::kTooFewQueries, "estimate_multi_drift: k > #queries");
  const QueryDrifts qd = query_drifts(params_new, params_old, queries);
  KMeansResult km = lloyd(qd.new_embeddings, kmeans_plus_plus_init(qd.new_embeddings, k, seed));

  MultiDriftRecord rec;
  rec.from_task = static_cast<int>(params_old.version);
  rec.to_task = static_cast<int>(params_new.version);
  rec.centroids = std::move(km.centroids);
  for (size_t j = 0; j < rec.centroids.size(); ++j) {
    rec.vectors.push_back(ordered_mean(qd.drifts, &km.assignment, j, params_new.dim));
    size_t n = 0;
    for (size_t a : km.assignment) n += (a == j);
    rec.cluster_sizes.push_back(n);
  }
  return rec;
}

size_t nearest_centroid(std::span<const double> q, const std::vector<Vec>& centroids) {
  if (centroids.empty()) throw Error(ErrorCode::kInvalidArgument, "nearest_centroid: no centroids");
  const double qn = l2_norm(q);
  if (!(qn >= kZeroNormThreshold)) throw Error(ErrorCode::kZeroVector, "nearest_centroid: zero query");
  size_t best = 0;
  double best_s = -std::numeric_limits<double>::infinity();
  for (size_t j = 0; j < centroids.size(); ++j) {
    if (centroids[j].size() != q.size()) throw Error(ErrorCode::kDimMismatch, "nearest_centroid");
    const double cn = l2_norm(centroids[j]);
    if (!(cn >= kZeroNormThreshold)) continue;
    const double s = dot(q, centroids[j]) / (qn * cn);
    if (s > best_s) {
      best_s = s;
      best = j;
    }
  }
  return best;
}

Vec compensate_query_multi(std::span<const double> q, const MultiDriftRecord& record) {
  return subtract_checked(q, record.vectors[nearest_centroid(q, record.centroids)]);
}

Vec compensate_across(std::span<const double> q, const DriftLedger& ledger, int t_prime, int t) {
  if (t_prime > t) throw Error(ErrorCode::kInvalidArgument, "compensate_across: t_prime > t");
  if (t_prime == t) return Vec(q.begin(), q.end());
  std::vector<const Vec*> selected(static_cast<size_t>(t - t_prime), nullptr);
  Vec current(q.begin(), q.end());
  for (int j = t - 1; j >= t_prime; --j) {
    const DriftRecord* r = ledger.find(j);
    if (r == nullptr) {
      throw Error(ErrorCode::kMissingTransition,
                  "no drift record for " + std::to_string(j) + "->" + std::to_string(j + 1));
    }
    const Vec* v = nullptr;
    if (r->kind == DriftKind::kSingle) {
      v = &r->single.values;
    } else {
      v = &r->multi.vectors[nearest_centroid(current, r->multi.centroids)];
    }
    if (v->size() != current.size()) throw Error(ErrorCode::kDimMismatch, "compensate_across");
    for (size_t k = 0; k < current.size(); ++k) current[k] -= (*v)[k];
    selected[static_cast<size_t>(j - t_prime)] = v;
  }
  Vec total(q.size(), 0.0);
  for (const Vec* v : selected) {
    for (size_t k = 0; k < total.size(); ++k) total[k] += (*v)[k];
  }
  return subtract_checked(q, total);
}

int predict_task_id(std::span<const double> q, const DriftLedger& ledger) {
  const auto& cs = ledger.task_centroids();
  if (cs.empty()) throw Error(ErrorCode::kNoCentroids, "predict_task_id: no task centroids");
  int best = cs.begin()->first;
  double best_s = -std::numeric_limits<double>::infinity();
  for (const auto& [task, c] : cs) {
    if (!(l2_norm(c) >= kZeroNormThreshold)) continue;
    const double s = cosine_sim(q, c);
    if (s > best_s) {
      best_s = s;
      best = task;
    }
  }
  return best;
}

void update_task_centroids(DriftLedger& ledger, const DriftVector& delta) {
  for (auto& [task, c] : ledger.task_centroids()) {
    if (c.size() != delta.values.size()) throw Error(ErrorCode::kDimMismatch, "update_task_centroids");
  }
  for (auto& [task, c] : ledger.task_centroids()) {
    for (size_t k = 0; k < c.size(); ++k) c[k] += delta.values[k];
  }
}

void set_task_centroid(DriftLedger& ledger, int task_id, Vec centroid) {
  if (ledger.dim() != 0 && centroid.size() != ledger.dim()) {
    throw Error(ErrorCode::kDimMismatch, "set_task_centroid");
  }
  ledger.task_centroids()[task_id] = std::move(centroid);
}

std::string ledger_to_json(const DriftLedger& ledger) {
  json records = json::array();
  for (const DriftRecord& r : ledger.records()) {
    json rec;
    rec["from"] = r.from_task();
    rec["to"] = r.to_task();
    if (r.kind == DriftKind::kSingle) {
      rec["kind"] = "single";
      rec["vectors"] = json::array({vec_json(r.single.values)});
      rec["centroids"] = json::array();
    } else {
      rec["kind"] = "multi";
      rec["vectors"] = r.multi.vectors;
      rec["centroids"] = r.multi.centroids;
      rec["cluster_sizes"] = r.multi.cluster_sizes;
    }
    records.push_back(std::move(rec));
  }
  json centroids = json::array();
  for (const auto& [task, c] : ledger.task_centroids()) {
    centroids.push_back(json{{"task", task}, {"centroid", vec_json(c)}});
  }
  json root;
  root["dim"] = ledger.dim();
  root["records"] = std::move(records);
  root["task_centroids"] = std::move(centroids);
  return root.dump(1) + "\n";
}

DriftLedger ledger_from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("ledger: ") + e.what());
  }
  try {
    DriftLedger ledger(root.at("dim").get<uint32_t>());
    for (const json& rec : root.at("records")) {
      DriftRecord r;
      const std::string kind = rec.at("kind").get<std::string>();
      const int from = rec.at("from").get<int>();
      const int to = rec.at("to").get<int>();
      if (kind == "single") {
        r.kind = DriftKind::kSingle;
        const json& vs = rec.at("vectors");
        if (vs.size() != 1) throw Error(ErrorCode::kParseError, "single record needs one vector");
        r.single = DriftVector{json_vec(vs[0]), from, to};
      } else if (kind == "multi") {
        r.kind = DriftKind::kMulti;
        r.multi.from_task = from;
        r.multi.to_task = to;
        for (const json& v : rec.at("vectors")) r.multi.vectors.push_back(json_vec(v));
        for (const json& c : rec.at("centroids")) r.multi.centroids.push_back(json_vec(c));
        if (rec.contains("cluster_sizes")) {
          r.multi.cluster_sizes = rec.at("cluster_sizes").get<std::vector<size_t>>();
        }
        if (r.multi.vectors.size() != r.multi.centroids.size() || r.multi.vectors.empty()) {
          throw Error(ErrorCode::kParseError, "multi record: vectors/centroids disagree");
        }
      } else {
        throw Error(ErrorCode::kParseError, "unknown record kind " + kind);
      }
      ledger.append(std::move(r));
    }
    for (const json& c : root.at("task_centroids")) {
      set_task_centroid(ledger, c.at("task").get<int>(), json_vec(c.at("centroid")));
    }
    return ledger;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("ledger: ") + e.what());
  }
}

void save_ledger(const DriftLedger& ledger, const std::string& path) {
  internal::write_text_file(path, ledger_to_json(ledger));
}

DriftLedger load_ledger(const std::string& path) {
  return ledger_from_json(internal::read_text_file(path));
}

}  // namespace qdc
