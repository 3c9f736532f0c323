#include "pgait/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "pgait/errors.hpp"

namespace pgait {

const char* to_string(DistanceMetric metric) noexcept {
  return metric == DistanceMetric::kEuclidean ? "euclidean" : "cosine";
}

DistanceMetric distance_metric_from_string(const std::string& name) {
  if (name == "euclidean") return DistanceMetric::kEuclidean;
  if (name == "cosine") return DistanceMetric::kCosine;
  throw ConfigError("unknown metric '" + name + "' (expected euclidean or cosine)");
}

std::span<const float> EmbeddingSet::row(std::size_t i) const {
  const std::size_t stride = static_cast<std::size_t>(parts) * static_cast<std::size_t>(dim);
  return std::span<const float>(features).subspan(i * stride, stride);
}

void EmbeddingSet::add(const std::string& sequence_id, const std::string& subject_id, const Embedding& e) {
  if (sequence_ids.empty() && features.empty()) {
    parts = e.parts;
    dim = e.dim;
  }
  if (e.parts != parts || e.dim != dim) throw ShapeError("embedding shape differs from the set");
  sequence_ids.push_back(sequence_id);
  subject_ids.push_back(subject_id);
  features.insert(features.end(), e.values.begin(), e.values.end());
}

void EmbeddingSet::validate() const {
  if (subject_ids.size() != sequence_ids.size()) throw ShapeError("embedding set id lists differ in length");
  if (features.size() != sequence_ids.size() * static_cast<std::size_t>(parts) * static_cast<std::size_t>(dim)) {
    throw ShapeError("embedding set feature count does not match P x d per row");
  }
  for (float v : features) {
    if (!std::isfinite(v)) throw NumericError("embedding set contains a non-finite value");
  }
}

namespace {

double euclidean(const float* a, const float* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return std::sqrt(s);
}

double cosine(const float* a, const float* b, std::size_t n) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ab += static_cast<double>(a[i]) * b[i];
    aa += static_cast<double>(a[i]) * a[i];
    bb += static_cast<double>(b[i]) * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 1.0;
  return 1.0 - ab / (std::sqrt(aa) * std::sqrt(bb));
}

void check_inputs(const DenseMatrix& d, std::span<const std::string> qs, std::span<const std::string> gs) {
  if (d.cols == 0 || gs.empty()) throw InvalidArgument("empty gallery");
  if (static_cast<std::size_t>(d.rows) != qs.size() || static_cast<std::size_t>(d.cols) != gs.size()) {
    throw ShapeError("distance matrix is " + std::to_string(d.rows) + "x" + std::to_string(d.cols) + " but there are " +
                     std::to_string(qs.size()) + " queries and " + std::to_string(gs.size()) + " gallery entries");
  }
}

}  // namespace

DenseMatrix distance_matrix(const EmbeddingSet& query, const EmbeddingSet& gallery, DistanceMetric metric,
                            DistanceMode mode) {
  if (query.parts != gallery.parts || query.dim != gallery.dim) {
    throw ShapeError("query embeddings are " + std::to_string(query.parts) + "x" + std::to_string(query.dim) +
                     ", gallery " + std::to_string(gallery.parts) + "x" + std::to_string(gallery.dim));
  }
  const auto fn = metric == DistanceMetric::kEuclidean ? euclidean : cosine;
  DenseMatrix out(static_cast<int>(query.size()), static_cast<int>(gallery.size()));
  const auto p = static_cast<std::size_t>(query.parts), d = static_cast<std::size_t>(query.dim);
  for (std::size_t i = 0; i < query.size(); ++i) {
    const float* a = query.row(i).data();
    for (std::size_t j = 0; j < gallery.size(); ++j) {
      const float* b = gallery.row(j).data();
      double v;
      if (mode == DistanceMode::kConcatenated) {
        v = fn(a, b, p * d);
      } else {
        double s = 0.0;
        for (std::size_t k = 0; k < p; ++k) s += fn(a + k * d, b + k * d, d);
        v = s / static_cast<double>(p);
      }
      out(static_cast<int>(i), static_cast<int>(j)) = v;
    }
  }
  return out;
}

std::vector<int> ranking(const DenseMatrix& distances, int q) {
  std::vector<int> order(static_cast<std::size_t>(distances.cols));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return distances(q, a) < distances(q, b); });
  return order;
}

double rank_k(const DenseMatrix& distances, std::span<const std::string> qs, std::span<const std::string> gs, int k,
              std::size_t* excluded) {
  check_inputs(distances, qs, gs);
  if (k < 1) throw InvalidArgument("rank_k needs k >= 1");
  std::size_t hits = 0, evaluable = 0, skipped = 0;
  for (int q = 0; q < distances.rows; ++q) {
    const auto& subject = qs[static_cast<std::size_t>(q)];
    if (std::find(gs.begin(), gs.end(), subject) == gs.end()) {
      ++skipped;
      continue;
    }
    ++evaluable;
    const auto order = ranking(distances, q);
    const auto top = std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
    for (std::size_t r = 0; r < top; ++r) {
      if (gs[static_cast<std::size_t>(order[r])] == subject) {
        ++hits;
        break;
      }
    }
  }
  if (excluded) *excluded = skipped;
  return evaluable ? 100.0 * static_cast<double>(hits) / static_cast<double>(evaluable) : 0.0;
}

double mean_average_precision(const DenseMatrix& distances, std::span<const std::string> qs,
                              std::span<const std::string> gs, std::size_t* excluded) {
  check_inputs(distances, qs, gs);
  double total = 0.0;
  std::size_t evaluable = 0, skipped = 0;
  for (int q = 0; q < distances.rows; ++q) {
    const auto& subject = qs[static_cast<std::size_t>(q)];
    const auto relevant = static_cast<std::size_t>(std::count(gs.begin(), gs.end(), subject));
    if (relevant == 0) {
      ++skipped;
      continue;
    }
    ++evaluable;
    const auto order = ranking(distances, q);
    double ap = 0.0;
    std::size_t found = 0;
    for (std::size_t r = 0; r < order.size() && found < relevant; ++r) {
      if (gs[static_cast<std::size_t>(order[r])] == subject) {
        ++found;
        ap += static_cast<double>(found) / static_cast<double>(r + 1);
      }
    }
    total += ap / static_cast<double>(relevant);
  }
  if (excluded) *excluded = skipped;
  return evaluable ? 100.0 * total / static_cast<double>(evaluable) : 0.0;
}

MetricsReport compute_metrics(const DenseMatrix& distances, std::span<const std::string> qs,
                              std::span<const std::string> gs, DistanceMetric metric) {
  MetricsReport r;
  r.rank1 = rank_k(distances, qs, gs, 1, &r.excluded_queries);
  r.rank5 = rank_k(distances, qs, gs, 5);
  r.mAP = mean_average_precision(distances, qs, gs);
  r.num_query = qs.size();
  r.num_gallery = gs.size();
  r.metric = to_string(metric);
  return r;
}

std::string to_json(const MetricsReport& r) {
  nlohmann::json j = {{"rank1", r.rank1},
                      {"rank5", r.rank5},
                      {"mAP", r.mAP},
                      {"num_query", r.num_query},
                      {"num_gallery", r.num_gallery},
                      {"excluded_queries", r.excluded_queries},
                      {"metric", r.metric}};
  return j.dump(2) + "\n";
}

}  // namespace pgait
