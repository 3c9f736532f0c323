#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pgait/model.hpp"
#include "pgait/partgraph.hpp"

namespace pgait {

enum class DistanceMetric { kEuclidean, kCosine };
const char* to_string(DistanceMetric metric) noexcept;
DistanceMetric distance_metric_from_string(const std::string& name);

/// kPerPart averages one distance per part; kConcatenated treats the P x d
/// feature as a single vector.
enum class DistanceMode { kPerPart, kConcatenated };

/// Part-wise embeddings of a list of sequences; row i is P x d floats.
struct EmbeddingSet {
  std::vector<std::string> sequence_ids;
  std::vector<std::string> subject_ids;
  int parts = 0;
  int dim = 0;
  std::vector<float> features;

  std::size_t size() const noexcept { return sequence_ids.size(); }
  std::span<const float> row(std::size_t i) const;
  void add(const std::string& sequence_id, const std::string& subject_id, const Embedding& embedding);
  /// Throws if lengths disagree or a value is not finite.
  void validate() const;
  bool operator==(const EmbeddingSet&) const = default;
};

/// Q x G distances. Throws ShapeError if P or d differ.
DenseMatrix distance_matrix(const EmbeddingSet& query, const EmbeddingSet& gallery,
                            DistanceMetric metric = DistanceMetric::kEuclidean,
                            DistanceMode mode = DistanceMode::kPerPart);

/// Gallery indices of query row `q` in ascending distance; equal distances
/// keep gallery order.
std::vector<int> ranking(const DenseMatrix& distances, int q);

/// Percentage of evaluable queries with a same-subject gallery entry in the
/// top k. Queries whose subject is absent from the gallery are skipped and
/// counted in `excluded`. Throws InvalidArgument on an empty gallery.
double rank_k(const DenseMatrix& distances, std::span<const std::string> query_subjects,
              std::span<const std::string> gallery_subjects, int k, std::size_t* excluded = nullptr);

/// Mean over evaluable queries of AP = (1/R) sum over relevant hits of
/// precision at the hit's rank, as a percentage.
double mean_average_precision(const DenseMatrix& distances, std::span<const std::string> query_subjects,
                              std::span<const std::string> gallery_subjects, std::size_t* excluded = nullptr);

struct MetricsReport {
  double rank1 = 0.0;
  double rank5 = 0.0;
  double mAP = 0.0;
  std::size_t num_query = 0;
  std::size_t num_gallery = 0;
  std::size_t excluded_queries = 0;
  std::string metric = "euclidean";
};

MetricsReport compute_metrics(const DenseMatrix& distances, std::span<const std::string> query_subjects,
                              std::span<const std::string> gallery_subjects, DistanceMetric metric);

std::string to_json(const MetricsReport& report);

}  // namespace pgait
