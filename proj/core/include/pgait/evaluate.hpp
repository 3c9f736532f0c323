#pragma once

#include <span>

#include "pgait/dataset.hpp"
#include "pgait/metrics.hpp"
#include "pgait/model.hpp"

namespace pgait {

/// Eval-mode embeddings of whole sequences (no cropping), in entry order.
/// Decode failures are reported with the sequence id.
EmbeddingSet extract_embeddings(const ParsingGaitModel& model, const DatasetManifest& manifest,
                                std::span<const ManifestEntry* const> entries, unsigned threads = 0);

struct EvalOptions {
  DistanceMetric metric = DistanceMetric::kEuclidean;
  DistanceMode mode = DistanceMode::kPerPart;
  unsigned threads = 0;
};

/// Query/gallery retrieval over the manifest's test split.
MetricsReport evaluate(const ParsingGaitModel& model, const DatasetManifest& manifest, const EvalOptions& options = {});

}  // namespace pgait
