#include "pgait/evaluate.hpp"

#include "pgait/errors.hpp"
#include "pgait/parallel.hpp"

namespace pgait {

EmbeddingSet extract_embeddings(const ParsingGaitModel& model, const DatasetManifest& manifest,
                                std::span<const ManifestEntry* const> entries, unsigned threads) {
  std::vector<Embedding> rows(entries.size());
  parallel_for(entries.size(), threads, [&](std::size_t i) { rows[i] = model.embed(manifest.load(*entries[i])); });
  EmbeddingSet set;
  set.parts = model.config().num_parts();
  set.dim = model.config().embedding_dim;
  for (std::size_t i = 0; i < entries.size(); ++i) set.add(entries[i]->sequence_id, entries[i]->subject_id, rows[i]);
  set.validate();
  return set;
}

MetricsReport evaluate(const ParsingGaitModel& model, const DatasetManifest& manifest, const EvalOptions& options) {
  const auto queries = manifest.query_entries();
  const auto gallery = manifest.gallery_entries();
  if (queries.empty()) throw InvalidArgument("split has no query sequences");
  if (gallery.empty()) throw InvalidArgument("empty gallery");
  const auto q = extract_embeddings(model, manifest, queries, options.threads);
  const auto g = extract_embeddings(model, manifest, gallery, options.threads);
  const auto d = distance_matrix(q, g, options.metric, options.mode);
  return compute_metrics(d, q.subject_ids, g.subject_ids, options.metric);
}

}  // namespace pgait
