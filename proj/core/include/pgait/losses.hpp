#pragma once

#include <cstdint>
#include <span>

#include "pgait/ops.hpp"

namespace pgait {

/// Batch-all triplet loss per part on euclidean distances, averaged over
/// parts. `embeddings` is [B, P, d]; `labels` holds one id per row.
template <typename T>
ad::Tensor<T> triplet_loss(const ad::Tensor<T>& embeddings, std::span<const std::int64_t> labels, T margin);

/// Cross-entropy of per-part logits [B, P, ids] against one label per row,
/// averaged over parts and batch. The per-part batch-norm and classifier
/// that produce the logits live in the model head.
template <typename T>
ad::Tensor<T> id_loss(const ad::Tensor<T>& logits, std::span<const std::int64_t> labels);

struct LossWeights {
  double alpha = 1.0;  // triplet
  double beta = 1.0;   // identity
  double margin = 0.2;
};

/// alpha * triplet + beta * id. A term whose weight is 0 is not evaluated.
template <typename T>
ad::Tensor<T> combined_loss(const ad::Tensor<T>& embeddings, const ad::Tensor<T>& logits,
                            std::span<const std::int64_t> labels, const LossWeights& weights);

}  // namespace pgait
