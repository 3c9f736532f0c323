#include "pgait/losses.hpp"

#include <vector>

#include "pgait/errors.hpp"

namespace pgait {

template <typename T>
ad::Tensor<T> triplet_loss(const ad::Tensor<T>& embeddings, std::span<const std::int64_t> labels, T margin) {
  if (embeddings.ndim() != 3) throw ShapeError("triplet_loss expects [B, P, d] embeddings");
  if (embeddings.dim(0) != static_cast<std::int64_t>(labels.size())) {
    throw ShapeError("triplet_loss: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(embeddings.dim(0)) + " rows");
  }
  const auto per_part = ad::permute(embeddings, {1, 0, 2});  // [P, B, d]
  return ad::triplet_batch_all(ad::pairwise_euclidean(per_part), labels, margin);
}

template <typename T>
ad::Tensor<T> id_loss(const ad::Tensor<T>& logits, std::span<const std::int64_t> labels) {
  if (logits.ndim() != 3) throw ShapeError("id_loss expects [B, P, ids] logits");
  const std::int64_t b = logits.dim(0), p = logits.dim(1), ids = logits.dim(2);
  if (b != static_cast<std::int64_t>(labels.size())) {
    throw ShapeError("id_loss: " + std::to_string(labels.size()) + " labels for " + std::to_string(b) + " rows");
  }
  std::vector<std::int64_t> targets;
  targets.reserve(static_cast<std::size_t>(b * p));
  for (std::int64_t i = 0; i < b; ++i) {
    const auto y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= ids) throw InvalidArgument("id_loss: label " + std::to_string(y) + " outside [0, " + std::to_string(ids) + ")");
    targets.insert(targets.end(), static_cast<std::size_t>(p), y);
  }
  return ad::softmax_cross_entropy(ad::reshape(logits, {b * p, ids}), targets);
}

template <typename T>
ad::Tensor<T> combined_loss(const ad::Tensor<T>& embeddings, const ad::Tensor<T>& logits,
                            std::span<const std::int64_t> labels, const LossWeights& w) {
  ad::Tensor<T> total;
  if (w.alpha != 0.0) {
    total = ad::scale(triplet_loss(embeddings, labels, static_cast<T>(w.margin)), static_cast<T>(w.alpha));
  }
  if (w.beta != 0.0) {
    if (!logits.defined()) throw InvalidArgument("combined_loss: identity term needs logits");
    auto ce = ad::scale(id_loss(logits, labels), static_cast<T>(w.beta));
    total = total.defined() ? ad::add(total, ce) : ce;
  }
  if (!total.defined()) throw InvalidArgument("combined_loss: both loss weights are zero");
  return total;
}

#define PGAIT_INSTANTIATE_LOSSES(T)                                                                     \
  template ad::Tensor<T> triplet_loss(const ad::Tensor<T>&, std::span<const std::int64_t>, T);          \
  template ad::Tensor<T> id_loss(const ad::Tensor<T>&, std::span<const std::int64_t>);                  \
  template ad::Tensor<T> combined_loss(const ad::Tensor<T>&, const ad::Tensor<T>&,                      \
                                       std::span<const std::int64_t>, const LossWeights&);

PGAIT_INSTANTIATE_LOSSES(float)
PGAIT_INSTANTIATE_LOSSES(double)

#undef PGAIT_INSTANTIATE_LOSSES

}  // namespace pgait
