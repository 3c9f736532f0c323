#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pgait/tensor.hpp"

// Differentiable primitives. Every function here has a forward contract and
// an adjoint; all of them are exercised by the finite-difference suite in
// gradcheck.hpp. Explicitly instantiated for float and double.
namespace pgait::ad {

// Elementwise arithmetic with numpy-style broadcasting (right-aligned dims,
// size-1 dims stretch).
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, T value);
template <typename T> Tensor<T> relu(const Tensor<T>& a);

template <typename T> Tensor<T> reshape(const Tensor<T>& a, Shape shape);
template <typename T> Tensor<T> permute(const Tensor<T>& a, const std::vector<int>& perm);
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis);

/// Maximum along `axis` (which is removed). The gradient goes to the first
/// maximal element in scan order.
template <typename T> Tensor<T> max_over(const Tensor<T>& a, int axis);
template <typename T> Tensor<T> mean_over(const Tensor<T>& a, int axis);
template <typename T> Tensor<T> sum(const Tensor<T>& a);
template <typename T> Tensor<T> mean(const Tensor<T>& a);

/// x / max(||x||, eps) along `axis`.
template <typename T> Tensor<T> l2_normalize(const Tensor<T>& a, int axis, T eps = T(1e-12));

/// Matrix product over the last two dims. Supported operand forms:
/// [..., m, k] x [k, n], [m, k] x [..., k, n], and [b..., m, k] x [b..., k, n].
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

/// Graph aggregation adjacency [C, C] x features [..., C, c] -> [..., C, c].
/// Each output sums the nonzero terms a_ij * x_jf in ascending order of
/// value, so relabelling the nodes permutes the result bit for bit.
template <typename T> Tensor<T> node_mix(const Tensor<T>& adjacency, const Tensor<T>& x);

struct Conv2dOptions {
  int stride = 1;
  int padding = 0;
};

/// Cross-correlation of input [N, C_in, H, W] with weight [C_out, C_in, kh, kw].
/// Output spatial size is floor((H + 2p - kh) / s) + 1.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, Conv2dOptions opt = {});

struct BatchNormOptions {
  bool training = true;
  double momentum = 0.1;
  double eps = 1e-5;
};

/// Batch normalisation over axis 1 of an [N, C, ...] tensor. In training mode
/// the batch statistics are used and the running buffers are updated in place
/// (running_var receives the unbiased estimate); in eval mode the running
/// buffers are used.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                     Tensor<T> running_mean, Tensor<T> running_var, BatchNormOptions opt = {});

/// Mean over rows of -log softmax(logits)[target]; logits are [B, C].
template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const std::int64_t> targets);

/// All-pairs euclidean distances within each group: [G, B, d] -> [G, B, B].
/// Computed as sqrt(|xi - xj|^2 + eps) so the adjoint stays finite at zero.
template <typename T> Tensor<T> pairwise_euclidean(const Tensor<T>& x, T eps = T(1e-12));

/// Batch-all hinge triplet loss over a [G, B, B] distance tensor. For each
/// group: mean of max(0, d(a,p) - d(a,n) + margin) over the terms that are
/// strictly positive (0 if none are); the result is averaged over groups.
/// Throws if the labels admit no (anchor, positive, negative) triple.
template <typename T>
Tensor<T> triplet_batch_all(const Tensor<T>& distances, std::span<const std::int64_t> labels,
                            T margin);

}  // namespace pgait::ad
