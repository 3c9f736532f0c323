#pragma once

#include <vector>

#include "pgait/ops.hpp"

// Building blocks of the two ParsingGait heads, written against the generic
// Tensor<T> so they can be gradient-checked in double precision and run in
// float during training.
namespace pgait::heads {

using ad::Tensor;

/// Elementwise max over the frames of each sequence:
/// [B*N, c, h, w] -> [B, c, h, w].
template <typename T>
Tensor<T> temporal_max(const Tensor<T>& frame_features, int batch, int frames);

/// Horizontal pyramid pooling: for every scale s the height is split into s
/// strips and each strip is reduced by max + mean over its spatial extent.
/// [B, c, h, w] -> [B, sum(bins), c], strips in pyramid order (top to bottom
/// within a scale). Every bin must divide h.
template <typename T>
Tensor<T> horizontal_pyramid_pool(const Tensor<T>& features, const std::vector<int>& bins);

/// Per-pixel blend weights gamma_k * M + (1 - gamma_k) * (1 - M) for binary
/// masks [..., C, 1, S] and gammas [C]; result has the shape of `masks`.
template <typename T>
Tensor<T> blend_weights(const Tensor<T>& masks, const Tensor<T>& gammas);

/// Regional feature map of one part: gamma * F (.) M + (1 - gamma) * F (.) (1 - M)
/// for F [c, h, w], a binary mask [h, w] and a scalar gamma tensor.
template <typename T>
Tensor<T> regional_features(const Tensor<T>& feature_map, const Tensor<T>& mask, const Tensor<T>& gamma);

/// Batched form: F [BN, c, h, w], masks [BN, C, h, w] -> [BN, C, c, h*w].
template <typename T>
Tensor<T> regional_feature_maps(const Tensor<T>& features, const Tensor<T>& masks, const Tensor<T>& gammas);

/// Regional pooling (global max + global mean) over the last axis:
/// [..., S] -> [...].
template <typename T>
Tensor<T> regional_pooling(const Tensor<T>& region_maps);

/// One graph-convolution layer relu(A_hat X W). X is [..., C, c_in], A_hat
/// [C, C] and W [c_in, c_out].
template <typename T>
Tensor<T> gcn_layer(const Tensor<T>& x, const Tensor<T>& normalized_adjacency, const Tensor<T>& weight);

/// Independent linear map per part: X [B, P, c], W [P, c, d] -> [B, P, d].
template <typename T>
Tensor<T> separate_fc(const Tensor<T>& x, const Tensor<T>& weight);

}  // namespace pgait::heads
