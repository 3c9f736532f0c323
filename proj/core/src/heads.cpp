#include "pgait/heads.hpp"

#include "pgait/errors.hpp"

namespace pgait::heads {

template <typename T>
Tensor<T> temporal_max(const Tensor<T>& frame_features, int batch, int frames) {
  if (frame_features.ndim() != 4) throw ShapeError("temporal_max expects [B*N, c, h, w]");
  if (batch < 1 || frames < 1) throw InvalidArgument("temporal_max needs at least one frame");
  if (frame_features.dim(0) != static_cast<std::int64_t>(batch) * frames) {
    throw ShapeError("temporal_max: leading dim " + std::to_string(frame_features.dim(0)) + " != " +
                     std::to_string(batch) + "x" + std::to_string(frames));
  }
  const auto& s = frame_features.shape();
  auto x = ad::reshape(frame_features, {batch, frames, s[1], s[2], s[3]});
  return ad::max_over(x, 1);
}

template <typename T>
Tensor<T> horizontal_pyramid_pool(const Tensor<T>& features, const std::vector<int>& bins) {
  if (features.ndim() != 4) throw ShapeError("horizontal_pyramid_pool expects [B, c, h, w]");
  const std::int64_t b = features.dim(0), c = features.dim(1), h = features.dim(2), w = features.dim(3);
  std::vector<Tensor<T>> strips;
  for (int s : bins) {
    if (s < 1 || h % s != 0) {
      throw ConfigError("HPP bin " + std::to_string(s) + " does not divide feature height " + std::to_string(h));
    }
    auto x = ad::reshape(features, {b, c, s, (h / s) * w});
    strips.push_back(ad::add(ad::max_over(x, 3), ad::mean_over(x, 3)));  // [B, c, s]
  }
  auto all = ad::concat(strips, 2);      // [B, c, P]
  return ad::permute(all, {0, 2, 1});    // [B, P, c]
}

template <typename T>
Tensor<T> blend_weights(const Tensor<T>& masks, const Tensor<T>& gammas) {
  // gamma*M + (1-gamma)*(1-M) == (1 - M) + gamma * (2M - 1)
  if (masks.ndim() < 3) throw ShapeError("blend_weights expects [..., C, 1, S] masks");
  const std::int64_t c = masks.dim(-3);
  if (gammas.numel() != c) {
    throw ShapeError("blend_weights: " + std::to_string(gammas.numel()) + " gammas for " + std::to_string(c) +
                     " nodes");
  }
  std::vector<T> complement(masks.data().begin(), masks.data().end());
  std::vector<T> signed_mask(complement);
  for (auto& v : complement) v = T(1) - v;
  for (auto& v : signed_mask) v = T(2) * v - T(1);
  auto inv = Tensor<T>::from_data(masks.shape(), std::move(complement));
  auto sgn = Tensor<T>::from_data(masks.shape(), std::move(signed_mask));
  auto g = ad::reshape(gammas, {c, 1, 1});
  return ad::add(inv, ad::mul(sgn, g));
}

template <typename T>
Tensor<T> regional_features(const Tensor<T>& feature_map, const Tensor<T>& mask, const Tensor<T>& gamma) {
  if (feature_map.ndim() != 3 || mask.ndim() != 2) {
    throw ShapeError("regional_features expects F [c, h, w] and mask [h, w]");
  }
  if (feature_map.dim(1) != mask.dim(0) || feature_map.dim(2) != mask.dim(1)) {
    throw ShapeError("regional_features: mask " + ad::to_string(mask.shape()) + " does not match feature map " +
                     ad::to_string(feature_map.shape()));
  }
  if (gamma.numel() != 1) throw ShapeError("regional_features: gamma must be a scalar");
  const std::int64_t h = mask.dim(0), w = mask.dim(1);
  auto weights = blend_weights(ad::reshape(mask.detach(), {1, 1, h * w}), ad::reshape(gamma, {1}));
  return ad::mul(feature_map, ad::reshape(weights, {1, h, w}));
}

template <typename T>
Tensor<T> regional_feature_maps(const Tensor<T>& features, const Tensor<T>& masks, const Tensor<T>& gammas) {
  if (features.ndim() != 4 || masks.ndim() != 4) {
    throw ShapeError("regional_feature_maps expects F [BN, c, h, w] and masks [BN, C, h, w]");
  }
  const std::int64_t bn = features.dim(0), c = features.dim(1), h = features.dim(2), w = features.dim(3);
  if (masks.dim(0) != bn || masks.dim(2) != h || masks.dim(3) != w) {
    throw ShapeError("regional_feature_maps: masks " + ad::to_string(masks.shape()) + " vs features " +
                     ad::to_string(features.shape()));
  }
  const std::int64_t nodes = masks.dim(1);
  auto weights = blend_weights(ad::reshape(masks, {bn, nodes, 1, h * w}), gammas);  // [BN, C, 1, S]
  auto f = ad::reshape(features, {bn, 1, c, h * w});
  return ad::mul(f, weights);  // [BN, C, c, S]
}

template <typename T>
Tensor<T> regional_pooling(const Tensor<T>& region_maps) {
  return ad::add(ad::max_over(region_maps, -1), ad::mean_over(region_maps, -1));
}

template <typename T>
Tensor<T> gcn_layer(const Tensor<T>& x, const Tensor<T>& normalized_adjacency, const Tensor<T>& weight) {
  if (normalized_adjacency.ndim() != 2 || normalized_adjacency.dim(0) != normalized_adjacency.dim(1)) {
    throw ShapeError("gcn_layer: adjacency must be square");
  }
  if (x.ndim() < 2 || x.dim(-2) != normalized_adjacency.dim(0)) {
    throw ShapeError("gcn_layer: features " + ad::to_string(x.shape()) + " vs adjacency " +
                     ad::to_string(normalized_adjacency.shape()));
  }
  if (weight.ndim() != 2 || weight.dim(0) != x.dim(-1)) {
    throw ShapeError("gcn_layer: weight " + ad::to_string(weight.shape()) + " vs features " +
                     ad::to_string(x.shape()));
  }
  auto mixed = ad::node_mix(normalized_adjacency, x);
  return ad::relu(ad::matmul(mixed, weight));
}

template <typename T>
Tensor<T> separate_fc(const Tensor<T>& x, const Tensor<T>& weight) {
  if (x.ndim() != 3 || weight.ndim() != 3 || x.dim(1) != weight.dim(0) || x.dim(2) != weight.dim(1)) {
    throw ShapeError("separate_fc: input " + ad::to_string(x.shape()) + " vs weight " +
                     ad::to_string(weight.shape()));
  }
  auto per_part = ad::permute(x, {1, 0, 2});            // [P, B, c]
  auto projected = ad::matmul(per_part, weight);         // [P, B, d]
  return ad::permute(projected, {1, 0, 2});              // [B, P, d]
}

#define PGAIT_INSTANTIATE_HEADS(T)                                                                 \
  template Tensor<T> temporal_max(const Tensor<T>&, int, int);                                     \
  template Tensor<T> horizontal_pyramid_pool(const Tensor<T>&, const std::vector<int>&);           \
  template Tensor<T> blend_weights(const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> regional_features(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);      \
  template Tensor<T> regional_feature_maps(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);  \
  template Tensor<T> regional_pooling(const Tensor<T>&);                                           \
  template Tensor<T> gcn_layer(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> separate_fc(const Tensor<T>&, const Tensor<T>&);

PGAIT_INSTANTIATE_HEADS(float)
PGAIT_INSTANTIATE_HEADS(double)

#undef PGAIT_INSTANTIATE_HEADS

}  // namespace pgait::heads
