#include "pgait/gradcheck.hpp"

#include <cmath>
#include <memory>
#include <random>

#include "pgait/heads.hpp"
#include "pgait/losses.hpp"
#include "pgait/ops.hpp"

namespace pgait {

using T64 = ad::Tensor<double>;

GradCheckResult grad_check(const ScalarFn& fn, const T64& input, double eps, double tol) {
  auto x = T64::from_data(input.shape(), std::vector<double>(input.data().begin(), input.data().end()), true);
  auto y = fn(x);
  y.backward();
  std::vector<double> analytic(x.grad().begin(), x.grad().end());
  if (analytic.empty()) analytic.assign(static_cast<std::size_t>(x.numel()), 0.0);

  GradCheckResult r;
  ad::NoGradGuard guard;
  auto probe = T64::from_data(input.shape(), std::vector<double>(input.data().begin(), input.data().end()));
  auto values = probe.data_mut();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double orig = values[i];
    values[i] = orig + eps;
    const double fp = fn(probe).item();
    values[i] = orig - eps;
    const double fm = fn(probe).item();
    values[i] = orig;
    const double numeric = (fp - fm) / (2.0 * eps);
    const double a = analytic[i];
    const double rel = std::abs(a - numeric) / std::max(1.0, std::abs(a) + std::abs(numeric));
    if (!std::isfinite(rel) || rel > r.max_rel_error || r.worst_index < 0) {
      r.max_rel_error = std::isfinite(rel) ? rel : std::numeric_limits<double>::infinity();
      r.worst_index = static_cast<std::int64_t>(i);
      r.analytic = a;
      r.numeric = numeric;
    }
  }
  r.passed = r.max_rel_error < tol;
  return r;
}

namespace {

using ad::Shape;

struct Suite {
  std::mt19937_64 rng;
  double tol;
  std::vector<GradCheckCase> cases;

  T64 uniform(const Shape& shape, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(static_cast<std::size_t>(ad::numel(shape)));
    for (auto& x : v) x = d(rng);
    return T64::from_data(shape, std::move(v));
  }

  // Values kept at least `gap` away from zero so kinks stay out of reach of
  // the finite-difference stencil.
  T64 away_from_zero(const Shape& shape, double gap = 0.05) {
    auto t = uniform(shape);
    for (auto& x : t.data_mut()) x = x < 0 ? x - gap : x + gap;
    return t;
  }

  T64 binary(const Shape& shape) {
    std::bernoulli_distribution d(0.5);
    std::vector<double> v(static_cast<std::size_t>(ad::numel(shape)));
    for (auto& x : v) x = d(rng) ? 1.0 : 0.0;
    return T64::from_data(shape, std::move(v));
  }

  // Reduces a tensor to a scalar via a fixed random weighting, so every
  // output element influences the checked value differently.
  ScalarFn reduced(std::function<T64(const T64&)> op) {
    auto weights = std::make_shared<T64>();
    auto seed = rng();
    return [op, weights, seed](const T64& x) {
      auto y = op(x);
      if (!weights->defined() || weights->shape() != y.shape()) {
        std::mt19937_64 local(seed);
        std::uniform_real_distribution<double> d(-1.0, 1.0);
        std::vector<double> v(static_cast<std::size_t>(y.numel()));
        for (auto& w : v) w = d(local);
        *weights = T64::from_data(y.shape(), std::move(v));
      }
      return ad::sum(ad::mul(y, *weights));
    };
  }

  void check(const std::string& name, const T64& input, const ScalarFn& fn) {
    cases.push_back({name, ad::to_string(input.shape()), grad_check(fn, input, 1e-5, tol)});
  }

  void check_op(const std::string& name, const T64& input, std::function<T64(const T64&)> op) {
    check(name, input, reduced(std::move(op)));
  }
};

void elementwise(Suite& s) {
  const std::vector<std::pair<Shape, Shape>> pairs{{{5}, {5}}, {{3, 4}, {4}}, {{2, 3, 4}, {2, 1, 4}}};
  for (const auto& [sa, sb] : pairs) {
    auto a = s.uniform(sa), b = s.uniform(sb);
    s.check_op("add/lhs", a, [b](const T64& x) { return ad::add(x, b); });
    s.check_op("add/rhs", b, [a](const T64& x) { return ad::add(a, x); });
    s.check_op("sub/lhs", a, [b](const T64& x) { return ad::sub(x, b); });
    s.check_op("sub/rhs", b, [a](const T64& x) { return ad::sub(a, x); });
    s.check_op("mul/lhs", a, [b](const T64& x) { return ad::mul(x, b); });
    s.check_op("mul/rhs", b, [a](const T64& x) { return ad::mul(a, x); });
  }
  for (const Shape& shape : {Shape{7}, Shape{3, 5}, Shape{2, 2, 3}}) {
    s.check_op("scale", s.uniform(shape), [](const T64& x) { return ad::scale(x, -1.7); });
    s.check_op("add_scalar", s.uniform(shape), [](const T64& x) { return ad::add_scalar(x, 0.3); });
    s.check_op("relu", s.away_from_zero(shape), [](const T64& x) { return ad::relu(x); });
    s.check("sum", s.uniform(shape), [](const T64& x) { return ad::sum(x); });
    s.check("mean", s.uniform(shape), [](const T64& x) { return ad::mean(x); });
  }
}

void structural(Suite& s) {
  const std::vector<std::pair<Shape, Shape>> reshapes{{{6}, {2, 3}}, {{2, 3, 4}, {4, 6}}, {{3, 4}, {12}}};
  for (const auto& [from, to] : reshapes) {
    s.check_op("reshape", s.uniform(from), [to](const T64& x) { return ad::reshape(x, to); });
  }
  const std::vector<std::pair<Shape, std::vector<int>>> perms{
      {{3, 4}, {1, 0}}, {{2, 3, 4}, {2, 0, 1}}, {{2, 3, 4, 2}, {0, 3, 1, 2}}};
  for (const auto& [shape, perm] : perms) {
    s.check_op("permute", s.uniform(shape), [perm](const T64& x) { return ad::permute(x, perm); });
  }
  struct ConcatCase {
    Shape a, b;
    int axis;
  };
  for (const auto& c : {ConcatCase{{2, 3}, {2, 5}, 1}, ConcatCase{{3, 2}, {1, 2}, 0}, ConcatCase{{2, 2, 3}, {2, 1, 3}, 1}}) {
    auto b = s.uniform(c.b);
    const int axis = c.axis;
    s.check_op("concat", s.uniform(c.a), [b, axis](const T64& x) { return ad::concat<double>({x, b}, axis); });
  }
  const std::vector<std::pair<Shape, int>> reductions{{{5}, 0}, {{3, 4}, 1}, {{2, 3, 4}, -2}};
  for (const auto& [shape, axis] : reductions) {
    const int ax = axis;
    s.check_op("max_over", s.uniform(shape), [ax](const T64& x) { return ad::max_over(x, ax); });
    s.check_op("mean_over", s.uniform(shape), [ax](const T64& x) { return ad::mean_over(x, ax); });
    s.check_op("l2_normalize", s.uniform(shape), [ax](const T64& x) { return ad::l2_normalize(x, ax); });
  }
}

void linear(Suite& s) {
  const std::vector<std::pair<Shape, Shape>> mm{
      {{3, 4}, {4, 2}}, {{2, 3, 4}, {4, 2}}, {{3, 4}, {2, 4, 3}}, {{2, 2, 3}, {2, 3, 2}}};
  for (const auto& [sa, sb] : mm) {
    auto a = s.uniform(sa), b = s.uniform(sb);
    s.check_op("matmul/lhs", a, [b](const T64& x) { return ad::matmul(x, b); });
    s.check_op("matmul/rhs", b, [a](const T64& x) { return ad::matmul(a, x); });
  }
  for (const Shape& xs : {Shape{3, 2}, Shape{2, 4, 3}, Shape{2, 2, 5, 2}}) {
    const std::int64_t nodes = xs[xs.size() - 2];
    auto adj = s.uniform({nodes, nodes}, 0.1, 0.9);
    adj.data_mut()[1] = 0.0;  // a missing edge
    auto x = s.uniform(xs);
    s.check_op("node_mix/features", x, [adj](const T64& in) { return ad::node_mix(adj, in); });
    s.check_op("node_mix/adjacency", adj, [x](const T64& in) { return ad::node_mix(in, x); });
  }
  struct ConvCase {
    Shape in, w;
    ad::Conv2dOptions opt;
  };
  const std::vector<ConvCase> convs{{{1, 2, 5, 5}, {3, 2, 3, 3}, {1, 1}},
                                    {{2, 1, 6, 5}, {2, 1, 3, 3}, {2, 1}},
                                    {{1, 3, 4, 4}, {2, 3, 1, 1}, {1, 0}},
                                    {{2, 2, 7, 6}, {2, 2, 3, 3}, {2, 0}}};
  for (const auto& c : convs) {
    auto in = s.uniform(c.in), w = s.uniform(c.w);
    const auto opt = c.opt;
    s.check_op("conv2d/input", in, [w, opt](const T64& x) { return ad::conv2d(x, w, opt); });
    s.check_op("conv2d/weight", w, [in, opt](const T64& x) { return ad::conv2d(in, x, opt); });
  }
  for (const Shape& shape : {Shape{4, 3}, Shape{2, 3, 4}, Shape{3, 2, 2, 2}}) {
    const Shape ch{shape[1]};
    auto x = s.uniform(shape), g = s.uniform(ch, 0.5, 1.5), b = s.uniform(ch);
    auto rm = T64::zeros(ch), rv = T64::full(ch, 1.0);
    ad::BatchNormOptions train;
    ad::BatchNormOptions eval;
    eval.training = false;
    s.check_op("batch_norm/input", x, [=](const T64& in) { return ad::batch_norm(in, g, b, rm, rv, train); });
    s.check_op("batch_norm/gamma", g, [=](const T64& in) { return ad::batch_norm(x, in, b, rm, rv, train); });
    s.check_op("batch_norm/beta", b, [=](const T64& in) { return ad::batch_norm(x, g, in, rm, rv, train); });
    auto erm = s.uniform(ch), erv = s.uniform(ch, 0.5, 2.0);
    s.check_op("batch_norm/eval", x, [=](const T64& in) { return ad::batch_norm(in, g, b, erm, erv, eval); });
  }
}

void losses(Suite& s) {
  const std::vector<std::pair<Shape, std::vector<std::int64_t>>> ce{
      {{3, 4}, {0, 3, 1}}, {{5, 2}, {1, 0, 0, 1, 1}}, {{2, 6}, {5, 2}}};
  for (const auto& [shape, targets] : ce) {
    auto t = targets;
    s.check("softmax_cross_entropy", s.uniform(shape, -2.0, 2.0),
            [t](const T64& x) { return ad::softmax_cross_entropy(x, t); });
  }
  for (const Shape& shape : {Shape{1, 4, 3}, Shape{2, 5, 2}, Shape{3, 3, 4}}) {
    s.check_op("pairwise_euclidean", s.uniform(shape), [](const T64& x) { return ad::pairwise_euclidean(x); });
  }
  const std::vector<std::vector<std::int64_t>> label_sets{{0, 0, 1, 1}, {0, 0, 1, 1, 2}, {0, 1, 2, 0, 1, 2}};
  for (const auto& labels : label_sets) {
    const auto b = static_cast<std::int64_t>(labels.size());
    auto d = s.uniform({2, b, b}, 0.1, 1.0);
    s.check("triplet_batch_all", d, [labels](const T64& x) { return ad::triplet_batch_all(x, labels, 0.5); });
    s.check("triplet_loss", s.uniform({b, 3, 2}),
            [labels](const T64& x) { return triplet_loss<double>(x, labels, 0.5); });
    s.check("id_loss", s.uniform({b, 2, 3}, -2.0, 2.0), [labels](const T64& x) { return id_loss<double>(x, labels); });
    auto logits = s.uniform({b, 2, 3});
    LossWeights w{1.0, 1.0, 0.5};
    s.check("combined_loss/embeddings", s.uniform({b, 2, 3}),
            [labels, logits, w](const T64& x) { return combined_loss<double>(x, logits, labels, w); });
  }
}

void head_blocks(Suite& s) {
  struct TmCase {
    int batch, frames;
    Shape rest;
  };
  for (const auto& c : {TmCase{2, 3, {2, 2, 2}}, TmCase{1, 4, {1, 3, 2}}, TmCase{3, 2, {2, 4, 1}}}) {
    const Shape shape{c.batch * c.frames, c.rest[0], c.rest[1], c.rest[2]};
    const int b = c.batch, f = c.frames;
    s.check_op("temporal_max", s.uniform(shape), [b, f](const T64& x) { return heads::temporal_max(x, b, f); });
  }
  const std::vector<std::pair<Shape, std::vector<int>>> hpp{
      {{2, 3, 4, 2}, {1, 2, 4}}, {{1, 2, 2, 3}, {1, 2}}, {{2, 2, 6, 1}, {1, 2, 3}}};
  for (const auto& [shape, bins] : hpp) {
    auto bn = bins;
    s.check_op("horizontal_pyramid_pool", s.uniform(shape),
               [bn](const T64& x) { return heads::horizontal_pyramid_pool(x, bn); });
  }
  struct RegionCase {
    std::int64_t bn, c, nodes, h, w;
  };
  for (const auto& r : {RegionCase{2, 3, 2, 2, 2}, RegionCase{1, 2, 3, 3, 2}, RegionCase{3, 2, 2, 2, 3}}) {
    auto f = s.uniform({r.bn, r.c, r.h, r.w});
    auto m = s.binary({r.bn, r.nodes, r.h, r.w});
    auto g = s.uniform({r.nodes}, 0.2, 0.9);
    s.check_op("regional_feature_maps/features", f,
               [m, g](const T64& x) { return heads::regional_feature_maps(x, m, g); });
    s.check_op("regional_feature_maps/gamma", g,
               [f, m](const T64& x) { return heads::regional_feature_maps(f, m, x); });
    auto one = s.uniform({r.c, r.h, r.w});
    auto mask = s.binary({r.h, r.w});
    auto gamma = s.uniform({1}, 0.2, 0.9);
    s.check_op("regional_features/gamma", gamma,
               [one, mask](const T64& x) { return heads::regional_features(one, mask, x); });
    s.check_op("regional_pooling", s.uniform({r.bn, r.nodes, r.c, r.h * r.w}),
               [](const T64& x) { return heads::regional_pooling(x); });
  }
  for (const auto& [nodes, cin, cout] : {std::tuple<int, int, int>{2, 3, 2}, {5, 2, 3}, {3, 4, 4}}) {
    auto a = s.uniform({nodes, nodes}, 0.0, 0.6);
    auto x = s.uniform({2, nodes, cin}), w = s.uniform({cin, cout});
    s.check_op("gcn_layer/features", x, [a, w](const T64& in) { return heads::gcn_layer(in, a, w); });
    s.check_op("gcn_layer/weight", w, [a, x](const T64& in) { return heads::gcn_layer(x, a, in); });
  }
  for (const auto& [b, p, c, d] : {std::tuple<int, int, int, int>{2, 3, 2, 2}, {1, 2, 3, 4}, {3, 4, 2, 3}}) {
    auto x = s.uniform({b, p, c}), w = s.uniform({p, c, d});
    s.check_op("separate_fc/input", x, [w](const T64& in) { return heads::separate_fc(in, w); });
    s.check_op("separate_fc/weight", w, [x](const T64& in) { return heads::separate_fc(x, in); });
  }
}

// Masked regional features -> regional pooling -> two GCN layers -> temporal
// max, concatenated with HPP strips, per-part FC, then triplet + BN-neck
// classifier cross-entropy.
struct Chain {
  int batch, frames, c, nodes, h, w, d, ids;
  std::vector<int> bins;
  T64 features, masks, gammas, adjacency, w1, w2, fc, bn_g, bn_b, cls;
  std::vector<std::int64_t> labels;

  T64 loss(const T64& f, const T64& gam, const T64& gw1, const T64& gfc, const T64& gcls) const {
    auto strips = heads::horizontal_pyramid_pool(heads::temporal_max(f, batch, frames), bins);
    auto x = heads::regional_pooling(heads::regional_feature_maps(f, masks, gam));
    x = heads::gcn_layer(heads::gcn_layer(x, adjacency, gw1), adjacency, w2);
    auto node_feats = ad::max_over(ad::reshape(x, {batch, frames, nodes, c}), 1);
    auto emb = heads::separate_fc(ad::concat<double>({strips, node_feats}, 1), gfc);
    const std::int64_t p = emb.dim(1);
    auto rm = T64::zeros({p * d}), rv = T64::full({p * d}, 1.0);
    auto normed = ad::reshape(ad::batch_norm(ad::reshape(emb, {batch, p * d}), bn_g, bn_b, rm, rv), {batch, p, d});
    auto logits = ad::permute(ad::matmul(ad::permute(normed, {1, 0, 2}), gcls), {1, 0, 2});
    return combined_loss<double>(emb, logits, labels, LossWeights{1.0, 1.0, 0.5});
  }
};

void composite(Suite& s) {
  struct Dims {
    int batch, frames, c, nodes, h, w, d, ids;
    std::vector<int> bins;
    std::vector<std::int64_t> labels;
  };
  const std::vector<Dims> dims{{4, 2, 3, 2, 4, 2, 2, 2, {1, 2}, {0, 0, 1, 1}},
                               {4, 3, 2, 3, 2, 2, 3, 2, {1, 2}, {0, 1, 0, 1}},
                               {5, 2, 2, 2, 4, 3, 2, 3, {1, 4}, {0, 0, 1, 1, 2}}};
  for (const auto& dm : dims) {
    Chain ch{dm.batch, dm.frames, dm.c, dm.nodes, dm.h, dm.w, dm.d, dm.ids, dm.bins, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, dm.labels};
    const int bn = dm.batch * dm.frames;
    const int p = [&] {
      int n = dm.nodes;
      for (int b : dm.bins) n += b;
      return n;
    }();
    ch.features = s.uniform({bn, dm.c, dm.h, dm.w});
    ch.masks = s.binary({bn, dm.nodes, dm.h, dm.w});
    ch.gammas = s.uniform({dm.nodes}, 0.6, 0.9);
    ch.adjacency = s.uniform({dm.nodes, dm.nodes}, 0.1, 0.6);
    ch.w1 = s.uniform({dm.c, dm.c}, 0.1, 1.0);
    ch.w2 = s.uniform({dm.c, dm.c}, 0.1, 1.0);
    ch.fc = s.uniform({p, dm.c, dm.d});
    ch.bn_g = s.uniform({p * dm.d}, 0.5, 1.5);
    ch.bn_b = s.uniform({p * dm.d});
    ch.cls = s.uniform({p, dm.d, dm.ids});
    s.check("chain/features", ch.features,
            [ch](const T64& x) { return ch.loss(x, ch.gammas, ch.w1, ch.fc, ch.cls); });
    s.check("chain/gamma", ch.gammas,
            [ch](const T64& x) { return ch.loss(ch.features, x, ch.w1, ch.fc, ch.cls); });
    s.check("chain/gcn_weight", ch.w1,
            [ch](const T64& x) { return ch.loss(ch.features, ch.gammas, x, ch.fc, ch.cls); });
    s.check("chain/fc_weight", ch.fc,
            [ch](const T64& x) { return ch.loss(ch.features, ch.gammas, ch.w1, x, ch.cls); });
    s.check("chain/classifier", ch.cls,
            [ch](const T64& x) { return ch.loss(ch.features, ch.gammas, ch.w1, ch.fc, x); });
  }
}

}  // namespace

std::vector<GradCheckCase> run_gradcheck_suite(std::uint64_t seed, double tol) {
  Suite s{std::mt19937_64(seed), tol, {}};
  elementwise(s);
  structural(s);
  linear(s);
  losses(s);
  head_blocks(s);
  composite(s);
  return std::move(s.cases);
}

}  // namespace pgait
