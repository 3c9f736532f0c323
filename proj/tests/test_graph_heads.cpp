#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "pgait/errors.hpp"
#include "pgait/heads.hpp"
#include "pgait/partgraph.hpp"

namespace pgait {
namespace {

using TF = ad::Tensor<float>;
using TD = ad::Tensor<double>;

template <typename T>
ad::Tensor<T> rand_t(std::mt19937_64& rng, ad::Shape s) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<T> v(static_cast<std::size_t>(ad::numel(s)));
  for (auto& x : v) x = static_cast<T>(n(rng));
  return ad::Tensor<T>::from_data(std::move(s), std::move(v));
}

DenseMatrix permuted(const DenseMatrix& a, const std::vector<int>& perm) {
  // out[i][j] = a[perm[i]][perm[j]]
  DenseMatrix out(a.rows, a.cols);
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < a.cols; ++j) out(i, j) = a(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  return out;
}

TEST(PartGraph, ZeroEdgeNormalisationIsIdentity) {
  for (int n : {1, 3, 11}) {
    const auto norm = normalize_adjacency(DenseMatrix(n, n));
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) EXPECT_EQ(norm(i, j), i == j ? 1.0 : 0.0);
    }
  }
}

TEST(PartGraph, TwoNodePathIsAllHalves) {
  DenseMatrix a(2, 2);
  a(0, 1) = a(1, 0) = 1.0;
  const auto norm = normalize_adjacency(a);
  for (double v : norm.values) EXPECT_EQ(v, 0.5);
}

TEST(PartGraph, NormalisationMatchesFormula) {
  for (const auto& g : {fine_graph(), coarse_graph()}) {
    const int n = g.node_count();
    std::vector<double> deg(static_cast<std::size_t>(n), 1.0);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) deg[static_cast<std::size_t>(i)] += g.adjacency(i, j);
    }
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double a = g.adjacency(i, j) + (i == j ? 1.0 : 0.0);
        EXPECT_NEAR(g.normalized(i, j), a / std::sqrt(deg[static_cast<std::size_t>(i)] * deg[static_cast<std::size_t>(j)]), 1e-15);
      }
    }
  }
}

TEST(PartGraph, RejectsAsymmetricAdjacency) {
  DenseMatrix a(2, 2);
  a(0, 1) = 1.0;
  EXPECT_THROW(normalize_adjacency(a), InvalidArgument);
  EXPECT_THROW(normalize_adjacency(DenseMatrix(2, 3)), InvalidArgument);
}

TEST(PartGraph, GroupingCoversEveryPartOnce) {
  for (const auto& g : {fine_graph(), coarse_graph()}) {
    std::vector<int> seen(kNumLabels, 0);
    for (const auto& labels : g.node_labels) {
      for (auto l : labels) ++seen[l];
    }
    EXPECT_EQ(seen[0], 0);
    for (int l = 1; l < kNumLabels; ++l) EXPECT_EQ(seen[static_cast<std::size_t>(l)], 1) << l;
    EXPECT_EQ(g.node_of(0), -1);
  }
  const auto c = coarse_graph();
  EXPECT_EQ(c.node_count(), 5);
  EXPECT_EQ(c.node_of(static_cast<std::uint8_t>(Part::kHead)), c.node_of(static_cast<std::uint8_t>(Part::kDress)));
  EXPECT_EQ(c.node_of(static_cast<std::uint8_t>(Part::kLeftHand)), c.node_of(static_cast<std::uint8_t>(Part::kLeftArm)));
  EXPECT_EQ(fine_graph().node_count(), 11);
}

TEST(PartGraph, GroupMask) {
  ParsingFrame f(1, 5, {0, 3, 5, 4, 1});
  const auto c = coarse_graph();
  EXPECT_EQ(group_mask(f, c, c.node_of(3)), (std::vector<std::uint8_t>{0, 1, 1, 0, 0}));
  EXPECT_THROW(group_mask(f, c, 9), InvalidArgument);
}

TEST(Gcn, PermutationEquivarianceIsBitExact) {
  std::mt19937_64 rng(17);
  for (const auto& g : {fine_graph(), coarse_graph()}) {
    const int n = g.node_count();
    auto to_tensor = [n](const DenseMatrix& m) {
      return TF::from_data({n, n}, std::vector<float>(m.values.begin(), m.values.end()));
    };
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<int> perm(static_cast<std::size_t>(n));
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      const int c = 8;
      auto x = rand_t<float>(rng, {3, n, c});
      auto w = rand_t<float>(rng, {c, c});
      // x permuted along the node axis
      std::vector<float> xp(x.data().begin(), x.data().end());
      for (int b = 0; b < 3; ++b) {
        for (int i = 0; i < n; ++i) {
          for (int f = 0; f < c; ++f) {
            xp[static_cast<std::size_t>((b * n + i) * c + f)] = x.at({b, perm[static_cast<std::size_t>(i)], f});
          }
        }
      }
      auto px = TF::from_data({3, n, c}, xp);
      const auto a = to_tensor(g.normalized);
      const auto ap = to_tensor(normalize_adjacency(permuted(g.adjacency, perm)));
      auto y = heads::gcn_layer(heads::gcn_layer(x, a, w), a, w);
      auto yp = heads::gcn_layer(heads::gcn_layer(px, ap, w), ap, w);
      for (int b = 0; b < 3; ++b) {
        for (int i = 0; i < n; ++i) {
          for (int f = 0; f < c; ++f) {
            ASSERT_EQ(yp.at({b, i, f}), y.at({b, perm[static_cast<std::size_t>(i)], f}));
          }
        }
      }
    }
  }
}

TEST(Gcn, MatchesDenseFormula) {
  std::mt19937_64 rng(4);
  const auto g = coarse_graph();
  auto a = TD::from_data({5, 5}, g.normalized.values);
  auto x = rand_t<double>(rng, {5, 3});
  auto w = rand_t<double>(rng, {3, 2});
  auto y = heads::gcn_layer(x, a, w);
  for (int i = 0; i < 5; ++i) {
    for (int o = 0; o < 2; ++o) {
      double s = 0.0;
      for (int j = 0; j < 5; ++j) {
        for (int k = 0; k < 3; ++k) s += g.normalized(i, j) * x.at({j, k}) * w.at({k, o});
      }
      EXPECT_NEAR(y.at({i, o}), std::max(0.0, s), 1e-12);
    }
  }
}

TEST(Heads, HalfGammaIgnoresMasks) {
  std::mt19937_64 rng(9);
  std::bernoulli_distribution coin(0.5);
  auto f = rand_t<float>(rng, {2, 4, 3, 5});
  auto gamma = TF::full({3}, 0.5f);
  auto masks = [&]() {
    std::vector<float> v(2 * 3 * 3 * 5);
    for (auto& m : v) m = coin(rng) ? 1.0f : 0.0f;
    return TF::from_data({2, 3, 3, 5}, v);
  };
  auto ref = heads::regional_feature_maps(f, masks(), gamma);
  for (int t = 0; t < 10; ++t) {
    auto other = heads::regional_feature_maps(f, masks(), gamma);
    ASSERT_TRUE(std::equal(ref.data().begin(), ref.data().end(), other.data().begin()));
  }
}

TEST(Heads, UnitGammaZeroesBackground) {
  std::mt19937_64 rng(10);
  auto f = rand_t<float>(rng, {1, 2, 2, 3});
  auto m = TF::from_data({1, 1, 2, 3}, {1, 0, 0, 1, 1, 0});
  auto y = heads::regional_feature_maps(f, m, TF::full({1}, 1.0f));
  ASSERT_EQ(y.shape(), (ad::Shape{1, 1, 2, 6}));
  for (int ch = 0; ch < 2; ++ch) {
    for (int s = 0; s < 6; ++s) {
      const float mask = m.data()[static_cast<std::size_t>(s)];
      const float v = y.at({0, 0, ch, s});
      if (mask == 0.0f) {
        EXPECT_EQ(v, 0.0f);
      } else {
        EXPECT_EQ(v, f.data()[static_cast<std::size_t>(ch * 6 + s)]);
      }
    }
  }
}

TEST(Heads, RegionalFeaturesFollowBlendFormula) {
  std::mt19937_64 rng(11);
  auto f = rand_t<double>(rng, {2, 2, 2});
  auto m = TD::from_data({2, 2}, {1, 0, 0, 1});
  auto y = heads::regional_features(f, m, TD::scalar(0.75).detach());
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        const double mk = m.at({i, j});
        EXPECT_NEAR(y.at({c, i, j}), 0.75 * f.at({c, i, j}) * mk + 0.25 * f.at({c, i, j}) * (1 - mk), 1e-15);
      }
    }
  }
}

TEST(Heads, RegionalPoolingIsMaxPlusMean) {
  auto x = TD::from_data({1, 4}, {1, -2, 5, 0});
  EXPECT_DOUBLE_EQ(heads::regional_pooling(x).item(), 5.0 + 1.0);
}

TEST(Heads, HorizontalPyramidMatchesStripOracle) {
  std::mt19937_64 rng(12);
  auto x = rand_t<double>(rng, {2, 3, 4, 2});
  auto y = heads::horizontal_pyramid_pool(x, {1, 2, 4});
  ASSERT_EQ(y.shape(), (ad::Shape{2, 7, 3}));
  int p = 0;
  for (int s : {1, 2, 4}) {
    for (int strip = 0; strip < s; ++strip, ++p) {
      for (int b = 0; b < 2; ++b) {
        for (int c = 0; c < 3; ++c) {
          double mx = -1e300, sum = 0;
          int cnt = 0;
          for (int r = strip * 4 / s; r < (strip + 1) * 4 / s; ++r) {
            for (int col = 0; col < 2; ++col) {
              mx = std::max(mx, x.at({b, c, r, col}));
              sum += x.at({b, c, r, col});
              ++cnt;
            }
          }
          EXPECT_NEAR(y.at({b, p, c}), mx + sum / cnt, 1e-12);
        }
      }
    }
  }
  EXPECT_THROW(heads::horizontal_pyramid_pool(x, {3}), ConfigError);
}

TEST(Heads, TemporalMaxIsOrderFree) {
  std::mt19937_64 rng(13);
  auto x = rand_t<float>(rng, {6, 2, 2, 2});
  std::vector<float> rev;
  for (int f = 5; f >= 0; --f) {
    const auto off = static_cast<std::size_t>(f * 8);
    rev.insert(rev.end(), x.data().begin() + static_cast<std::ptrdiff_t>(off), x.data().begin() + static_cast<std::ptrdiff_t>(off + 8));
  }
  auto a = heads::temporal_max(x, 1, 6);
  auto b = heads::temporal_max(TF::from_data({6, 2, 2, 2}, rev), 1, 6);
  EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
}

TEST(Heads, SeparateFcIsPerPart) {
  std::mt19937_64 rng(14);
  auto x = rand_t<double>(rng, {2, 3, 4});
  auto w = rand_t<double>(rng, {3, 4, 2});
  auto y = heads::separate_fc(x, w);
  for (int b = 0; b < 2; ++b) {
    for (int p = 0; p < 3; ++p) {
      for (int d = 0; d < 2; ++d) {
        double s = 0;
        for (int c = 0; c < 4; ++c) s += x.at({b, p, c}) * w.at({p, c, d});
        EXPECT_NEAR(y.at({b, p, d}), s, 1e-12);
      }
    }
  }
}

}  // namespace
}  // namespace pgait
