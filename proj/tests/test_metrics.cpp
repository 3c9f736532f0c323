#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "pgait/errors.hpp"
#include "pgait/metrics.hpp"

namespace pgait {
namespace {

using testing::map_oracle;
using testing::random_retrieval;
using testing::rank_k_oracle;

EmbeddingSet random_set(std::mt19937_64& rng, int n, int parts, int dim, int subjects) {
  std::normal_distribution<float> v(0.0f, 1.0f);
  std::uniform_int_distribution<int> s(0, subjects - 1);
  EmbeddingSet set;
  for (int i = 0; i < n; ++i) {
    Embedding e{parts, dim, {}};
    for (int k = 0; k < parts * dim; ++k) e.values.push_back(v(rng));
    set.add("q" + std::to_string(i), "s" + std::to_string(s(rng)), e);
  }
  return set;
}

TEST(Metrics, RankAndMapMatchBruteForce) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 100; ++t) {
    const auto r = random_retrieval(rng);
    for (int k : {1, 5, 10}) {
      EXPECT_EQ(rank_k(r.distances, r.query_subjects, r.gallery_subjects, k),
                rank_k_oracle(r.distances, r.query_subjects, r.gallery_subjects, k));
    }
    EXPECT_EQ(mean_average_precision(r.distances, r.query_subjects, r.gallery_subjects),
              map_oracle(r.distances, r.query_subjects, r.gallery_subjects));
  }
}

TEST(Metrics, GalleryCopiesGivePerfectScores) {
  std::mt19937_64 rng(2);
  const auto q = random_set(rng, 10, 3, 4, 1000);
  auto g = random_set(rng, 30, 3, 4, 5);
  for (std::size_t i = 0; i < q.size(); ++i) {
    g.add("copy" + std::to_string(i), q.subject_ids[i], Embedding{3, 4, {q.row(i).begin(), q.row(i).end()}});
  }
  for (auto metric : {DistanceMetric::kEuclidean, DistanceMetric::kCosine}) {
    const auto d = distance_matrix(q, g, metric);
    EXPECT_EQ(rank_k(d, q.subject_ids, g.subject_ids, 1), 100.0);
  }
}

TEST(Metrics, ExcludesQueriesWithoutGalleryMatch) {
  DenseMatrix d(3, 2);
  d(0, 0) = 1.0;
  d(0, 1) = 2.0;
  d(2, 0) = 1.0;
  const std::vector<std::string> qs{"a", "zz", "b"}, gs{"a", "b"};
  std::size_t excluded = 0;
  EXPECT_EQ(rank_k(d, qs, gs, 1, &excluded), 100.0);
  EXPECT_EQ(excluded, 1u);
  EXPECT_THROW(rank_k(DenseMatrix(1, 0), {qs.data(), 1}, {}, 1), InvalidArgument);
  EXPECT_THROW(rank_k(d, qs, gs, 0), InvalidArgument);
}

TEST(Metrics, DistanceMatrixMatchesDirectFormula) {
  std::mt19937_64 rng(3);
  const auto a = random_set(rng, 4, 2, 3, 3);
  const auto b = random_set(rng, 5, 2, 3, 3);
  const auto per_part = distance_matrix(a, b, DistanceMetric::kEuclidean, DistanceMode::kPerPart);
  const auto concat = distance_matrix(a, b, DistanceMetric::kEuclidean, DistanceMode::kConcatenated);
  const auto cos = distance_matrix(a, b, DistanceMetric::kCosine, DistanceMode::kConcatenated);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 5; ++j) {
      const auto x = a.row(static_cast<std::size_t>(i)), y = b.row(static_cast<std::size_t>(j));
      double parts = 0.0, all = 0.0, xy = 0.0, xx = 0.0, yy = 0.0;
      for (int p = 0; p < 2; ++p) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) {
          const double dd = double(x[static_cast<std::size_t>(p * 3 + k)]) - y[static_cast<std::size_t>(p * 3 + k)];
          s += dd * dd;
        }
        parts += std::sqrt(s);
        all += s;
      }
      for (std::size_t k = 0; k < 6; ++k) {
        xy += double(x[k]) * y[k];
        xx += double(x[k]) * x[k];
        yy += double(y[k]) * y[k];
      }
      EXPECT_NEAR(per_part(i, j), parts / 2, 1e-12);
      EXPECT_NEAR(concat(i, j), std::sqrt(all), 1e-12);
      EXPECT_NEAR(cos(i, j), 1.0 - xy / std::sqrt(xx * yy), 1e-12);
    }
  }
}

TEST(Metrics, SelfDistanceIsSymmetricWithZeroDiagonal) {
  std::mt19937_64 rng(4);
  const auto a = random_set(rng, 6, 3, 5, 3);
  const auto d = distance_matrix(a, a);
  for (int i = 0; i < 6; ++i) {
    EXPECT_EQ(d(i, i), 0.0);
    for (int j = 0; j < 6; ++j) EXPECT_EQ(d(i, j), d(j, i));
  }
}

TEST(Metrics, ShapeMismatchThrows) {
  std::mt19937_64 rng(5);
  EXPECT_THROW(distance_matrix(random_set(rng, 2, 2, 3, 2), random_set(rng, 2, 3, 3, 2)), ShapeError);
  EmbeddingSet s;
  EXPECT_NO_THROW(s.add("x", "y", Embedding{2, 2, {0, 0, 0, 0}}));
  EXPECT_THROW(s.add("x2", "y", Embedding{1, 2, {0, 0}}), ShapeError);
}

TEST(Metrics, StableRankingOnTies) {
  DenseMatrix d(1, 4, 1.0);
  d(0, 2) = 0.5;
  EXPECT_EQ(ranking(d, 0), (std::vector<int>{2, 0, 1, 3}));
}

}  // namespace
}  // namespace pgait
