#include <gtest/gtest.h>

#include <random>
#include <set>

#include "oracles.hpp"
#include "pcdu/errors.hpp"
#include "pcdu/pointops.hpp"

using namespace pcdu;

namespace {
PointCloud line_cloud(std::vector<double> xs) {
  PointCloud c;
  for (double x : xs) {
    c.coords.push_back({x, 0, 0});
    c.normals.push_back({0, 0, 1});
  }
  return c;
}
}  // namespace

TEST(Fps, CollinearExtremes) {
  const auto c = line_cloud({0, 1, 2});
  EXPECT_EQ(farthest_point_sample(c.coords, 2), (std::vector<std::size_t>{0, 2}));
}

TEST(Fps, ExhaustionSelectsEveryIndexOnce) {
  std::mt19937_64 g(1);
  const auto c = oracle::random_cloud(17, g);
  auto idx = farthest_point_sample(c.coords, 17);
  std::set<std::size_t> s(idx.begin(), idx.end());
  EXPECT_EQ(s.size(), 17u);
}

TEST(Fps, SquareCornersTieToLowerIndex) {
  std::vector<Vec3> sq{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}};
  EXPECT_EQ(farthest_point_sample(sq, 3), (std::vector<std::size_t>{0, 3, 1}));
  EXPECT_EQ(farthest_point_sample(sq, 3), oracle::fps(sq, 3));
}

TEST(Fps, MatchesBruteForceOracle) {
  std::mt19937_64 g(2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + g() % 64;
    const auto c = oracle::random_cloud(n, g);
    const std::size_t m = 1 + g() % n;
    EXPECT_EQ(farthest_point_sample(c.coords, m), oracle::fps(c.coords, m));
  }
}

TEST(Fps, TooManyCentroidsRejected) {
  const auto c = line_cloud({0, 1});
  EXPECT_THROW(farthest_point_sample(c.coords, 3), Error);
}

TEST(Knn, KOneIsTheCentroidAtOrigin) {
  std::mt19937_64 g(3);
  const auto c = oracle::random_cloud(10, g);
  const std::vector<std::size_t> cent{4, 7};
  const auto gs = knn_group(c, cent, 1);
  EXPECT_EQ(gs.group_indices, cent);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(gs.group_features(r, j), 0.0);
}

TEST(Knn, CollinearLocalOffsets) {
  const auto c = line_cloud({0, 1, 2});
  const std::vector<std::size_t> cent{1};
  const auto gs = knn_group(c, cent, 3);
  std::multiset<double> xs;
  for (std::size_t r = 0; r < 3; ++r) xs.insert(gs.group_features(r, 0));
  EXPECT_EQ(xs, (std::multiset<double>{-1, 0, 1}));
  // normals copied untranslated
  EXPECT_EQ(gs.group_features(0, 5), 1.0);
}

TEST(Knn, DuplicateFillWhenKExceedsN) {
  const auto c = line_cloud({0, 5});
  const std::vector<std::size_t> cent{1};
  const auto gs = knn_group(c, cent, 3);
  EXPECT_EQ(gs.group_indices, (std::vector<std::size_t>{1, 0, 1}));
}

TEST(Knn, MatchesSortOracle) {
  std::mt19937_64 g(4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + g() % 40;
    const auto c = oracle::random_cloud(n, g);
    const std::size_t k = 1 + g() % 12;
    const auto cent = farthest_point_sample(c.coords, 1 + g() % n);
    const auto gs = knn_group(c, cent, k);
    for (std::size_t i = 0; i < cent.size(); ++i) {
      const auto ref = oracle::knn(c.coords, c.coords[cent[i]], k);
      for (std::size_t j = 0; j < k; ++j) {
        EXPECT_EQ(gs.group_indices[i * k + j], ref[j]);
        for (int d = 0; d < 3; ++d) {
          EXPECT_EQ(gs.group_features(i * k + j, d), c.coords[ref[j]][d] - c.coords[cent[i]][d]);
        }
      }
    }
  }
}

TEST(Knn, EmptyCloudRejected) {
  PointCloud empty;
  const std::vector<std::size_t> cent{0};
  EXPECT_THROW(knn_group(empty, cent, 1), Error);
}

TEST(GroupAll, KeepsAbsoluteCoordinates) {
  const auto c = line_cloud({3, 4});
  const auto gs = group_all(c);
  EXPECT_EQ(gs.group_size, 2u);
  EXPECT_EQ(gs.group_features(1, 0), 4.0);
}

TEST(Interpolate, CoincidentSourceCopiedExactly) {
  std::mt19937_64 g(5);
  const auto src = oracle::random_cloud(6, g);
  const Tensor feats = oracle::random_tensor({6, 4}, g);
  const std::vector<Vec3> dst{src.coords[2], src.coords[5]};
  const Tensor out = interpolate_features(src.coords, feats, dst);
  for (std::size_t c = 0; c < 4; ++c) {
    EXPECT_EQ(out(0, c), feats(2, c));
    EXPECT_EQ(out(1, c), feats(5, c));
  }
}

TEST(Interpolate, SharedFeatureReproduced) {
  const std::vector<Vec3> src{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  const Tensor feats = Tensor::matrix(3, 2, {0.25, -3, 0.25, -3, 0.25, -3});
  const std::vector<Vec3> dst{{0.3, 0.2, 0.1}};
  const Tensor out = interpolate_features(src, feats, dst);
  EXPECT_NEAR(out(0, 0), 0.25, 1e-15);
  EXPECT_NEAR(out(0, 1), -3.0, 1e-15);
}

TEST(Interpolate, MidpointBetweenTwoSources) {
  const std::vector<Vec3> src{{0, 0, 0}, {1, 0, 0}, {100, 0, 0}};
  const Tensor feats = Tensor::matrix(3, 1, {0, 1, 7});
  const std::vector<Vec3> dst{{0.5, 0, 0}};
  const double v = interpolate_features(src, feats, dst)(0, 0);
  EXPECT_GT(v, 0.45);
  EXPECT_LT(v, 0.55);
}

TEST(Interpolate, WeightsNormalisedAndTranslationEquivariant) {
  std::mt19937_64 g(6);
  const auto src = oracle::random_cloud(9, g);
  const auto dst = oracle::random_cloud(20, g);
  const auto plan = interpolation_plan(src.coords, dst.coords);
  for (std::size_t r = 0; r < dst.size(); ++r) {
    double s = 0;
    for (std::size_t j = 0; j < plan.per_row; ++j) {
      EXPECT_GE(plan.weights[r * plan.per_row + j], 0.0);
      s += plan.weights[r * plan.per_row + j];
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  const Tensor feats = oracle::random_tensor({9, 3}, g);
  auto shift = [](std::vector<Vec3> v) {
    for (auto& p : v) {
      p[0] += 0.5;
      p[1] -= 0.25;
      p[2] += 2.0;
    }
    return v;
  };
  // shifted coordinates are rounded, so distances can move by an ulp
  const Tensor a = interpolate_features(src.coords, feats, dst.coords);
  const Tensor b = interpolate_features(shift(src.coords), feats, shift(dst.coords));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(Interpolate, FewerThanThreeSourcesUsesAll) {
  const std::vector<Vec3> src{{0, 0, 0}, {2, 0, 0}};
  const Tensor feats = Tensor::matrix(2, 1, {1, 3});
  const std::vector<Vec3> dst{{1, 0, 0}};
  EXPECT_NEAR(interpolate_features(src, feats, dst)(0, 0), 2.0, 1e-12);
}

TEST(Interpolate, NonFiniteCoordinatesRejected) {
  const std::vector<Vec3> src{{0, 0, 0}};
  const std::vector<Vec3> dst{{std::nan(""), 0, 0}};
  EXPECT_THROW(interpolate_features(src, Tensor({1, 1}), dst), Error);
}
