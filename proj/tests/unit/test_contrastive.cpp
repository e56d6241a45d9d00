#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "pcdu/contrastive.hpp"
#include "pcdu/errors.hpp"
#include "pcdu/layers.hpp"

using namespace pcdu;

TEST(Cosine, Examples) {
  const std::vector<Real> z{0.3, -2, 5}, x{1, 0}, y{0, 1}, d{1, 1};
  EXPECT_NEAR(cosine_similarity(z, z), 1.0, 1e-15);
  EXPECT_EQ(cosine_similarity(x, y), 0.0);
  EXPECT_NEAR(cosine_similarity(d, x), 0.70710678, 1e-8);
  const std::vector<Real> zero{0, 0};
  EXPECT_THROW(cosine_similarity(zero, x), ValueError);
}

TEST(PairProbability, Examples) {
  EXPECT_EQ(pair_probability(Tensor::matrix(2, 2, {1, 0, 0.3, 1}), 0, 1), 1.0);
  const Tensor same = Tensor::matrix(4, 2, {1, 2, 1, 2, 1, 2, 1, 2});
  for (std::size_t j = 1; j < 4; ++j) EXPECT_NEAR(pair_probability(same, 0, j), 1.0 / 3.0, 1e-15);
}

TEST(PairProbability, LiteralSummationOracle) {
  std::mt19937_64 g(1);
  const Tensor z = oracle::random_tensor({4, 3}, g);
  auto cos = [&](std::size_t i, std::size_t j) {
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t c = 0; c < 3; ++c) {
      ab += z(i, c) * z(j, c);
      aa += z(i, c) * z(i, c);
      bb += z(j, c) * z(j, c);
    }
    return ab / std::sqrt(aa * bb);
  };
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      if (i == j) continue;
      double denom = 0;
      for (std::size_t k = 0; k < 4; ++k)
        if (k != i) denom += std::exp(cos(i, k));
      EXPECT_NEAR(pair_probability(z, i, j), std::exp(cos(i, j)) / denom, 1e-12);
    }
}

TEST(NtXent, ClosedForms) {
  EXPECT_EQ(ntxent_loss(Tensor::matrix(2, 2, {1, 0.5, -3, 2}), 0.5), 0.0);
  EXPECT_NEAR(ntxent_loss(Tensor::matrix(4, 2, {1, 1, 1, 1, 1, 1, 1, 1}), 0.5), std::log(3.0), 1e-9);
  EXPECT_NEAR(ntxent_loss(Tensor::matrix(4, 2, {1, 0, 1, 0, 0, 1, 0, 1}), 0.5), std::log(1 + 2 * std::exp(-2.0)),
              1e-6);
}

TEST(NtXent, MatchesDefinitionOracle) {
  std::mt19937_64 g(2);
  for (int t = 0; t < 20; ++t) {
    const std::size_t m = 2 * (1 + g() % 5);
    const Tensor z = oracle::random_tensor({m, 1 + g() % 6}, g);
    const double tau = 0.1 + 0.1 * (g() % 10);
    EXPECT_NEAR(ntxent_loss(z, tau), oracle::ntxent(z, tau), 1e-12);
  }
}

TEST(NtXent, ScaleAndPermutationInvariance) {
  std::mt19937_64 g(3);
  const Tensor z = oracle::random_tensor({6, 4}, g);
  const double base = ntxent_loss(z);
  Tensor scaled = z;
  for (std::size_t c = 0; c < 4; ++c) scaled(2, c) *= 7.5;
  EXPECT_NEAR(ntxent_loss(scaled), base, 1e-9);
  // pair blocks (0,1)(2,3)(4,5) → (4,5)(0,1)(2,3)
  Tensor blocks({6, 4});
  const std::size_t order[6] = {4, 5, 0, 1, 2, 3};
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t c = 0; c < 4; ++c) blocks(r, c) = z(order[r], c);
  EXPECT_NEAR(ntxent_loss(blocks), base, 1e-12);
  Tensor swapped({6, 4});
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t c = 0; c < 4; ++c) swapped(r, c) = z(positive_partner(r), c);
  EXPECT_NEAR(ntxent_loss(swapped), base, 1e-12);
  EXPECT_GT(base, 0.0);
}

TEST(NtXent, InvalidBatches) {
  EXPECT_THROW(ntxent_loss(Tensor::matrix(3, 1, {1, 2, 3})), ValueError);
  EXPECT_THROW(ntxent_loss(Tensor::matrix(2, 2, {0, 0, 1, 1})), ValueError);
  EXPECT_THROW(ntxent_loss(Tensor::matrix(2, 1, {1, 1}), 0.0), ValueError);
}

TEST(NtXent, GradientMatchesFiniteDifferences) {
  std::mt19937_64 g(4);
  Var z = Var::parameter(oracle::random_tensor({6, 3}, g));
  auto f = [&] { return ntxent_loss(EmbeddingBatch{z, 0.5}); };
  EXPECT_LT(grad_check(f, {z}), 1e-6);
}

TEST(NtXent, RandomEmbeddingBaseline) {
  // unrelated embeddings: the loss hovers around ln(2N-1)
  std::mt19937_64 g(21);
  std::normal_distribution<double> nd;
  double mean = 0.0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    Tensor z({8, 128});
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = nd(g);
    mean += ntxent_loss(z);
  }
  mean /= trials;
  EXPECT_NEAR(mean, std::log(7.0), 0.5);
}
