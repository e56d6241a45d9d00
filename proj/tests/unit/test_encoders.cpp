#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "pcdu/downstream.hpp"
#include "pcdu/encoders.hpp"
#include "pcdu/errors.hpp"

using namespace pcdu;

namespace {
std::span<const PointCloud> one(const PointCloud& c) { return {&c, 1}; }
}  // namespace

TEST(ModelConfig, FullWidths) {
  const auto cls = ModelConfig::full(Task::Classification, 1024);
  EXPECT_EQ(cls.representation_width(), 1024u);
  EXPECT_EQ(cls.embedding_width(), 128u);
  EXPECT_EQ(cls.head_input_width(), 2048u);
  EXPECT_EQ(cls.levels[0].centroids, 512u);
  EXPECT_EQ(cls.levels[1].centroids, 128u);
  EXPECT_EQ(*cls.levels[0].k, 32u);
  EXPECT_EQ(*cls.levels[1].k, 64u);
  EXPECT_TRUE(cls.levels[2].groups_all());
  const auto seg = ModelConfig::full(Task::Segmentation, 1024);
  EXPECT_EQ(seg.pooled_width(), 2048u);
  EXPECT_EQ(seg.embedding_width(), 512u);
  EXPECT_EQ(seg.head_input_width(), 4096u);
  const auto small = ModelConfig::full(Task::Classification, 512);
  EXPECT_EQ(small.levels[0].centroids, 256u);
  EXPECT_EQ(small.levels[1].centroids, 64u);
}

TEST(ModelConfig, TooFewPointsRejected) {
  EXPECT_THROW(ModelConfig::tiny(Task::Classification, 16).validate(4), ConfigError);
}

TEST(Branch1, ShapeAndPermutationInvariance) {
  std::mt19937_64 g(1);
  EncoderModel m(ModelConfig::tiny(Task::Classification, 16), 1);
  const auto c = oracle::random_cloud(16, g);
  const Tensor h = m.represent(one(c), Mode::Eval).branches[0].global.value();
  EXPECT_EQ(h.shape(), (Shape{1, 16}));
  PointCloud p = c;
  std::reverse(p.coords.begin(), p.coords.end());
  std::reverse(p.normals.begin(), p.normals.end());
  const Tensor hp = m.represent(one(p), Mode::Eval).branches[0].global.value();
  for (std::size_t i = 0; i < h.size(); ++i) EXPECT_NEAR(h[i], hp[i], 1e-9);
  PointCloud d = c;
  d.coords.insert(d.coords.end(), c.coords.begin(), c.coords.end());
  d.normals.insert(d.normals.end(), c.normals.begin(), c.normals.end());
  const Tensor hd = m.branch1()->forward(one(d), Mode::Eval, false).global.value();
  for (std::size_t i = 0; i < h.size(); ++i) EXPECT_NEAR(h[i], hd[i], 1e-9);
}

TEST(Branch2, DeterministicAndTraced) {
  std::mt19937_64 g(2);
  EncoderModel m(ModelConfig::tiny(Task::Classification, 8), 2);
  const auto c = oracle::random_cloud(8, g);
  const Tensor a = m.represent(one(c), Mode::Eval).branches[1].global.value();
  const Tensor b = m.represent(one(c), Mode::Eval).branches[1].global.value();
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.shape(), (Shape{1, 16}));
  const auto& trace = m.branch2()->last_trace();
  ASSERT_EQ(trace.size(), 3u);
  EXPECT_EQ(trace[0].centroids.size(), 4u);
  EXPECT_EQ(trace[1].centroids.size(), 1u);
  // the final group holds every level-2 centroid
  EXPECT_EQ(trace[2].input_points, trace[1].centroids.size());
  EXPECT_EQ(trace[2].group_size, trace[1].centroids.size());
}

TEST(Branch2, TooFewPointsRejected) {
  std::mt19937_64 g(3);
  EncoderModel m(ModelConfig::tiny(Task::Classification, 16), 3);
  const auto c = oracle::random_cloud(5, g);
  EXPECT_THROW(m.represent(one(c), Mode::Eval), Error);
}

TEST(SegBranches, BroadcastHalfAndPooling) {
  std::mt19937_64 g(4);
  EncoderModel m(ModelConfig::tiny(Task::Segmentation, 16), 4);
  const auto c = oracle::random_cloud(16, g);
  const auto reps = m.represent(one(c), Mode::Eval);
  for (const auto& br : reps.branches) {
    const Tensor pp = br.per_point.value();
    const std::size_t h = pp.cols() / 2;
    EXPECT_EQ(pp.shape(), (Shape{16, 2 * h}));
    for (std::size_t r = 1; r < 16; ++r)
      for (std::size_t j = h; j < 2 * h; ++j) EXPECT_EQ(pp(r, j), pp(0, j));
    const Tensor pooled = br.pooled.value();
    for (std::size_t j = 0; j < h; ++j) {
      double mx = pp(0, j);
      for (std::size_t r = 1; r < 16; ++r) mx = std::max<double>(mx, pp(r, j));
      EXPECT_EQ(pooled(0, j), mx);
    }
  }
  const auto again = m.represent(one(c), Mode::Eval);
  EXPECT_EQ(again.concat_per_point().value(), reps.concat_per_point().value());
  EXPECT_EQ(reps.concat_per_point().cols(), m.config().head_input_width());
}

TEST(Projection, WidthsAndZeroWeights) {
  RngStream init(1, "p");
  ProjectionHead cls(1024, {512, 256, 128}, init);
  ProjectionHead seg(2048, {1024, 512}, init);
  EXPECT_EQ(cls.forward(Var(Tensor({2, 1024}, 0.1)), Mode::Eval).cols(), 128u);
  EXPECT_EQ(seg.forward(Var(Tensor({2, 2048}, 0.1)), Mode::Eval).cols(), 512u);
  ProjectionHead z(4, {3, 2}, init);
  for (std::size_t i = 0; i < z.mlp().depth(); ++i) {
    z.mlp().layer(i).weight.mutable_value().fill(0);
    z.mlp().layer(i).bias.mutable_value().fill(0);
    z.mlp().layer(i).bn.reset();
  }
  EXPECT_EQ(z.forward(Var(Tensor({1, 4}, 3.0)), Mode::Eval).value(), Tensor({1, 2}));
  EXPECT_THROW(z.forward(Var(Tensor({1, 5})), Mode::Eval), DimensionError);
}

TEST(EncoderModel, ParameterNames) {
  EncoderModel m(ModelConfig::tiny(Task::Segmentation, 16), 5);
  std::set<std::string> names;
  for (const auto& p : m.parameters()) names.insert(p.name);
  for (const auto& b : m.buffers()) names.insert(b.name);
  EXPECT_TRUE(names.count("branch1.conv1.weight"));
  EXPECT_TRUE(names.count("branch1.conv1.running_mean"));
  EXPECT_TRUE(names.count("branch2.sa1.mlp1.gamma"));
  EXPECT_TRUE(names.count("branch2.fp1.mlp1.bias"));
  EXPECT_TRUE(names.count("proj.fc1.weight"));
  for (const auto& n : names) {
    EXPECT_TRUE(n.rfind("branch1.", 0) == 0 || n.rfind("branch2.", 0) == 0 || n.rfind("proj.", 0) == 0) << n;
  }
}

TEST(EncoderModel, SeedDeterminesInit) {
  EncoderModel a(ModelConfig::tiny(Task::Classification, 16), 9);
  EncoderModel b(ModelConfig::tiny(Task::Classification, 16), 9);
  EncoderModel c(ModelConfig::tiny(Task::Classification, 16), 10);
  EXPECT_EQ(a.parameters()[0].var.value(), b.parameters()[0].var.value());
  EXPECT_NE(a.parameters()[0].var.value(), c.parameters()[0].var.value());
}

TEST(EncoderModel, EmbedPairsRowOrder) {
  std::mt19937_64 g(6);
  EncoderModel m(ModelConfig::tiny(Task::Classification, 16), 6);
  std::vector<PointCloud> a{oracle::random_cloud(16, g), oracle::random_cloud(16, g)};
  std::vector<PointCloud> b{oracle::random_cloud(16, g), oracle::random_cloud(16, g)};
  const Tensor z = m.embed_pairs(a, b, Mode::Eval).value();
  EXPECT_EQ(z.shape(), (Shape{4, m.config().embedding_width()}));
  // row 2 is view_a of pair 1 through branch 1
  const Var h = m.branch1()->forward(std::span<const PointCloud>(&a[1], 1), Mode::Eval, false).pooled;
  const Tensor z1 = m.projection().forward(h, Mode::Eval).value();
  for (std::size_t c = 0; c < z.cols(); ++c) EXPECT_NEAR(z(2, c), z1(0, c), 1e-12);
  const Var hb = m.branch2()->forward(std::span<const PointCloud>(&b[0], 1), Mode::Eval, false).pooled;
  const Tensor z2 = m.projection().forward(hb, Mode::Eval).value();
  for (std::size_t c = 0; c < z.cols(); ++c) EXPECT_NEAR(z(1, c), z2(0, c), 1e-12);
}

TEST(Downstream, ClassifierShapesAndSoftmax) {
  DownstreamHead head = DownstreamHead::for_model(ModelConfig::full(Task::Classification, 1024), 1);
  EXPECT_EQ(head.input_width(), 2048u);
  std::mt19937_64 g(7);
  const Var logits = classify(Var(oracle::random_tensor({3, 2048}, g)), head, Mode::Eval);
  EXPECT_EQ(logits.shape(), (Shape{3, 2}));
  const Tensor p = softmax_rows(logits.value());
  for (std::size_t r = 0; r < 3; ++r) EXPECT_NEAR(p(r, 0) + p(r, 1), 1.0, 1e-9);
  EXPECT_THROW(classify(Var(Tensor({1, 100})), head, Mode::Eval), DimensionError);
}

TEST(Downstream, SegmenterPermutationEquivariant) {
  DownstreamHead head = DownstreamHead::for_model(ModelConfig::tiny(Task::Segmentation, 16), 2);
  std::mt19937_64 g(8);
  const Tensor x = oracle::random_tensor({10, head.input_width()}, g);
  const std::vector<std::size_t> perm{9, 3, 0, 7, 1, 8, 2, 6, 4, 5};
  const Tensor y = segment(Var(x), head, Mode::Eval).value();
  const Tensor yp = segment(ops::gather_rows(Var(x), perm), head, Mode::Eval).value();
  for (std::size_t r = 0; r < 10; ++r)
    for (std::size_t c = 0; c < y.cols(); ++c) EXPECT_EQ(yp(r, c), y(perm[r], c));
}

TEST(Downstream, CrossEntropyValues) {
  const std::vector<std::int32_t> zero{0}, three{0, 1, 2};
  EXPECT_NEAR(cross_entropy(Var(Tensor::matrix(1, 2, {2, 0})), zero).item(), std::log1p(std::exp(-2.0)), 1e-12);
  EXPECT_NEAR(cross_entropy(Var(Tensor({3, 3}, 0.7)), three).item(), std::log(3.0), 1e-15);
  double prev = 1e9;
  for (double big : {0.0, 1.0, 5.0, 20.0}) {
    const double l = cross_entropy(Var(Tensor::matrix(1, 2, {big, 0})), zero).item();
    EXPECT_LE(l, prev);
    EXPECT_GE(l, 0.0);
    prev = l;
  }
  const std::vector<std::int32_t> bad{2};
  EXPECT_THROW(cross_entropy(Var(Tensor::matrix(1, 2, {0, 0})), bad), Error);
}

TEST(Downstream, HeadNames) {
  DownstreamHead cls = DownstreamHead::for_model(ModelConfig::tiny(Task::Classification, 16), 1);
  DownstreamHead seg = DownstreamHead::for_model(ModelConfig::tiny(Task::Segmentation, 16), 1);
  EXPECT_EQ(cls.parameters().front().name.rfind("head.cls.fc1.", 0), 0u);
  EXPECT_EQ(seg.parameters().front().name.rfind("head.seg.conv1.", 0), 0u);
}
