#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "pcdu/errors.hpp"
#include "pcdu/metrics.hpp"

using namespace pcdu;

using Labels = std::vector<std::int32_t>;

TEST(Accuracy, Examples) {
  const Labels t{0, 0, 1, 1};
  EXPECT_EQ(per_class_accuracy(t, t, 0), 100.0);
  EXPECT_EQ(per_class_accuracy(t, t, 1), 100.0);
  const Labels healthy{0, 0, 0, 0};
  EXPECT_EQ(per_class_accuracy(healthy, t, 0), 100.0);
  EXPECT_EQ(per_class_accuracy(healthy, t, 1), 0.0);
  const Labels p{0, 1, 1, 1};
  EXPECT_EQ(per_class_accuracy(p, t, 0), 50.0);
  EXPECT_EQ(per_class_accuracy(p, t, 1), 100.0);
  EXPECT_THROW(per_class_accuracy(healthy, healthy, 1), ValueError);
}

TEST(F1, Examples) {
  ConfusionCounts c{{0, 1}, {0, 1}, {0, 1}, {0, 0}};
  EXPECT_EQ(f1(c, 1), 0.5);
  ConfusionCounts empty{{4, 0}, {0, 0}, {0, 0}, {0, 4}};
  EXPECT_EQ(f1(empty, 1), 1.0);
  const Labels t{0, 1, 1};
  EXPECT_EQ(f1(confusion(t, t, 2), 1), 1.0);
  ConfusionCounts miss{{0, 0}, {0, 2}, {0, 1}, {0, 0}};
  EXPECT_EQ(f1(miss, 1), 0.0);
}

TEST(Iou, Examples) {
  const Labels t{0, 1, 1, 0};
  EXPECT_EQ(iou(t, t, 0), 100.0);
  EXPECT_EQ(iou(t, t, 1), 100.0);
  const Labels inv{1, 0, 0, 1};
  EXPECT_EQ(iou(inv, t, 1), 0.0);
  // truth has 4 points of class 1, prediction hits 2 of them and 2 others
  const Labels truth{1, 1, 1, 1, 0, 0, 0};
  const Labels pred{1, 1, 0, 0, 1, 1, 0};
  EXPECT_NEAR(iou(pred, truth, 1), 100.0 / 3.0, 1e-12);
  const Labels zeros{0, 0};
  EXPECT_EQ(iou(zeros, zeros, 1), 100.0);
  EXPECT_THROW(iou(zeros, t, 0), DimensionError);
}

TEST(Metrics, RandomisedOracleAgreement) {
  std::mt19937_64 g(1);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + g() % 30;
    Labels p(n), t(n);
    for (auto& v : p) v = static_cast<std::int32_t>(g() % 2);
    for (auto& v : t) v = static_cast<std::int32_t>(g() % 2);
    const oracle::Confusion o(p, t, 2);
    const auto c = confusion(p, t, 2);
    for (int k = 0; k < 2; ++k) {
      EXPECT_EQ(static_cast<long>(c.tp[k]), o.tp(k));
      EXPECT_EQ(static_cast<long>(c.fp[k]), o.fp(k));
      EXPECT_EQ(static_cast<long>(c.fn[k]), o.fn(k));
      EXPECT_EQ(static_cast<long>(c.tn[k]), o.tn(k));
      EXPECT_EQ(iou(p, t, k), o.iou(k));
      if (o.tp(k) + o.fn(k) > 0) EXPECT_EQ(per_class_accuracy(p, t, k), o.accuracy(k));
    }
    EXPECT_EQ(f1(c, 1), o.f1(1));
  }
}

TEST(Metrics, PermutationInvariant) {
  const Labels p{0, 1, 1, 0, 1}, t{0, 1, 0, 0, 1};
  const Labels pp{1, 0, 0, 1, 1}, tp{0, 0, 0, 1, 1};  // same pairs, reordered
  EXPECT_EQ(iou(p, t, 1), iou(pp, tp, 1));
  EXPECT_EQ(f1(confusion(p, t, 2), 1), f1(confusion(pp, tp, 2), 1));
}

TEST(Report, ClassificationAndJson) {
  const Labels t{0, 0, 1, 1}, p{0, 1, 1, 1};
  const auto r = classification_report(p, t);
  EXPECT_EQ(r.healthy_accuracy, 50.0);
  EXPECT_EQ(r.aneurysm_accuracy, 100.0);
  EXPECT_NEAR(r.f1_score, 0.8, 1e-15);
  const auto j = r.to_json();
  EXPECT_EQ(j["task"], "cls");
  EXPECT_FALSE(r.table().empty());
}

TEST(Report, SegmentationPooledAndPerCloud) {
  std::vector<std::pair<Labels, Labels>> clouds{{{1, 1, 0, 0}, {1, 0, 0, 0}}, {{0, 0}, {0, 0}}};
  const auto r = segmentation_report(clouds);
  EXPECT_NEAR(r.aneurysm_iou, 50.0, 1e-12);
  // per-cloud: 50 and vacuous 100
  EXPECT_NEAR(r.aneurysm_iou_per_cloud, 75.0, 1e-12);
  EXPECT_EQ(r.population, 6u);
}

TEST(Report, MulticlassOverallAccuracy) {
  const Labels t{0, 1, 2, 3, 3}, p{0, 1, 2, 0, 3};
  const auto r = classification_report(p, t, 4);
  EXPECT_EQ(r.overall_accuracy, 80.0);
  const auto j = r.to_json();
  EXPECT_EQ(j["classes"], 4);
  EXPECT_FALSE(j.contains("F1"));
  EXPECT_THROW(classification_report(p, t, 3), ValueError);
  EXPECT_EQ(classification_report(Labels{0, 0}, Labels{0, 1}).overall_accuracy, 50.0);
}
