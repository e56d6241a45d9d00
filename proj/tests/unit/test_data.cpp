#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "oracles.hpp"
#include "pcdu/data.hpp"
#include "pcdu/errors.hpp"

using namespace pcdu;
namespace fs = std::filesystem;

namespace {
fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pcdu_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}
}  // namespace

TEST(ParseCloud, SixAndSevenFields) {
  const auto a = parse_cloud("0 0 0 0 0 1\n");
  ASSERT_EQ(a.size(), 1u);
  EXPECT_FALSE(a.labeled());
  EXPECT_EQ(a.normals[0], (Vec3{0, 0, 1}));
  const auto b = parse_cloud("# header\n\n1 2 3 0 1 0 1\n");
  ASSERT_TRUE(b.labeled());
  EXPECT_EQ((*b.labels)[0], 1);
  EXPECT_EQ(b.coords[0], (Vec3{1, 2, 3}));
}

TEST(ParseCloud, ErrorsCarryLineNumbers) {
  try {
    parse_cloud("1 2 3\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
  try {
    parse_cloud("0 0 0 0 0 1\n0 0 x 0 0 1\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse_cloud("# nothing\n"), ParseError);
  EXPECT_THROW(parse_cloud("0 0 0 0 0 1 1\n0 0 0 0 0 1\n"), ParseError);
}

TEST(CloudFile, RoundTrip) {
  std::mt19937_64 g(1);
  const auto c = oracle::random_cloud(50, g, true);
  const auto dir = scratch("roundtrip");
  write_cloud(dir / "c.txt", c);
  const auto back = load_cloud(dir / "c.txt");
  ASSERT_EQ(back.size(), c.size());
  EXPECT_EQ(back.labels, c.labels);
  for (std::size_t i = 0; i < c.size(); ++i)
    for (int d = 0; d < 3; ++d) {
      EXPECT_NEAR(back.coords[i][d], c.coords[i][d], 1e-6);
      EXPECT_NEAR(back.normals[i][d], c.normals[i][d], 1e-6);
    }
  EXPECT_THROW(load_cloud(dir / "missing.txt"), Error);
}

TEST(SamplePoints, Contracts) {
  std::mt19937_64 g(2);
  const auto c = oracle::random_cloud(20, g, true);
  RngStream r(1, "s");
  const auto perm = sample_points(c, 20, r);
  auto key = [](const PointCloud& p) {
    std::multiset<Vec3> s(p.coords.begin(), p.coords.end());
    return s;
  };
  EXPECT_EQ(key(perm), key(c));
  const auto single = sample_points(c, 1, r);
  EXPECT_TRUE(std::find(c.coords.begin(), c.coords.end(), single.coords[0]) != c.coords.end());
  const auto twice = sample_points(c, 40, r);
  std::set<Vec3> seen(twice.coords.begin(), twice.coords.end());
  for (const auto& p : c.coords) EXPECT_TRUE(seen.count(p));
  // labels travel with their points
  for (std::size_t i = 0; i < twice.size(); ++i) {
    const auto it = std::find(c.coords.begin(), c.coords.end(), twice.coords[i]);
    EXPECT_EQ((*twice.labels)[i], (*c.labels)[it - c.coords.begin()]);
  }
  EXPECT_THROW(sample_points(PointCloud{}, 3, r), Error);
}

TEST(Split, IntraSizedCounts) {
  // IntrA: 1694 healthy segments, 331 aneurysm segments
  std::vector<std::int32_t> labels(1694, kHealthy);
  labels.insert(labels.end(), 331, kAneurysm);
  SplitSpec spec;
  spec.seed = 3;
  const auto s = split_dataset(labels, spec);
  EXPECT_EQ(s.test.size(), 405u);
  EXPECT_EQ(s.labeled.size() + s.unlabeled.size(), 1620u);
  EXPECT_TRUE(s.unlabeled.empty());
  // floor per class: 338 + 66 = 404, the shortfall goes to the larger class
  std::size_t healthy_test = 0;
  for (auto i : s.test) healthy_test += labels[i] == kHealthy;
  EXPECT_EQ(healthy_test, 339u);
}

TEST(Split, DisjointCoverageAndDeterminism) {
  std::vector<std::int32_t> labels;
  for (int i = 0; i < 60; ++i) labels.push_back(i % 3 == 0 ? kAneurysm : kHealthy);
  SplitSpec spec;
  spec.seed = 11;
  spec.labeled_fraction = 0.1;
  const auto a = split_dataset(labels, spec);
  const auto b = split_dataset(labels, spec);
  EXPECT_EQ(a.test, b.test);
  EXPECT_EQ(a.labeled, b.labeled);
  EXPECT_EQ(a.unlabeled, b.unlabeled);
  std::vector<std::size_t> all = a.test;
  all.insert(all.end(), a.labeled.begin(), a.labeled.end());
  all.insert(all.end(), a.unlabeled.begin(), a.unlabeled.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i], i);
  EXPECT_EQ(all.size(), labels.size());
  EXPECT_EQ(a.pretrain_pool().size(), 48u);
  spec.seed = 12;
  EXPECT_NE(split_dataset(labels, spec).test, a.test);
}

TEST(Split, MissingClassRejected) {
  std::vector<std::int32_t> labels(10, kHealthy);
  labels.push_back(kAneurysm);
  SplitSpec spec;
  EXPECT_THROW(split_dataset(labels, spec), Error);
  spec.test_fraction = 0.0;
  EXPECT_THROW(spec.validate(), Error);
}

TEST(KFold, FoldsPartitionData) {
  std::vector<std::int32_t> labels;
  for (int i = 0; i < 25; ++i) labels.push_back(i % 5 == 0 ? kAneurysm : kHealthy);
  std::vector<int> hits(labels.size(), 0);
  SplitSpec spec;
  for (std::size_t f = 0; f < 5; ++f) {
    const auto s = kfold_split(labels, 5, f, spec);
    for (auto i : s.test) ++hits[i];
    EXPECT_EQ(s.test.size() + s.labeled.size() + s.unlabeled.size(), labels.size());
  }
  for (int h : hits) EXPECT_EQ(h, 1);
}

TEST(Synthetic, LabelsAndNormals) {
  SynthSpec spec;
  spec.healthy = 2;
  spec.aneurysm = 3;
  spec.points = 1000;
  const auto ds = gen_synthetic(spec, 5);
  ASSERT_EQ(ds.size(), 5u);
  for (const auto& s : ds.samples) {
    ASSERT_TRUE(s.cloud.labeled());
    std::size_t bump = 0;
    for (auto l : *s.cloud.labels) bump += l == 1;
    if (s.label == kHealthy) {
      EXPECT_EQ(bump, 0u);
    } else {
      EXPECT_NEAR(static_cast<double>(bump), 300.0, 50.0);
    }
    for (const auto& n : s.cloud.normals) EXPECT_NEAR(std::sqrt(dot(n, n)), 1.0, 1e-9);
  }
  EXPECT_EQ(gen_synthetic(spec, 5).samples[3].cloud, ds.samples[3].cloud);
}

TEST(Manifest, WriteAndLoad) {
  SynthSpec spec;
  spec.healthy = 2;
  spec.aneurysm = 2;
  spec.points = 32;
  auto ds = gen_synthetic(spec, 6);
  const auto dir = scratch("manifest");
  const auto manifest = write_dataset(dir, ds);
  const auto back = load_manifest(manifest);
  ASSERT_EQ(back.size(), 4u);
  EXPECT_EQ(back.labels(), ds.labels());
  {
    std::ofstream bad(dir / "bad.txt");
    bad << "clouds/healthy_00000.txt\n";
  }
  EXPECT_THROW(load_manifest(dir / "bad.txt"), ParseError);
}
