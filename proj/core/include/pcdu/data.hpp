#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pcdu/point_cloud.hpp"
#include "pcdu/rng.hpp"

namespace pcdu {

inline constexpr std::int32_t kHealthy = 0;
inline constexpr std::int32_t kAneurysm = 1;

struct Sample {
  PointCloud cloud;
  std::int32_t label = kHealthy;  // sample-level class
  std::string path;               // relative to the manifest, empty for in-memory data
};

struct Dataset {
  std::string name;
  std::filesystem::path manifest;
  std::vector<Sample> samples;

  std::size_t size() const noexcept { return samples.size(); }
  std::vector<std::int32_t> labels() const;
  Dataset subset(const std::vector<std::size_t>& indices) const;
};

/// Text point file: one point per line, "x y z nx ny nz [label]".
/// Blank lines and '#' comments are skipped.
PointCloud load_cloud(const std::filesystem::path& path);
PointCloud parse_cloud(const std::string& text, const std::string& source = "<memory>");
/// Writes with 9 significant digits so floats round-trip.
void write_cloud(const std::filesystem::path& path, const PointCloud& cloud);

/// Manifest: "relative/path label" per line, same comment rules as point files.
Dataset load_manifest(const std::filesystem::path& manifest);
/// Writes every sample to `dir/<path>` (generating names where missing) and
/// a manifest `dir/manifest.txt`. Returns the manifest path.
std::filesystem::path write_dataset(const std::filesystem::path& dir, Dataset& dataset);

/// count ≤ n: uniform without replacement. count > n: every point once plus
/// uniform draws with replacement. Labels follow their points.
PointCloud sample_points(const PointCloud& cloud, std::size_t count, RngStream& rng);

struct SplitSpec {
  double test_fraction = 0.2;
  double labeled_fraction = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Index lists into the source dataset.
struct DatasetSplit {
  std::vector<std::size_t> unlabeled;  // pool A
  std::vector<std::size_t> labeled;    // B
  std::vector<std::size_t> test;

  /// A ∪ B, the contrastive pretraining pool.
  std::vector<std::size_t> pretrain_pool() const;
};

/// Number drawn from each class so the total is floor(total × fraction):
/// floor per class, the shortfall goes to the largest class.
std::vector<std::size_t> stratified_counts(const std::vector<std::size_t>& class_sizes, double fraction);

/// Holds out a stratified test set, then splits the rest into A (unlabeled)
/// and B (labeled). Every class must appear in both the test set and B.
DatasetSplit split_dataset(const std::vector<std::int32_t>& labels, const SplitSpec& spec);

/// Stratified k-fold: fold `fold` is the test set, the rest split by
/// labeled_fraction as in split_dataset.
DatasetSplit kfold_split(const std::vector<std::int32_t>& labels, std::size_t folds, std::size_t fold,
                         const SplitSpec& spec);

struct SynthSpec {
  std::size_t healthy = 8;
  std::size_t aneurysm = 8;
  std::size_t points = 256;
  double bump_fraction = 0.3;
  double radius = 1.0;
  double length = 4.0;
  double surface_noise = 0.01;
};

/// Healthy clouds sample a noisy cylinder around +Y with outward normals.
/// Aneurysm clouds place each point on a hemispherical bump with probability
/// bump_fraction; bump points carry per-point label 1, the rest 0.
Dataset gen_synthetic(const SynthSpec& spec, std::uint64_t seed);

}  // namespace pcdu
