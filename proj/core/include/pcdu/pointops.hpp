#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "pcdu/point_cloud.hpp"
#include "pcdu/tensor.hpp"

namespace pcdu {

/// Neighbourhoods around sampled centroids. `group_features` is
/// (centroids·k) × 6: coordinates relative to the centroid, then normals.
struct GroupedSet {
  std::vector<Vec3> centroids;
  std::size_t group_size = 0;
  std::vector<std::size_t> group_indices;  // centroids × group_size, row-major
  Tensor group_features;

  std::size_t centroid_count() const noexcept { return centroids.size(); }
};

/// Greedy max-min sampling. The first pick is `start_index`; each subsequent
/// pick maximises its distance to the nearest earlier pick, ties to the lowest index.
std::vector<std::size_t> farthest_point_sample(std::span<const Vec3> coords, std::size_t count,
                                               std::size_t start_index = 0);

/// For each centroid, the k nearest points by coordinate distance (ties to
/// the lower index). With k == nullopt every point joins every group. When
/// k exceeds the cloud size the nearest point fills the missing slots.
GroupedSet knn_group(const PointCloud& cloud, std::span<const std::size_t> centroid_indices,
                     std::optional<std::size_t> k);

/// One group holding every point in index order, coordinates untranslated.
/// This is the last abstraction level's "group all".
GroupedSet group_all(const PointCloud& cloud);

inline constexpr double kInterpolationEpsilon = 1e-8;
inline constexpr double kCoincideEpsilon = 1e-10;
inline constexpr std::size_t kInterpolationNeighbors = 3;

/// Sources and normalised weights used to interpolate onto each destination.
struct InterpolationPlan {
  std::size_t per_row = 0;
  std::vector<std::size_t> indices;  // destinations × per_row
  std::vector<double> weights;
};

/// Inverse-square-distance weights over the 3 nearest sources (all sources if
/// fewer). A destination closer than kCoincideEpsilon to its nearest source
/// copies that source exactly.
InterpolationPlan interpolation_plan(std::span<const Vec3> src_coords, std::span<const Vec3> dst_coords);

/// n × c1 features interpolated from n1 source points onto n destinations.
Tensor interpolate_features(std::span<const Vec3> src_coords, const Tensor& src_feats,
                            std::span<const Vec3> dst_coords);

}  // namespace pcdu
