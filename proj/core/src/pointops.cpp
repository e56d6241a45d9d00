#include "pcdu/pointops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pcdu/errors.hpp"

namespace pcdu {

std::vector<std::size_t> farthest_point_sample(std::span<const Vec3> coords, std::size_t count,
                                               std::size_t start_index) {
  const std::size_t n = coords.size();
  if (count == 0) throw ValueError("farthest_point_sample: count must be >= 1");
  if (count > n) {
    throw ValueError("farthest_point_sample: requested " + std::to_string(count) + " centroids from " +
                     std::to_string(n) + " points");
  }
  if (start_index >= n) throw ValueError("farthest_point_sample: start index out of range");

  std::vector<std::size_t> picks;
  picks.reserve(count);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::size_t current = start_index;
  for (std::size_t s = 0; s < count; ++s) {
    picks.push_back(current);
    nearest[current] = -1.0;  // never chosen again
    std::size_t best = n;
    double best_dist = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (nearest[i] < 0.0) continue;
      nearest[i] = std::min(nearest[i], squared_distance(coords[i], coords[current]));
      if (nearest[i] > best_dist) {
        best_dist = nearest[i];
        best = i;
      }
    }
    current = best;
  }
  return picks;
}

namespace {

// Indices of the k nearest points to `centre`, distance ties broken by index.
std::vector<std::size_t> nearest_indices(std::span<const Vec3> coords, const Vec3& centre, std::size_t k) {
  std::vector<std::size_t> order(coords.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> d(coords.size());
  for (std::size_t i = 0; i < coords.size(); ++i) d[i] = squared_distance(coords[i], centre);
  auto closer = [&](std::size_t a, std::size_t b) { return d[a] < d[b] || (d[a] == d[b] && a < b); };
  const std::size_t take = std::min(k, coords.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(), closer);
  order.resize(take);
  return order;
}

}  // namespace

GroupedSet knn_group(const PointCloud& cloud, std::span<const std::size_t> centroid_indices,
                     std::optional<std::size_t> k) {
  const std::size_t n = cloud.size();
  if (n == 0) throw ValueError("knn_group: empty cloud");
  if (k && *k == 0) throw ValueError("knn_group: k must be >= 1");
  if (centroid_indices.empty()) throw ValueError("knn_group: no centroids");
  const std::size_t group = k ? *k : n;

  GroupedSet out;
  out.group_size = group;
  out.centroids.reserve(centroid_indices.size());
  out.group_indices.reserve(centroid_indices.size() * group);
  for (std::size_t c : centroid_indices) {
    if (c >= n) throw ValueError("knn_group: centroid index out of range");
    const Vec3& centre = cloud.coords[c];
    out.centroids.push_back(centre);
    auto members = nearest_indices(cloud.coords, centre, group);
    members.resize(group, members.front());
    out.group_indices.insert(out.group_indices.end(), members.begin(), members.end());
  }

  out.group_features = Tensor({out.group_indices.size(), 6});
  for (std::size_t g = 0; g < centroid_indices.size(); ++g) {
    const Vec3& centre = out.centroids[g];
    for (std::size_t j = 0; j < group; ++j) {
      const std::size_t row = g * group + j;
      const std::size_t src = out.group_indices[row];
      for (int a = 0; a < 3; ++a) {
        out.group_features(row, a) = static_cast<Real>(cloud.coords[src][a] - centre[a]);
        out.group_features(row, 3 + a) = static_cast<Real>(cloud.normals[src][a]);
      }
    }
  }
  return out;
}

GroupedSet group_all(const PointCloud& cloud) {
  const std::size_t n = cloud.size();
  if (n == 0) throw ValueError("group_all: empty cloud");
  GroupedSet out;
  out.group_size = n;
  out.centroids.push_back({0.0, 0.0, 0.0});
  out.group_indices.resize(n);
  std::iota(out.group_indices.begin(), out.group_indices.end(), std::size_t{0});
  out.group_features = Tensor({n, 6});
  for (std::size_t i = 0; i < n; ++i) {
    for (int a = 0; a < 3; ++a) {
      out.group_features(i, a) = static_cast<Real>(cloud.coords[i][a]);
      out.group_features(i, 3 + a) = static_cast<Real>(cloud.normals[i][a]);
    }
  }
  return out;
}

InterpolationPlan interpolation_plan(std::span<const Vec3> src_coords, std::span<const Vec3> dst_coords) {
  if (src_coords.empty()) throw ValueError("interpolate_features: no source points");
  for (const auto* set : {&src_coords, &dst_coords}) {
    for (const auto& p : *set) {
      if (!std::isfinite(p[0]) || !std::isfinite(p[1]) || !std::isfinite(p[2])) {
        throw ValueError("interpolate_features: non-finite coordinate");
      }
    }
  }
  InterpolationPlan plan;
  plan.per_row = std::min(kInterpolationNeighbors, src_coords.size());
  plan.indices.reserve(dst_coords.size() * plan.per_row);
  plan.weights.reserve(dst_coords.size() * plan.per_row);
  for (const auto& dst : dst_coords) {
    const auto nn = nearest_indices(src_coords, dst, plan.per_row);
    std::array<double, kInterpolationNeighbors> w{};
    const double nearest = std::sqrt(squared_distance(src_coords[nn[0]], dst));
    if (nearest < kCoincideEpsilon) {
      w[0] = 1.0;
    } else {
      double total = 0.0;
      for (std::size_t j = 0; j < nn.size(); ++j) {
        w[j] = 1.0 / (squared_distance(src_coords[nn[j]], dst) + kInterpolationEpsilon);
        total += w[j];
      }
      for (std::size_t j = 0; j < nn.size(); ++j) w[j] /= total;
    }
    for (std::size_t j = 0; j < nn.size(); ++j) {
      plan.indices.push_back(nn[j]);
      plan.weights.push_back(w[j]);
    }
  }
  return plan;
}

Tensor interpolate_features(std::span<const Vec3> src_coords, const Tensor& src_feats,
                            std::span<const Vec3> dst_coords) {
  if (src_feats.rows() != src_coords.size()) {
    throw DimensionError("interpolate_features", "src_feats",
                         std::to_string(src_feats.rows()) + " rows for " + std::to_string(src_coords.size()) +
                             " sources");
  }
  if (dst_coords.empty()) throw ValueError("interpolate_features: no destination points");
  const auto plan = interpolation_plan(src_coords, dst_coords);
  const std::size_t c = src_feats.cols();
  Tensor out({dst_coords.size(), c});
  for (std::size_t r = 0; r < dst_coords.size(); ++r) {
    for (std::size_t j = 0; j < plan.per_row; ++j) {
      const std::size_t src = plan.indices[r * plan.per_row + j];
      const double w = plan.weights[r * plan.per_row + j];
      if (w == 0.0) continue;
      if (w == 1.0) {
        for (std::size_t ch = 0; ch < c; ++ch) out(r, ch) = src_feats(src, ch);
        break;
      }
      for (std::size_t ch = 0; ch < c; ++ch) out(r, ch) += static_cast<Real>(w) * src_feats(src, ch);
    }
  }
  return out;
}

}  // namespace pcdu
