#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace pcdu {

using Vec3 = std::array<double, 3>;

/// n points with coordinates, normals and optional per-point labels.
struct PointCloud {
  std::vector<Vec3> coords;
  std::vector<Vec3> normals;
  std::optional<std::vector<std::int32_t>> labels;

  std::size_t size() const noexcept { return coords.size(); }
  bool labeled() const noexcept { return labels.has_value(); }

  /// Throws ValueError when the fields disagree in length, a value is not
  /// finite, the cloud is empty, or (with num_classes > 0) a label is out of range.
  void validate(std::int32_t num_classes = 0) const;

  bool operator==(const PointCloud&) const = default;
};

inline double squared_distance(const Vec3& a, const Vec3& b) noexcept {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

inline double dot(const Vec3& a, const Vec3& b) noexcept { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

}  // namespace pcdu
