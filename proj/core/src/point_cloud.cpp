#include "pcdu/point_cloud.hpp"

#include <cmath>
#include <string>

#include "pcdu/errors.hpp"

namespace pcdu {

void PointCloud::validate(std::int32_t num_classes) const {
  if (coords.empty()) throw ValueError("point cloud is empty");
  if (normals.size() != coords.size()) throw ValueError("point cloud: normals/coords length mismatch");
  if (labels && labels->size() != coords.size()) throw ValueError("point cloud: labels/coords length mismatch");
  for (std::size_t i = 0; i < coords.size(); ++i) {
    for (int a = 0; a < 3; ++a) {
      if (!std::isfinite(coords[i][a]) || !std::isfinite(normals[i][a])) {
        throw ValueError("point cloud: non-finite value at point " + std::to_string(i));
      }
    }
  }
  if (labels && num_classes > 0) {
    for (std::size_t i = 0; i < labels->size(); ++i) {
      const auto l = (*labels)[i];
      if (l < 0 || l >= num_classes) {
        throw ValueError("point cloud: label " + std::to_string(l) + " at point " + std::to_string(i) +
                         " outside [0, " + std::to_string(num_classes) + ")");
      }
    }
  }
}

}  // namespace pcdu
