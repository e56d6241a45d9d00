#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "pcdu/point_cloud.hpp"
#include "pcdu/rng.hpp"

namespace pcdu {

enum class AugmentKind { Jitter, Rotation, Perturbation, JitterPerturbation };

std::string to_string(AugmentKind kind);
AugmentKind parse_augment_kind(std::string_view text);

struct AugmentConfig {
  AugmentKind kind = AugmentKind::Jitter;
  double sigma = 0.01;
  double clip = 0.05;
  double max_perturb_angle = 0.06;
  bool renormalize_normals = false;

  void validate() const;
};

/// Two independently augmented views of one source cloud.
/// view_a feeds encoder branch 1, view_b feeds branch 2.
struct AugmentedPair {
  PointCloud view_a;
  PointCloud view_b;
  std::uint64_t source_id = 0;
};

/// Adds clipped Gaussian noise to all six components of every point.
PointCloud jitter(const PointCloud& cloud, double sigma, double clip, RngStream& rng,
                  bool renormalize_normals = false);

/// Rotation by θ about +Y: x' = x cosθ + z sinθ, z' = −x sinθ + z cosθ.
PointCloud rotate_y(const PointCloud& cloud, double angle);
/// Same with θ ~ U[0, 2π).
PointCloud rotate_y(const PointCloud& cloud, RngStream& rng);

/// Rz·Ry·Rx with the three angles drawn from U[−max_angle, max_angle].
PointCloud perturb(const PointCloud& cloud, double max_angle, RngStream& rng);

PointCloud augment(const PointCloud& cloud, const AugmentConfig& config, RngStream& rng);

/// Builds the positive pair. For JitterPerturbation view_a is jittered and
/// view_b is perturbed; otherwise both views use the configured transform.
AugmentedPair make_pair(const PointCloud& cloud, const AugmentConfig& config, RngStream& rng_a,
                        RngStream& rng_b, std::uint64_t source_id = 0);

}  // namespace pcdu
