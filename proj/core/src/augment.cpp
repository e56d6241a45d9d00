#include "pcdu/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "pcdu/errors.hpp"

namespace pcdu {

std::string to_string(AugmentKind kind) {
  switch (kind) {
    case AugmentKind::Jitter: return "jitter";
    case AugmentKind::Rotation: return "rotation";
    case AugmentKind::Perturbation: return "perturbation";
    case AugmentKind::JitterPerturbation: return "jitter+perturbation";
  }
  return "jitter";
}

AugmentKind parse_augment_kind(std::string_view text) {
  if (text == "jitter" || text == "jittered") return AugmentKind::Jitter;
  if (text == "rotation") return AugmentKind::Rotation;
  if (text == "perturbation") return AugmentKind::Perturbation;
  if (text == "jitter+perturbation" || text == "jittered+perturbation") return AugmentKind::JitterPerturbation;
  throw ConfigError("unknown augmentation '" + std::string(text) +
                    "' (expected jitter, rotation, perturbation or jitter+perturbation)");
}

void AugmentConfig::validate() const {
  if (!(sigma >= 0.0) || !(clip >= 0.0) || !(max_perturb_angle >= 0.0)) {
    throw ConfigError("augmentation parameters must be non-negative");
  }
}

namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

Mat3 multiply(const Mat3& a, const Mat3& b) {
  Mat3 out{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) out[i][j] += a[i][k] * b[k][j];
  return out;
}

Vec3 apply(const Mat3& m, const Vec3& v) {
  return {m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2], m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
          m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2]};
}

Mat3 rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return {{{1, 0, 0}, {0, c, -s}, {0, s, c}}};
}
Mat3 rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return {{{c, 0, s}, {0, 1, 0}, {-s, 0, c}}};
}
Mat3 rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return {{{c, -s, 0}, {s, c, 0}, {0, 0, 1}}};
}

PointCloud rotate(const PointCloud& cloud, const Mat3& m) {
  PointCloud out = cloud;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.coords[i] = apply(m, cloud.coords[i]);
    out.normals[i] = apply(m, cloud.normals[i]);
  }
  return out;
}

}  // namespace

PointCloud jitter(const PointCloud& cloud, double sigma, double clip, RngStream& rng, bool renormalize_normals) {
  if (!(sigma >= 0.0) || !(clip >= 0.0)) throw ValueError("jitter: sigma and clip must be non-negative");
  PointCloud out = cloud;
  if (sigma > 0.0 && clip > 0.0) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      for (auto* field : {&out.coords[i], &out.normals[i]}) {
        for (double& v : *field) v += std::clamp(rng.normal(0.0, sigma), -clip, clip);
      }
    }
  }
  if (renormalize_normals) {
    for (auto& nrm : out.normals) {
      const double len = std::sqrt(dot(nrm, nrm));
      if (len > 0.0) {
        for (double& v : nrm) v /= len;
      }
    }
  }
  return out;
}

PointCloud rotate_y(const PointCloud& cloud, double angle) { return rotate(cloud, rot_y(angle)); }

PointCloud rotate_y(const PointCloud& cloud, RngStream& rng) {
  return rotate_y(cloud, rng.uniform(0.0, 2.0 * std::numbers::pi));
}

PointCloud perturb(const PointCloud& cloud, double max_angle, RngStream& rng) {
  if (!(max_angle >= 0.0)) throw ValueError("perturb: max_angle must be non-negative");
  const double ax = rng.uniform(-max_angle, max_angle);
  const double ay = rng.uniform(-max_angle, max_angle);
  const double az = rng.uniform(-max_angle, max_angle);
  if (max_angle == 0.0) return cloud;
  return rotate(cloud, multiply(rot_z(az), multiply(rot_y(ay), rot_x(ax))));
}

PointCloud augment(const PointCloud& cloud, const AugmentConfig& config, RngStream& rng) {
  switch (config.kind) {
    case AugmentKind::Jitter:
    case AugmentKind::JitterPerturbation:
      return jitter(cloud, config.sigma, config.clip, rng, config.renormalize_normals);
    case AugmentKind::Rotation: return rotate_y(cloud, rng);
    case AugmentKind::Perturbation: return perturb(cloud, config.max_perturb_angle, rng);
  }
  return cloud;
}

AugmentedPair make_pair(const PointCloud& cloud, const AugmentConfig& config, RngStream& rng_a, RngStream& rng_b,
                        std::uint64_t source_id) {
  config.validate();
  AugmentedPair pair;
  pair.source_id = source_id;
  pair.view_a = augment(cloud, config, rng_a);
  if (config.kind == AugmentKind::JitterPerturbation) {
    pair.view_b = perturb(cloud, config.max_perturb_angle, rng_b);
  } else {
    pair.view_b = augment(cloud, config, rng_b);
  }
  return pair;
}

}  // namespace pcdu
