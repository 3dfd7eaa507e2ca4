// SPDX-License-Identifier: Apache-2.0

#ifndef GEODEPTH_SYNTHSCENE_HPP
#define GEODEPTH_SYNTHSCENE_HPP

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "geodepth/error.hpp"
#include "geodepth/geometry.hpp"
#include "geodepth/normals.hpp"

namespace geodepth {

// Closed-form scenes for exercising the pipeline without sensor data: every
// quantity a test compares against (hit depth, surface normal, camera
// visibility) has an analytic value.

/// Plane through `point`. A positive half-extent bounds the plane to a
/// rectangle in its own in-plane basis; zero leaves that direction infinite.
struct Plane {
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  double half_u = 0.0;
  double half_v = 0.0;

  /// Deterministic in-plane basis; the silhouette of a bounded plane is the
  /// projection of the rectangle spanned by these axes. For a camera-facing
  /// plane (normal along z) e1 is the x direction and e2 the y direction.
  void basis(Eigen::Vector3d* e1, Eigen::Vector3d* e2) const {
    const Eigen::Vector3d ref = std::abs(normal.z()) < 0.9
                                    ? Eigen::Vector3d::UnitZ()
                                    : Eigen::Vector3d::UnitY();
    *e1 = ref.cross(normal).normalized();
    *e2 = normal.cross(*e1);
  }
};

struct Sphere {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 1.0;
};

struct Surface {
  enum class Kind { kPlane, kSphere } kind = Kind::kPlane;
  Plane plane;
  Sphere sphere;

  static Surface make_plane(const Eigen::Vector3d& point,
                            const Eigen::Vector3d& normal, double half_u = 0.0,
                            double half_v = 0.0) {
    if (normal.norm() < 1e-12) {
      throw ConfigError("plane normal must be nonzero");
    }
    if (half_u < 0.0 || half_v < 0.0) {
      throw ConfigError("plane half extents must be non-negative");
    }
    Surface s;
    s.kind = Kind::kPlane;
    s.plane.point = point;
    s.plane.normal = normal.normalized();
    s.plane.half_u = half_u;
    s.plane.half_v = half_v;
    return s;
  }

  static Surface make_sphere(const Eigen::Vector3d& center, double radius) {
    if (!(radius > 0.0)) {
      throw ConfigError("sphere radius must be positive, got " +
                        std::to_string(radius));
    }
    Surface s;
    s.kind = Kind::kSphere;
    s.sphere.center = center;
    s.sphere.radius = radius;
    return s;
  }
};

/// Regular LiDAR sweep: `lines` elevation rows, azimuth swept in fixed
/// steps. Angles are image-order (azimuth grows to the right, elevation
/// upward), in degrees.
struct LidarPattern {
  int lines = 64;
  double elevation_min_deg = -15.0;
  double elevation_max_deg = 5.0;
  double azimuth_min_deg = -45.0;
  double azimuth_max_deg = 45.0;
  double azimuth_step_deg = 0.2;

  void validate() const {
    if (lines < 1) throw ConfigError("pattern needs at least one line");
    if (!(azimuth_step_deg > 0.0)) {
      throw ConfigError("azimuth step must be positive");
    }
    if (elevation_max_deg < elevation_min_deg ||
        azimuth_max_deg < azimuth_min_deg) {
      throw ConfigError("pattern angle ranges are reversed");
    }
  }
};

struct SceneSpec {
  std::vector<Surface> surfaces;
  RigidTransform lidar_pose;   ///< LiDAR frame -> world (including axis swap)
  RigidTransform camera_pose;  ///< camera frame -> world
  CameraIntrinsics intrinsics;
  LidarPattern pattern;
  double max_range = 120.0;
  double range_jitter_sigma = 0.0;
  std::uint32_t seed = 0;

  void validate() const {
    if (surfaces.empty()) {
      throw InputError("scene has no surfaces");
    }
    intrinsics.validate();
    lidar_pose.validate();
    camera_pose.validate();
    pattern.validate();
    if (!(max_range > 0.0)) throw ConfigError("max_range must be positive");
    if (range_jitter_sigma < 0.0) {
      throw ConfigError("range jitter sigma must be non-negative");
    }
  }
};

namespace detail {

constexpr double kRayEps = 1e-9;

// Smallest t > kRayEps with origin + t * dir on the surface. `dir` need not
// be normalized; t is in units of |dir|.
inline std::optional<double> intersect_ray(const Surface& s,
                                           const Eigen::Vector3d& origin,
                                           const Eigen::Vector3d& dir) {
  if (s.kind == Surface::Kind::kPlane) {
    const double denom = s.plane.normal.dot(dir);
    if (std::abs(denom) < 1e-14) return std::nullopt;
    const double t = s.plane.normal.dot(s.plane.point - origin) / denom;
    if (t <= kRayEps) return std::nullopt;
    if (s.plane.half_u > 0.0 || s.plane.half_v > 0.0) {
      Eigen::Vector3d e1, e2;
      s.plane.basis(&e1, &e2);
      const Eigen::Vector3d q = origin + t * dir - s.plane.point;
      if (s.plane.half_u > 0.0 && std::abs(q.dot(e1)) > s.plane.half_u) {
        return std::nullopt;
      }
      if (s.plane.half_v > 0.0 && std::abs(q.dot(e2)) > s.plane.half_v) {
        return std::nullopt;
      }
    }
    return t;
  }
  // Sphere.
  const Eigen::Vector3d oc = origin - s.sphere.center;
  const double a = dir.squaredNorm();
  const double b = 2.0 * oc.dot(dir);
  const double c = oc.squaredNorm() - s.sphere.radius * s.sphere.radius;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  const double t0 = (-b - sq) / (2.0 * a);
  if (t0 > kRayEps) return t0;
  const double t1 = (-b + sq) / (2.0 * a);
  if (t1 > kRayEps) return t1;
  return std::nullopt;
}

inline Eigen::Vector3d surface_normal_at(const Surface& s,
                                         const Eigen::Vector3d& p) {
  if (s.kind == Surface::Kind::kPlane) return s.plane.normal;
  return (p - s.sphere.center).normalized();
}

struct Hit {
  double t = 0.0;
  int surface = -1;
};

inline std::optional<Hit> nearest_hit(const std::vector<Surface>& surfaces,
                                      const Eigen::Vector3d& origin,
                                      const Eigen::Vector3d& dir) {
  std::optional<Hit> best;
  for (std::size_t k = 0; k < surfaces.size(); ++k) {
    const auto t = intersect_ray(surfaces[k], origin, dir);
    if (!t) continue;
    if (!best || *t < best->t) best = Hit{*t, static_cast<int>(k)};
  }
  return best;
}

}  // namespace detail

/// A rendered sweep with its bookkeeping: which surface each point came
/// from and whether the camera origin has an unobstructed line of sight to
/// it. Points are in the LiDAR frame.
struct SyntheticScan {
  LidarScan scan;
  std::vector<int> surface_id;
  std::vector<std::uint8_t> camera_visible;
};

/// Casts the scan pattern through the scene. Rays that miss every surface
/// (or hit beyond max_range) produce no point. Range jitter, when enabled,
/// perturbs the return along the ray; identical spec and seed give
/// bit-identical output.
inline SyntheticScan render_scan(const SceneSpec& spec) {
  spec.validate();
  const double deg = M_PI / 180.0;
  std::mt19937 rng(spec.seed);
  std::normal_distribution<double> jitter(0.0, 1.0);

  const Eigen::Vector3d lidar_origin = spec.lidar_pose.translation;
  const Eigen::Vector3d camera_origin = spec.camera_pose.translation;

  SyntheticScan out;
  out.scan.num_lines = spec.pattern.lines;
  const int lines = spec.pattern.lines;
  for (int l = 0; l < lines; ++l) {
    const double el =
        lines == 1
            ? spec.pattern.elevation_min_deg * deg
            : (spec.pattern.elevation_min_deg +
               (spec.pattern.elevation_max_deg - spec.pattern.elevation_min_deg) *
                   l / (lines - 1)) *
                  deg;
    for (double az_deg = spec.pattern.azimuth_min_deg;
         az_deg <= spec.pattern.azimuth_max_deg + 1e-12;
         az_deg += spec.pattern.azimuth_step_deg) {
      const double a = -az_deg * deg;  // standard math azimuth
      const Eigen::Vector3d dir_lidar(std::cos(el) * std::cos(a),
                                      std::cos(el) * std::sin(a), std::sin(el));
      const Eigen::Vector3d dir_world = spec.lidar_pose.rotation * dir_lidar;
      const auto hit =
          detail::nearest_hit(spec.surfaces, lidar_origin, dir_world);
      if (!hit) continue;
      double range = hit->t;
      if (spec.range_jitter_sigma > 0.0) {
        range += spec.range_jitter_sigma * jitter(rng);
      }
      if (!(range > 0.0) || range > spec.max_range) continue;

      out.scan.points.push_back(range * dir_lidar);
      out.scan.line_index.push_back(l);
      out.surface_id.push_back(hit->surface);

      // Line of sight from the camera to the recorded point.
      const Eigen::Vector3d p_world = lidar_origin + range * dir_world;
      const Eigen::Vector3d seg = p_world - camera_origin;
      const auto block =
          detail::nearest_hit(spec.surfaces, camera_origin, seg);
      const bool occluded = block && block->t < 1.0 - 1e-6;
      out.camera_visible.push_back(occluded ? 0 : 1);
    }
  }
  return out;
}

/// Pixel-exact scene rendering from the camera. Depth is the camera-frame z
/// of the first hit along the ray through the integer pixel coordinates.
/// Misses carry max_range and are flagged; normals are camera-frame, unit,
/// oriented toward the camera.
struct TruthImage {
  DenseDepthMap depth;
  Image<std::uint8_t> miss;
  NormalMap normal;
};

inline TruthImage render_truth(const SceneSpec& spec) {
  spec.validate();
  const auto& intr = spec.intrinsics;
  TruthImage out;
  out.depth = DenseDepthMap(intr.width, intr.height, spec.max_range);
  out.miss = Image<std::uint8_t>(intr.width, intr.height, 0);
  out.normal = NormalMap(intr.width, intr.height);

  const Eigen::Vector3d origin = spec.camera_pose.translation;
  for (int v = 0; v < intr.height; ++v) {
    for (int u = 0; u < intr.width; ++u) {
      // z-component 1: the ray parameter equals the camera-frame depth.
      const Eigen::Vector3d dir_cam((u - intr.pu) / intr.fu,
                                    (v - intr.pv) / intr.fv, 1.0);
      const Eigen::Vector3d dir_world = spec.camera_pose.rotation * dir_cam;
      const auto hit = detail::nearest_hit(spec.surfaces, origin, dir_world);
      if (!hit || hit->t > spec.max_range) {
        out.miss.at(u, v) = 1;
        continue;
      }
      out.depth.at(u, v) = hit->t;
      const Eigen::Vector3d p_world = origin + hit->t * dir_world;
      Eigen::Vector3d n_cam =
          spec.camera_pose.rotation.transpose() *
          detail::surface_normal_at(spec.surfaces[hit->surface], p_world);
      if (n_cam.dot(dir_cam) > 0.0) n_cam = -n_cam;
      out.normal.normal.at(u, v) = n_cam;
      out.normal.valid.at(u, v) = 1;
    }
  }
  return out;
}

/// Ground truth as a sparse map: every rendered pixel becomes a seed, misses
/// stay empty. The form the evaluation metrics consume.
inline SparseDepthMap truth_as_sparse(const TruthImage& truth) {
  SparseDepthMap out(truth.depth.width(), truth.depth.height());
  for (int v = 0; v < truth.depth.height(); ++v) {
    for (int u = 0; u < truth.depth.width(); ++u) {
      if (truth.miss.at(u, v)) continue;
      out.set(u, v, truth.depth.at(u, v));
    }
  }
  return out;
}

}  // namespace geodepth

#endif  // GEODEPTH_SYNTHSCENE_HPP
