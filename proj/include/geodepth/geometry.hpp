// SPDX-License-Identifier: Apache-2.0

#ifndef GEODEPTH_GEOMETRY_HPP
#define GEODEPTH_GEOMETRY_HPP

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "geodepth/error.hpp"
#include "geodepth/image.hpp"

namespace geodepth {

// Frame conventions used throughout:
//   camera: x right, y down, z forward (optical axis)
//   LiDAR:  x forward, y left, z up
// Pixel coordinates: u is the column (grows right), v is the row (grows
// down). Depth is the camera-frame z coordinate in meters.

/// The axis permutation from LiDAR axes (x forward, y left, z up) to camera
/// axes (x right, y down, z forward). Rotation part of the textbook
/// forward-facing mounting.
inline Eigen::Matrix3d lidar_to_camera_axes() {
  Eigen::Matrix3d r;
  r << 0.0, -1.0, 0.0,  //
      0.0, 0.0, -1.0,   //
      1.0, 0.0, 0.0;
  return r;
}

/// Pinhole camera model, no distortion.
struct CameraIntrinsics {
  double fu = 0.0;  ///< focal length in pixels, horizontal
  double fv = 0.0;  ///< focal length in pixels, vertical
  double pu = 0.0;  ///< principal point, column
  double pv = 0.0;  ///< principal point, row
  int width = 0;    ///< image width in pixels
  int height = 0;   ///< image height in pixels

  void validate() const {
    if (!(fu > 0.0) || !(fv > 0.0)) {
      throw ConfigError("camera focal lengths must be positive, got fu=" +
                        std::to_string(fu) + " fv=" + std::to_string(fv));
    }
    if (width <= 0 || height <= 0) {
      throw ConfigError("camera image size must be positive, got " +
                        std::to_string(width) + "x" + std::to_string(height));
    }
  }
};

/// Rigid transform p' = R p + t. Used for LiDAR-to-camera extrinsics and
/// sensor poses in synthetic scenes.
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidTransform identity() { return RigidTransform{}; }

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return rotation * p + translation;
  }

  RigidTransform compose(const RigidTransform& other) const {
    // this ∘ other: apply `other` first.
    return RigidTransform{rotation * other.rotation,
                          rotation * other.translation + translation};
  }

  RigidTransform inverse() const {
    return RigidTransform{rotation.transpose(),
                          -(rotation.transpose() * translation)};
  }

  /// Throws unless the rotation part is orthonormal with determinant +1.
  void validate(double tol = 1e-6) const {
    const Eigen::Matrix3d rtr = rotation.transpose() * rotation;
    const double ortho_err = (rtr - Eigen::Matrix3d::Identity()).norm();
    if (!(ortho_err <= tol)) {
      throw InputError("rotation is not orthonormal (||R^T R - I|| = " +
                       std::to_string(ortho_err) + ")");
    }
    const double det = rotation.determinant();
    if (!(std::abs(det - 1.0) <= tol)) {
      throw InputError("rotation determinant must be +1, got " +
                       std::to_string(det));
    }
  }
};

/// One LiDAR sweep. `line_index` is optional (empty when the source format
/// carries no ring information); when present it has one entry per point.
struct LidarScan {
  std::vector<Eigen::Vector3d> points;
  std::vector<int> line_index;
  int num_lines = 0;  ///< scanner line count; 0 when unknown

  bool has_lines() const { return !line_index.empty(); }

  void validate() const {
    if (!line_index.empty() && line_index.size() != points.size()) {
      throw InputError("line_index size " + std::to_string(line_index.size()) +
                       " does not match point count " +
                       std::to_string(points.size()));
    }
  }
};

/// Spherical coordinates of a LiDAR-frame point.
///
/// The azimuth grows with the image column of the projected point and the
/// elevation grows upward:
///   azimuth   = -atan2(y, x), in (-pi, pi]
///   elevation = asin(z / range), in [-pi/2, pi/2]
/// At the poles (|elevation| = pi/2) the azimuth is undefined; it is returned
/// as 0 with `degenerate_azimuth` set.
struct SphericalPoint {
  double range = 0.0;
  double azimuth = 0.0;
  double elevation = 0.0;
  bool degenerate_azimuth = false;
};

inline SphericalPoint to_spherical(const Eigen::Vector3d& p) {
  const double r = p.norm();
  if (!(r > 0.0)) {
    throw InputError("to_spherical: zero-norm point has no direction");
  }
  SphericalPoint s;
  s.range = r;
  const double sin_elev = std::clamp(p.z() / r, -1.0, 1.0);
  s.elevation = std::asin(sin_elev);
  if (std::abs(p.x()) == 0.0 && std::abs(p.y()) == 0.0) {
    s.azimuth = 0.0;
    s.degenerate_azimuth = true;
  } else {
    s.azimuth = -std::atan2(p.y(), p.x());
    if (s.azimuth <= -M_PI) s.azimuth = M_PI;
  }
  return s;
}

inline Eigen::Vector3d from_spherical(const SphericalPoint& s) {
  if (!(s.range > 0.0)) {
    throw InputError("from_spherical: range must be positive, got " +
                     std::to_string(s.range));
  }
  const double a = -s.azimuth;
  const double ce = std::cos(s.elevation);
  return Eigen::Vector3d(s.range * ce * std::cos(a),
                         s.range * ce * std::sin(a),
                         s.range * std::sin(s.elevation));
}

/// Result of projecting a single point: continuous pixel coordinates plus
/// camera-frame depth.
struct PixelProjection {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
};

/// Projects a LiDAR-frame point into the image. Empty when the point is
/// behind the camera (z <= 0) or lands outside [0, W) x [0, H).
inline std::optional<PixelProjection> project_point(
    const Eigen::Vector3d& p_lidar, const RigidTransform& extrinsics,
    const CameraIntrinsics& intr) {
  const Eigen::Vector3d p = extrinsics.apply(p_lidar);
  if (!(p.z() > 0.0)) return std::nullopt;
  PixelProjection out;
  out.u = intr.fu * p.x() / p.z() + intr.pu;
  out.v = intr.fv * p.y() / p.z() + intr.pv;
  out.depth = p.z();
  if (out.u < 0.0 || out.u >= intr.width || out.v < 0.0 ||
      out.v >= intr.height) {
    return std::nullopt;
  }
  return out;
}

/// Inverse of the pinhole projection: the camera-frame point at depth z on
/// the ray through pixel (u, v). Depth must be positive.
inline Eigen::Vector3d unproject_pixel(double u, double v, double z,
                                       const CameraIntrinsics& intr) {
  if (!(z > 0.0)) {
    throw InputError("unproject_pixel: depth must be positive, got " +
                     std::to_string(z));
  }
  return Eigen::Vector3d(z * (u - intr.pu) / intr.fu,
                         z * (v - intr.pv) / intr.fv, z);
}

/// Sparse per-pixel depth with an optional source-point id per cell.
/// Present depths are always positive; absent cells read as unoccupied.
class SparseDepthMap {
 public:
  SparseDepthMap() = default;

  SparseDepthMap(int width, int height)
      : depth_(width, height, 0.0), ids_(width, height, -1) {}

  int width() const { return depth_.width(); }
  int height() const { return depth_.height(); }

  bool has(int u, int v) const { return depth_.at(u, v) > 0.0; }
  double depth(int u, int v) const { return depth_.at(u, v); }

  /// Source-point id of the cell, or -1 when unknown / unoccupied.
  std::int32_t source_id(int u, int v) const { return ids_.at(u, v); }

  void set(int u, int v, double depth, std::int32_t id = -1) {
    if (!(depth > 0.0)) {
      throw InputError("SparseDepthMap: depth must be positive, got " +
                       std::to_string(depth));
    }
    if (!has(u, v)) ++occupied_;
    depth_.at(u, v) = depth;
    ids_.at(u, v) = id;
  }

  void clear(int u, int v) {
    if (has(u, v)) --occupied_;
    depth_.at(u, v) = 0.0;
    ids_.at(u, v) = -1;
  }

  int occupied_count() const { return occupied_; }

  template <typename Fn>  // Fn(u, v, depth, id)
  void for_each(Fn&& fn) const {
    for (int v = 0; v < height(); ++v) {
      for (int u = 0; u < width(); ++u) {
        if (has(u, v)) fn(u, v, depth_.at(u, v), ids_.at(u, v));
      }
    }
  }

  bool operator==(const SparseDepthMap& other) const {
    return depth_ == other.depth_ && ids_ == other.ids_;
  }

 private:
  Image<double> depth_;
  Image<std::int32_t> ids_;
  int occupied_ = 0;
};

/// Fully populated depth image; every pixel holds a positive depth.
struct DenseDepthMap {
  Image<double> depth;

  DenseDepthMap() = default;
  DenseDepthMap(int width, int height, double fill = 1.0)
      : depth(width, height, fill) {}

  int width() const { return depth.width(); }
  int height() const { return depth.height(); }
  double at(int u, int v) const { return depth.at(u, v); }
  double& at(int u, int v) { return depth.at(u, v); }
};

/// One scan point that landed inside the image.
struct InFramePoint {
  std::int32_t id = -1;  ///< index into the originating scan
  double u = 0.0;        ///< continuous column
  double v = 0.0;        ///< continuous row
  double depth = 0.0;    ///< camera-frame z, meters
};

/// Scan projection result: the z-buffered sparse map plus every in-frame
/// point in scan order (including points that lost the z-buffer).
struct ProjectedScan {
  SparseDepthMap map;
  std::vector<InFramePoint> points;
};

/// Projects a scan into a sparse depth map. Points bin to pixel
/// (floor(u), floor(v)); when several points share a pixel the smallest
/// depth wins (ties keep the earliest point).
inline ProjectedScan project_scan(const LidarScan& scan,
                                  const RigidTransform& extrinsics,
                                  const CameraIntrinsics& intr) {
  intr.validate();
  scan.validate();
  ProjectedScan out;
  out.map = SparseDepthMap(intr.width, intr.height);
  out.points.reserve(scan.points.size() / 4);
  for (std::size_t i = 0; i < scan.points.size(); ++i) {
    const auto px = project_point(scan.points[i], extrinsics, intr);
    if (!px) continue;
    const auto id = static_cast<std::int32_t>(i);
    out.points.push_back(InFramePoint{id, px->u, px->v, px->depth});
    const int ui = static_cast<int>(std::floor(px->u));
    const int vi = static_cast<int>(std::floor(px->v));
    if (!out.map.has(ui, vi) || px->depth < out.map.depth(ui, vi)) {
      out.map.set(ui, vi, px->depth, id);
    }
  }
  return out;
}

/// Reconstructs a LiDAR-frame scan from a sparse depth map by unprojecting
/// every occupied cell at its pixel center. Near-inverse of project_scan:
/// reprojecting lands every point back in its source cell with its depth.
/// Cells are visited in row-major order, so point k corresponds to the k-th
/// occupied cell. The scan carries no line indices; elevation binning
/// recovers a line structure downstream when one is needed.
inline LidarScan scan_from_sparse(const SparseDepthMap& map,
                                  const CameraIntrinsics& intr,
                                  const RigidTransform& extrinsics) {
  intr.validate();
  const RigidTransform cam_to_lidar = extrinsics.inverse();
  LidarScan scan;
  scan.points.reserve(static_cast<std::size_t>(map.occupied_count()));
  map.for_each([&](int u, int v, double depth, std::int32_t) {
    scan.points.push_back(
        cam_to_lidar.apply(unproject_pixel(u + 0.5, v + 0.5, depth, intr)));
  });
  return scan;
}

}  // namespace geodepth

#endif  // GEODEPTH_GEOMETRY_HPP
