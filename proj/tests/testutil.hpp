// SPDX-License-Identifier: Apache-2.0
// Shared helpers for the test suite.

#ifndef GEODEPTH_TESTS_TESTUTIL_HPP
#define GEODEPTH_TESTS_TESTUTIL_HPP

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>

#include "geodepth/geometry.hpp"

namespace testutil {

/// Unique scratch directory, removed with everything in it on destruction.
class TempDir {
 public:
  TempDir() {
    const std::filesystem::path base = std::filesystem::temp_directory_path();
    std::random_device rd;
    for (int i = 0; i < 100; ++i) {
      std::filesystem::path p = base / ("geodepth-test-" + std::to_string(rd()));
      std::error_code ec;
      if (std::filesystem::create_directory(p, ec)) {
        path_ = p;
        return;
      }
    }
    throw std::runtime_error("cannot create a scratch directory");
  }

  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }

  const std::filesystem::path& path() const { return path_; }

  std::string file(const std::string& name) const {
    return (path_ / name).string();
  }

 private:
  std::filesystem::path path_;
};

/// Canonical LiDAR-to-camera axis rotation: LiDAR x (forward) -> camera z,
/// LiDAR y (left) -> camera -x, LiDAR z (up) -> camera -y.
inline Eigen::Matrix3d lidar_to_camera_axes() {
  Eigen::Matrix3d r;
  r << 0.0, -1.0, 0.0,  //
      0.0, 0.0, -1.0,   //
      1.0, 0.0, 0.0;
  return r;
}

/// Extrinsics with the canonical axis swap and an optional camera-frame
/// translation of the LiDAR origin.
inline geodepth::RigidTransform canonical_extrinsics(
    const Eigen::Vector3d& lidar_origin_in_camera = Eigen::Vector3d::Zero()) {
  return geodepth::RigidTransform{lidar_to_camera_axes(),
                                  lidar_origin_in_camera};
}

inline Eigen::Vector3d random_unit(std::mt19937& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector3d v;
  do {
    v = Eigen::Vector3d(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-6);
  return v.normalized();
}

inline geodepth::RigidTransform random_transform(std::mt19937& rng,
                                                 double max_translation = 2.0) {
  std::uniform_real_distribution<double> t(-max_translation, max_translation);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  while (q.norm() < 1e-6) q = Eigen::Quaterniond(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return geodepth::RigidTransform{q.toRotationMatrix(),
                                  Eigen::Vector3d(t(rng), t(rng), t(rng))};
}

}  // namespace testutil

#endif  // GEODEPTH_TESTS_TESTUTIL_HPP
