// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "geodepth/normals.hpp"
#include "testutil.hpp"

using namespace geodepth;

namespace {

constexpr double kDeg = M_PI / 180.0;

// Samples a surface r(azimuth, elevation) on a regular scan pattern.
// The range function returns <= 0 for a miss.
LidarScan make_surface_scan(const std::function<double(double, double)>& range_of,
                            int lines, double el_min, double el_max,
                            double az_min, double az_max, double az_step) {
  LidarScan scan;
  scan.num_lines = lines;
  for (int l = 0; l < lines; ++l) {
    const double el = el_min + (el_max - el_min) * l / (lines - 1);
    for (double az = az_min; az <= az_max + 1e-12; az += az_step) {
      const double r = range_of(az, el);
      if (!(r > 0.0)) continue;
      SphericalPoint s;
      s.range = r;
      s.azimuth = az;
      s.elevation = el;
      scan.points.push_back(from_spherical(s));
      scan.line_index.push_back(l);
    }
  }
  return scan;
}

// Range of a plane through p0 with (not necessarily unit) normal n, seen
// from the origin along the image-order spherical direction.
std::function<double(double, double)> plane_range(const Eigen::Vector3d& p0,
                                                  const Eigen::Vector3d& n) {
  return [p0, n](double az, double el) {
    SphericalPoint s;
    s.range = 1.0;
    s.azimuth = az;
    s.elevation = el;
    const Eigen::Vector3d dir = from_spherical(s);
    const double denom = n.dot(dir);
    if (std::abs(denom) < 1e-12) return -1.0;
    const double r = n.dot(p0) / denom;
    return r > 0.0 ? r : -1.0;
  };
}

double angle_between(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double c = std::clamp(std::abs(a.normalized().dot(b.normalized())),
                              0.0, 1.0);
  return std::acos(c);  // orientation-insensitive
}

double median(std::vector<double> v) {
  REQUIRE(!v.empty());
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

// Native-resolution column count for a sweep, so occupied cells stay within
// the default neighbor gap.
int az_count(double az_min, double az_max, double az_step) {
  return static_cast<int>((az_max - az_min) / az_step) + 1;
}

}  // namespace

TEST_CASE("build_range_image bins a single point into a single cell") {
  LidarScan scan;
  scan.points.emplace_back(5.0, 1.0, 0.3);
  const auto ri = build_range_image(scan, 512, 64);
  CHECK(ri.cols() == 512);
  CHECK(ri.rows() == 64);
  CHECK(ri.occupied_count() == 1);
  REQUIRE(ri.occupied(0, 0));
  CHECK(ri.range(0, 0) == Catch::Approx(scan.points[0].norm()).epsilon(1e-12));
  CHECK(ri.source_id(0, 0) == 0);
}

TEST_CASE("build_range_image follows scanner lines when present") {
  LidarScan scan;
  scan.num_lines = 3;
  for (int l = 0; l < 3; ++l) {
    for (int k = 0; k < 5; ++k) {
      SphericalPoint s;
      s.range = 10.0;
      s.azimuth = -0.2 + 0.1 * k;
      s.elevation = -0.1 + 0.1 * l;
      scan.points.push_back(from_spherical(s));
      scan.line_index.push_back(l);
    }
  }
  const auto ri = build_range_image(scan, 64, 16);
  CHECK(ri.rows() == 3);
  CHECK(ri.occupied_count() == 15);
  for (int r = 0; r < 3; ++r) {
    int per_row = 0;
    double last_az = -10.0;
    for (int c = 0; c < ri.cols(); ++c) {
      if (!ri.occupied(c, r)) continue;
      ++per_row;
      CHECK(ri.azimuth(c, r) >= last_az);  // columns ordered by azimuth
      last_az = ri.azimuth(c, r);
    }
    CHECK(per_row == 5);
  }
}

TEST_CASE("build_range_image keeps the nearest point on cell collisions") {
  LidarScan scan;
  scan.points.emplace_back(8.0, 0.0, 0.0);
  scan.points.emplace_back(5.0, 0.0, 0.0);
  scan.points.emplace_back(9.0, 0.0, 0.0);
  const auto ri = build_range_image(scan, 1, 1);
  REQUIRE(ri.occupied_count() == 1);
  CHECK(ri.range(0, 0) == Catch::Approx(5.0));
  CHECK(ri.source_id(0, 0) == 1);
}

TEST_CASE("build_range_image validates its configuration") {
  LidarScan scan;
  scan.points.emplace_back(1.0, 0.0, 0.0);
  CHECK_THROWS_AS(build_range_image(scan, 0), ConfigError);
  CHECK_THROWS_AS(build_range_image(scan, 512, -1), ConfigError);
  LidarScan bad;
  bad.points.emplace_back(1.0, 0.0, 0.0);
  bad.line_index = {0, 1};
  CHECK_THROWS_AS(build_range_image(bad), InputError);
  LidarScan neg;
  neg.points.emplace_back(1.0, 0.0, 0.0);
  neg.line_index = {-2};
  CHECK_THROWS_AS(build_range_image(neg), InputError);
}

TEST_CASE("normals on a sphere centered at the sensor are radial") {
  const auto scan = make_surface_scan(
      [](double, double) { return 7.5; }, 32, -0.4, 0.4, -0.6, 0.6, 0.02);
  const auto ri = build_range_image(scan, az_count(-0.6, 0.6, 0.02));
  for (const bool smooth : {true, false}) {
    NormalEstimationConfig cfg;
    cfg.smooth_partials = smooth;
    const auto nrm = estimate_normals(ri, cfg);
    REQUIRE(nrm.count_valid() > 0.9 * scan.points.size());
    for (std::size_t i = 0; i < scan.points.size(); ++i) {
      if (!nrm.valid[i]) continue;
      const Eigen::Vector3d expect = -scan.points[i].normalized();
      REQUIRE(nrm.normal[i].dot(expect) == Catch::Approx(1.0).margin(1e-9));
    }
  }
}

TEST_CASE("normals on a fronto-facing plane match the analytic normal") {
  const auto scan = make_surface_scan(plane_range({5.0, 0.0, 0.0}, {1.0, 0.0, 0.0}),
                                      40, -0.2, 0.2, -0.4, 0.4, 0.2 * kDeg);
  const auto ri = build_range_image(scan, az_count(-0.4, 0.4, 0.2 * kDeg));
  const auto nrm = estimate_normals(ri);
  const Eigen::Vector3d expect(-1.0, 0.0, 0.0);  // oriented toward the sensor
  std::vector<double> errs;
  for (std::size_t i = 0; i < scan.points.size(); ++i) {
    if (!nrm.valid[i]) continue;
    REQUIRE(nrm.normal[i].norm() == Catch::Approx(1.0).epsilon(1e-9));
    REQUIRE(nrm.normal[i].dot(expect) > 0.999);
    errs.push_back(angle_between(nrm.normal[i], expect));
  }
  REQUIRE(errs.size() > 1000);
  CHECK(median(errs) < 2.0 * kDeg);
}

TEST_CASE("parallel planes at different ranges yield the same normals") {
  const auto near = make_surface_scan(plane_range({5.0, 0.0, 0.0}, {1.0, 0.0, 0.0}),
                                      24, -0.2, 0.2, -0.3, 0.3, 0.2 * kDeg);
  const auto far = make_surface_scan(plane_range({20.0, 0.0, 0.0}, {1.0, 0.0, 0.0}),
                                     24, -0.2, 0.2, -0.3, 0.3, 0.2 * kDeg);
  REQUIRE(near.points.size() == far.points.size());
  const int cols = az_count(-0.3, 0.3, 0.2 * kDeg);
  const auto nn = estimate_normals(build_range_image(near, cols));
  const auto nf = estimate_normals(build_range_image(far, cols));
  std::vector<double> angles;
  for (std::size_t i = 0; i < near.points.size(); ++i) {
    if (!nn.valid[i] || !nf.valid[i]) continue;
    angles.push_back(angle_between(nn.normal[i], nf.normal[i]));
  }
  REQUIRE(angles.size() > 500);
  CHECK(median(angles) < 1.0 * kDeg);
}

TEST_CASE("plane normal error decreases with sampling density") {
  const Eigen::Vector3d n = Eigen::Vector3d(1.0, 0.35, 0.25).normalized();
  const Eigen::Vector3d p0(5.0, 0.0, 0.0);
  std::vector<double> med;
  for (const double step_deg : {0.8, 0.4, 0.2}) {
    const int lines = static_cast<int>(0.5 / (step_deg * kDeg)) + 1;
    const auto scan = make_surface_scan(plane_range(p0, n), lines, -0.25, 0.25,
                                        -0.3, 0.3, step_deg * kDeg);
    const auto nrm = estimate_normals(
        build_range_image(scan, az_count(-0.3, 0.3, step_deg * kDeg)));
    std::vector<double> errs;
    for (std::size_t i = 0; i < scan.points.size(); ++i) {
      if (!nrm.valid[i]) continue;
      errs.push_back(angle_between(nrm.normal[i], n));
    }
    REQUIRE(errs.size() > 100);
    med.push_back(median(errs));
  }
  CHECK(med[1] <= med[0] + 1e-12);
  CHECK(med[2] <= med[1] + 1e-12);
}

TEST_CASE("normals need neighbors along both grid directions") {
  // One line only: no vertical neighbors anywhere.
  const auto row = make_surface_scan([](double, double) { return 6.0; }, 2,
                                     0.0, 0.2, -0.3, 0.3, 0.05);
  const int row_cols = az_count(-0.3, 0.3, 0.05);
  LidarScan single;
  single.num_lines = 1;
  for (std::size_t i = 0; i < row.points.size(); ++i) {
    if (row.line_index[i] != 0) continue;
    single.points.push_back(row.points[i]);
    single.line_index.push_back(0);
  }
  const auto nrm = estimate_normals(build_range_image(single, row_cols));
  CHECK(nrm.count_valid() == 0);

  // An isolated point has no neighbors at all.
  LidarScan one;
  one.points.emplace_back(4.0, 0.5, 0.2);
  CHECK(estimate_normals(build_range_image(one)).count_valid() == 0);
}

TEST_CASE("neighbor search respects the configured gap limit") {
  // Cells at columns 0 and 4 in two rows: horizontal gap of 4.
  RangeImage ri(8, 2, 4);
  int id = 0;
  for (int r = 0; r < 2; ++r) {
    for (const int c : {0, 4}) {
      SphericalPoint s;
      s.range = 5.0 + 0.1 * r;
      s.azimuth = 0.1 * c;
      s.elevation = 0.05 * r;
      ri.set_cell(c, r, s, id++);
    }
  }
  NormalEstimationConfig near_cfg;
  near_cfg.max_gap = 3;
  CHECK(estimate_normals(ri, near_cfg).count_valid() == 0);
  NormalEstimationConfig wide_cfg;
  wide_cfg.max_gap = 4;
  CHECK(estimate_normals(ri, wide_cfg).count_valid() == 4);
  NormalEstimationConfig bad_cfg;
  bad_cfg.max_gap = 0;
  CHECK_THROWS_AS(estimate_normals(ri, bad_cfg), ConfigError);
}

TEST_CASE("normals_to_camera rotates normals onto the pixel grid") {
  const auto scan = make_surface_scan(plane_range({6.0, 0.0, 0.0}, {1.0, 0.0, 0.0}),
                                      24, -0.15, 0.15, -0.25, 0.25, 0.01);
  const auto normals =
      estimate_normals(build_range_image(scan, az_count(-0.25, 0.25, 0.01)));

  CameraIntrinsics intr;
  intr.fu = intr.fv = 400.0;
  intr.pu = 320.0;
  intr.pv = 240.0;
  intr.width = 640;
  intr.height = 480;
  const auto extr = testutil::canonical_extrinsics(Eigen::Vector3d(0.05, 0.0, 0.0));
  const auto proj = project_scan(scan, extr, intr);
  const auto nmap = normals_to_camera(normals, extr, proj.map);

  CHECK(nmap.width() == 640);
  CHECK(nmap.height() == 480);
  REQUIRE(nmap.count_valid() > 0);
  int checked = 0;
  proj.map.for_each([&](int u, int v, double, std::int32_t id) {
    if (!normals.valid[id]) {
      CHECK_FALSE(nmap.has(u, v));
      return;
    }
    REQUIRE(nmap.has(u, v));
    const Eigen::Vector3d expect = extr.rotation * normals.normal[id];
    REQUIRE((nmap.at(u, v) - expect).norm() < 1e-12);
    // Fronto-facing plane: camera-frame normal points back at the camera.
    REQUIRE(nmap.at(u, v).z() < -0.99);
    ++checked;
  });
  REQUIRE(checked > 100);
}
