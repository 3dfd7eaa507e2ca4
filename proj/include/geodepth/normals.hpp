// SPDX-License-Identifier: Apache-2.0

#ifndef GEODEPTH_NORMALS_HPP
#define GEODEPTH_NORMALS_HPP

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "geodepth/error.hpp"
#include "geodepth/geometry.hpp"
#include "geodepth/image.hpp"

namespace geodepth {

// Surface normals from the scan's range image r(azimuth, elevation).
// Writing the surface implicitly as F(p) = ||p|| - r(azimuth(p), elevation(p))
// and taking the gradient in spherical coordinates gives, at a sample with
// range r and elevation e,
//
//   n  ∝  r_hat - (1 / (r cos e)) (dr/da) a_hat - (1 / r) (dr/de) e_hat
//
// with derivatives taken over the standard math azimuth. The derivatives are
// estimated by finite differences between neighboring range-image cells,
// using each cell's stored angles rather than bin centers.

/// Scan samples organized on a (line x azimuth-bin) grid. Cells keep the
/// originating point's exact spherical coordinates and its scan index.
/// When several points fall into one cell the nearest survives.
class RangeImage {
 public:
  RangeImage() = default;

  RangeImage(int cols, int rows, int num_points)
      : range_(cols, rows, 0.0),
        azimuth_(cols, rows, 0.0),
        elevation_(cols, rows, 0.0),
        ids_(cols, rows, -1),
        num_points_(num_points) {}

  int cols() const { return range_.width(); }
  int rows() const { return range_.height(); }
  int num_points() const { return num_points_; }

  bool occupied(int c, int r) const { return range_.at(c, r) > 0.0; }
  double range(int c, int r) const { return range_.at(c, r); }
  double azimuth(int c, int r) const { return azimuth_.at(c, r); }
  double elevation(int c, int r) const { return elevation_.at(c, r); }
  std::int32_t source_id(int c, int r) const { return ids_.at(c, r); }

  int occupied_count() const { return occupied_count_; }

  void set_cell(int c, int r, const SphericalPoint& s, std::int32_t id) {
    if (!(s.range > 0.0)) {
      throw InputError("RangeImage cell range must be positive");
    }
    if (!occupied(c, r)) ++occupied_count_;
    range_.at(c, r) = s.range;
    azimuth_.at(c, r) = s.azimuth;
    elevation_.at(c, r) = s.elevation;
    ids_.at(c, r) = id;
  }

 private:
  Image<double> range_;
  Image<double> azimuth_;
  Image<double> elevation_;
  Image<std::int32_t> ids_;
  int num_points_ = 0;
  int occupied_count_ = 0;
};

/// Bins a scan into a range image. Rows come from the scan's line indices
/// when present; otherwise elevations are binned into `fallback_lines`
/// uniform rows over the observed span. Columns bin the observed azimuth
/// span into `cols` bins. Points with (near) zero norm are skipped: they
/// have no direction to bin.
inline RangeImage build_range_image(const LidarScan& scan, int cols = 512,
                                    int fallback_lines = 64) {
  scan.validate();
  if (cols <= 0 || fallback_lines <= 0) {
    throw ConfigError("range image bin counts must be positive");
  }

  const int n = static_cast<int>(scan.points.size());
  std::vector<SphericalPoint> sph(n);
  std::vector<char> usable(n, 0);
  double az_min = 0.0, az_max = 0.0, el_min = 0.0, el_max = 0.0;
  bool first = true;
  for (int i = 0; i < n; ++i) {
    if (scan.points[i].norm() < 1e-9) continue;
    sph[i] = to_spherical(scan.points[i]);
    usable[i] = 1;
    if (first) {
      az_min = az_max = sph[i].azimuth;
      el_min = el_max = sph[i].elevation;
      first = false;
    } else {
      az_min = std::min(az_min, sph[i].azimuth);
      az_max = std::max(az_max, sph[i].azimuth);
      el_min = std::min(el_min, sph[i].elevation);
      el_max = std::max(el_max, sph[i].elevation);
    }
  }

  const bool use_lines = scan.has_lines();
  int rows = fallback_lines;
  if (use_lines) {
    int max_line = 0;
    for (int i = 0; i < n; ++i) {
      if (scan.line_index[i] < 0) {
        throw InputError("negative line index at point " + std::to_string(i));
      }
      max_line = std::max(max_line, scan.line_index[i]);
    }
    rows = std::max(scan.num_lines, max_line + 1);
  }

  RangeImage ri(cols, rows, n);
  const double az_span = az_max - az_min;
  const double el_span = el_max - el_min;
  for (int i = 0; i < n; ++i) {
    if (!usable[i]) continue;
    int c = 0;
    if (az_span > 0.0) {
      c = std::min(cols - 1, static_cast<int>((sph[i].azimuth - az_min) /
                                              az_span * cols));
    }
    int r = 0;
    if (use_lines) {
      r = scan.line_index[i];
    } else if (el_span > 0.0) {
      r = std::min(rows - 1, static_cast<int>((sph[i].elevation - el_min) /
                                              el_span * rows));
    }
    if (!ri.occupied(c, r) || sph[i].range < ri.range(c, r)) {
      ri.set_cell(c, r, sph[i], i);
    }
  }
  return ri;
}

struct NormalEstimationConfig {
  /// Furthest occupied neighbor (in cells) considered by the differences.
  int max_gap = 3;
  /// 3x3 box smoothing of the range derivatives before assembling normals.
  bool smooth_partials = true;
};

/// Per-point unit normals in the LiDAR frame, indexed by scan point id.
/// Points without an estimate have valid == 0 and a zero vector.
struct PointNormals {
  std::vector<Eigen::Vector3d> normal;
  std::vector<std::uint8_t> valid;

  explicit PointNormals(int n = 0)
      : normal(n, Eigen::Vector3d::Zero()), valid(n, 0) {}

  int count_valid() const {
    int k = 0;
    for (auto f : valid) k += f != 0;
    return k;
  }
};

namespace detail {

// Nearest occupied cell strictly before/after `c` along one axis, at most
// max_gap cells away. Returns the offset (signed) or 0 when none exists.
template <typename Occ>
inline int find_neighbor(const Occ& occupied, int c, int limit, int step,
                         int max_gap) {
  for (int k = 1; k <= max_gap; ++k) {
    const int cc = c + step * k;
    if (cc < 0 || cc >= limit) break;
    if (occupied(cc)) return step * k;
  }
  return 0;
}

// Difference quotient over the available neighbors. `angle` and `value` are
// evaluated per in-axis coordinate. Writes the quotient and returns true.
inline bool difference_quotient(double a_prev, double v_prev, bool has_prev,
                                double a_next, double v_next, bool has_next,
                                double a_center, double v_center,
                                double* out) {
  double a0 = a_center, v0 = v_center, a1 = a_center, v1 = v_center;
  if (has_prev && has_next) {
    a0 = a_prev; v0 = v_prev; a1 = a_next; v1 = v_next;
  } else if (has_prev) {
    a0 = a_prev; v0 = v_prev;
  } else if (has_next) {
    a1 = a_next; v1 = v_next;
  } else {
    return false;
  }
  const double da = a1 - a0;
  if (std::abs(da) < 1e-12) return false;
  *out = (v1 - v0) / da;
  return true;
}

}  // namespace detail

/// Estimates one unit normal per occupied range-image cell and scatters them
/// to the originating points. Cells lacking neighbors in either grid
/// direction produce no normal; outputs are oriented toward the sensor.
inline PointNormals estimate_normals(const RangeImage& ri,
                                     const NormalEstimationConfig& cfg = {}) {
  if (cfg.max_gap < 1) {
    throw ConfigError("max_gap must be at least 1, got " +
                      std::to_string(cfg.max_gap));
  }
  const int cols = ri.cols(), rows = ri.rows();
  PointNormals out(ri.num_points());
  if (cols == 0 || rows == 0) return out;

  // Pass 1: difference quotients of range over the standard azimuth and the
  // elevation. Stored azimuth grows with the image column, the standard
  // math azimuth is its negation.
  Image<double> dr_da(cols, rows, 0.0);
  Image<double> dr_de(cols, rows, 0.0);
  Image<std::uint8_t> has_partials(cols, rows, 0);

  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (!ri.occupied(c, r)) continue;

      const auto occ_col = [&](int cc) { return ri.occupied(cc, r); };
      const auto occ_row = [&](int rr) { return ri.occupied(c, rr); };
      const int dl = detail::find_neighbor(occ_col, c, cols, -1, cfg.max_gap);
      const int dr_ = detail::find_neighbor(occ_col, c, cols, +1, cfg.max_gap);
      const int du = detail::find_neighbor(occ_row, r, rows, -1, cfg.max_gap);
      const int dd = detail::find_neighbor(occ_row, r, rows, +1, cfg.max_gap);

      double da = 0.0, de = 0.0;
      const bool has_da = detail::difference_quotient(
          dl ? -ri.azimuth(c + dl, r) : 0.0, dl ? ri.range(c + dl, r) : 0.0,
          dl != 0,
          dr_ ? -ri.azimuth(c + dr_, r) : 0.0, dr_ ? ri.range(c + dr_, r) : 0.0,
          dr_ != 0, -ri.azimuth(c, r), ri.range(c, r), &da);
      const bool has_de = detail::difference_quotient(
          du ? ri.elevation(c, r + du) : 0.0, du ? ri.range(c, r + du) : 0.0,
          du != 0,
          dd ? ri.elevation(c, r + dd) : 0.0, dd ? ri.range(c, r + dd) : 0.0,
          dd != 0, ri.elevation(c, r), ri.range(c, r), &de);
      if (!has_da || !has_de) continue;

      dr_da.at(c, r) = da;
      dr_de.at(c, r) = de;
      has_partials.at(c, r) = 1;
    }
  }

  // Optional pass 2: box-smooth the partials over cells that have them.
  const Image<double>* da_src = &dr_da;
  const Image<double>* de_src = &dr_de;
  Image<double> da_smooth, de_smooth;
  if (cfg.smooth_partials) {
    da_smooth = Image<double>(cols, rows, 0.0);
    de_smooth = Image<double>(cols, rows, 0.0);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        if (!has_partials.at(c, r)) continue;
        double sa = 0.0, se = 0.0;
        int k = 0;
        for (int rr = std::max(0, r - 1); rr <= std::min(rows - 1, r + 1); ++rr) {
          for (int cc = std::max(0, c - 1); cc <= std::min(cols - 1, c + 1); ++cc) {
            if (!has_partials.at(cc, rr)) continue;
            sa += dr_da.at(cc, rr);
            se += dr_de.at(cc, rr);
            ++k;
          }
        }
        da_smooth.at(c, r) = sa / k;
        de_smooth.at(c, r) = se / k;
      }
    }
    da_src = &da_smooth;
    de_src = &de_smooth;
  }

  // Pass 3: assemble and orient.
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (!has_partials.at(c, r)) continue;
      const double range = ri.range(c, r);
      const double a = -ri.azimuth(c, r);  // standard math azimuth
      const double e = ri.elevation(c, r);
      const double ca = std::cos(a), sa = std::sin(a);
      const double ce = std::cos(e), se = std::sin(e);
      if (std::abs(ce) < 1e-9) continue;  // pole: azimuth direction undefined

      const Eigen::Vector3d r_hat(ce * ca, ce * sa, se);
      const Eigen::Vector3d a_hat(-sa, ca, 0.0);
      const Eigen::Vector3d e_hat(-se * ca, -se * sa, ce);
      Eigen::Vector3d n = r_hat - da_src->at(c, r) / (range * ce) * a_hat -
                          de_src->at(c, r) / range * e_hat;
      const double norm = n.norm();
      if (!(norm > 1e-12) || !std::isfinite(norm)) continue;
      n /= norm;
      if (n.dot(r_hat) > 0.0) n = -n;  // orient toward the sensor

      const auto id = ri.source_id(c, r);
      out.normal[id] = n;
      out.valid[id] = 1;
    }
  }
  return out;
}

/// Per-pixel unit normals aligned with a sparse depth map.
struct NormalMap {
  Image<Eigen::Vector3d> normal;
  Image<std::uint8_t> valid;

  NormalMap() = default;
  NormalMap(int width, int height)
      : normal(width, height, Eigen::Vector3d::Zero()), valid(width, height, 0) {}

  int width() const { return normal.width(); }
  int height() const { return normal.height(); }
  bool has(int u, int v) const { return valid.at(u, v) != 0; }
  const Eigen::Vector3d& at(int u, int v) const { return normal.at(u, v); }

  int count_valid() const {
    int k = 0;
    for (auto f : valid.data()) k += f != 0;
    return k;
  }
};

/// Rotates per-point normals into the camera frame and lays them out on the
/// pixel grid of `sparse`. Cells whose source point has no normal (or no
/// recorded source) stay empty. Orientation carries over from the LiDAR
/// frame: rotation preserves the sensor-facing flip, and the LiDAR-camera
/// baseline is far too short to reverse it for any surface that is not seen
/// edge-on.
inline NormalMap normals_to_camera(const PointNormals& normals,
                                   const RigidTransform& extrinsics,
                                   const SparseDepthMap& sparse) {
  NormalMap out(sparse.width(), sparse.height());
  const int n = static_cast<int>(normals.normal.size());
  sparse.for_each([&](int u, int v, double /*depth*/, std::int32_t id) {
    if (id < 0 || id >= n || !normals.valid[id]) return;
    out.normal.at(u, v) = extrinsics.rotation * normals.normal[id];
    out.valid.at(u, v) = 1;
  });
  return out;
}

}  // namespace geodepth

#endif  // GEODEPTH_NORMALS_HPP
