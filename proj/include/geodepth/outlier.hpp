// SPDX-License-Identifier: Apache-2.0

#ifndef GEODEPTH_OUTLIER_HPP
#define GEODEPTH_OUTLIER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "geodepth/error.hpp"
#include "geodepth/geometry.hpp"
#include "geodepth/image.hpp"

namespace geodepth {

// Occlusion outliers: scan points that are visible from the LiDAR but hidden
// from the camera. Because the two sensors sit apart, such a point and the
// foreground points it lands between appear in opposite left/right (or
// up/down) order in the image versus in the scan angles, and it is distinctly
// farther away. Both cues together identify it; neither alone does (ordering
// flips also happen on smooth surfaces seen at grazing angles, depth gaps
// alone also occur at object borders).

/// Geometry of one projected sweep, fixing the neighborhood size of the
/// removal rule: a point's neighbors are those within W*L/N columns and
/// H/L rows, the expected pixel footprint of one scan step.
struct SensorSpec {
  int image_width = 0;   ///< W, pixels
  int image_height = 0;  ///< H, pixels
  int lidar_lines = 0;   ///< L
  int point_count = 0;   ///< N, in-frame points under consideration

  double neighborhood_width() const {
    return static_cast<double>(image_width) * lidar_lines / point_count;
  }
  double neighborhood_height() const {
    return static_cast<double>(image_height) / lidar_lines;
  }

  void validate() const {
    if (image_width <= 0 || image_height <= 0 || lidar_lines <= 0 ||
        point_count <= 0) {
      throw ConfigError("SensorSpec fields must all be positive, got W=" +
                        std::to_string(image_width) + " H=" +
                        std::to_string(image_height) + " L=" +
                        std::to_string(lidar_lines) + " N=" +
                        std::to_string(point_count));
    }
  }
};

/// One in-frame scan point as seen by the removal rule. Both angles must be
/// image-aligned: azimuth grows with the column and elevation grows with the
/// row for points seen in the same order by both sensors. For a z-up LiDAR
/// feeding a y-down image this means negating the spherical elevation.
struct OutlierPoint {
  double u = 0.0;
  double v = 0.0;
  double azimuth = 0.0;
  double elevation = 0.0;
  double depth = 0.0;    ///< camera-frame z, meters
  std::int32_t id = -1;  ///< scan index
};

/// Removal outcome. `removed` holds scan ids in ascending order; `pixels`
/// marks the cells that were cleared from the sparse map (a removed point
/// that had already lost its pixel's depth race clears nothing).
struct OutlierMask {
  std::vector<std::int32_t> removed;
  Image<std::uint8_t> pixels;
  int point_count = 0;

  double keep_ratio() const {
    if (point_count <= 0) return 1.0;
    return 1.0 - static_cast<double>(removed.size()) / point_count;
  }
};

struct RemovalResult {
  SparseDepthMap cleaned;
  OutlierMask mask;
};

/// Indices of the points inside point i's neighborhood box (excluding i).
/// Brute force; the counterpart used by remove_outliers scans a bucket grid
/// but applies the same predicate.
inline std::vector<int> neighborhood(const std::vector<OutlierPoint>& points,
                                     int i, const SensorSpec& spec) {
  spec.validate();
  const double bw = spec.neighborhood_width();
  const double bh = spec.neighborhood_height();
  std::vector<int> out;
  for (int j = 0; j < static_cast<int>(points.size()); ++j) {
    if (j == i) continue;
    if (std::abs(points[j].u - points[i].u) < bw &&
        std::abs(points[j].v - points[i].v) < bh) {
      out.push_back(j);
    }
  }
  return out;
}

namespace detail {

// Differences at roundoff scale are ties, not orderings: grid-regular
// sweeps place points at bitwise-near-identical angles, and the sign of a
// 1e-16 residue must not decide a removal. Real inversions sit many orders
// above both bounds.
constexpr double kOrderTiePixel = 1e-9;
constexpr double kOrderTieAngle = 1e-12;

inline bool order_inverted(double d_pixel, double d_angle) {
  return d_pixel * d_angle < 0.0 && std::abs(d_pixel) > kOrderTiePixel &&
         std::abs(d_angle) > kOrderTieAngle;
}

// i is an outlier given neighbor j when their image order contradicts their
// scan-angle order along either axis and i sits clearly behind j.
inline bool outlier_witness(const OutlierPoint& i, const OutlierPoint& j,
                            double epsilon) {
  const bool order_flip = order_inverted(i.u - j.u, i.azimuth - j.azimuth) ||
                          order_inverted(i.v - j.v, i.elevation - j.elevation);
  return order_flip && i.depth > j.depth + epsilon;
}

}  // namespace detail

/// Removes occlusion outliers from a projected sweep. All decisions are made
/// against the original point set, so the outcome does not depend on point
/// order. Returns the cleaned map (removed owners drop their cell; nothing
/// is resurrected) and the mask.
///
/// `points` must contain every in-frame point of the sweep, including those
/// that lost a z-buffer race; `spec.point_count` must equal its size.
inline RemovalResult remove_outliers(const SparseDepthMap& sparse,
                                     const std::vector<OutlierPoint>& points,
                                     const SensorSpec& spec,
                                     double epsilon = 1.0) {
  spec.validate();
  if (epsilon < 0.0) {
    throw ConfigError("epsilon must be non-negative, got " +
                      std::to_string(epsilon));
  }
  if (spec.point_count != static_cast<int>(points.size())) {
    throw InputError("SensorSpec.point_count " +
                     std::to_string(spec.point_count) +
                     " does not match the provided " +
                     std::to_string(points.size()) + " points");
  }
  if (spec.image_width != sparse.width() ||
      spec.image_height != sparse.height()) {
    throw InputError("SensorSpec image size does not match the sparse map");
  }

  const int n = static_cast<int>(points.size());
  const double bw = spec.neighborhood_width();
  const double bh = spec.neighborhood_height();

  // Bucket grid with the neighborhood box as cell size: all neighbors of a
  // point lie in its bucket or the eight surrounding ones.
  const int bx = std::max(1, static_cast<int>(std::ceil(spec.image_width / bw)));
  const int by = std::max(1, static_cast<int>(std::ceil(spec.image_height / bh)));
  std::vector<std::vector<int>> buckets(static_cast<std::size_t>(bx) * by);
  const auto bucket_of = [&](const OutlierPoint& p) {
    const int cx = std::clamp(static_cast<int>(p.u / bw), 0, bx - 1);
    const int cy = std::clamp(static_cast<int>(p.v / bh), 0, by - 1);
    return cy * bx + cx;
  };
  for (int i = 0; i < n; ++i) buckets[bucket_of(points[i])].push_back(i);

  std::int32_t max_id = -1;
  for (const auto& p : points) max_id = std::max(max_id, p.id);
  std::vector<std::uint8_t> removed_by_id(max_id + 1, 0);

  std::vector<std::int32_t> removed;
  for (int i = 0; i < n; ++i) {
    const OutlierPoint& pi = points[i];
    if (pi.id < 0) {
      throw InputError("point " + std::to_string(i) + " has no scan id");
    }
    const int cx = std::clamp(static_cast<int>(pi.u / bw), 0, bx - 1);
    const int cy = std::clamp(static_cast<int>(pi.v / bh), 0, by - 1);
    bool is_outlier = false;
    for (int yy = std::max(0, cy - 1); yy <= std::min(by - 1, cy + 1) && !is_outlier; ++yy) {
      for (int xx = std::max(0, cx - 1); xx <= std::min(bx - 1, cx + 1) && !is_outlier; ++xx) {
        for (const int j : buckets[static_cast<std::size_t>(yy) * bx + xx]) {
          if (j == i) continue;
          const OutlierPoint& pj = points[j];
          if (std::abs(pj.u - pi.u) >= bw || std::abs(pj.v - pi.v) >= bh) {
            continue;
          }
          if (detail::outlier_witness(pi, pj, epsilon)) {
            is_outlier = true;
            break;
          }
        }
      }
    }
    if (is_outlier) {
      removed.push_back(pi.id);
      removed_by_id[pi.id] = 1;
    }
  }
  std::sort(removed.begin(), removed.end());

  RemovalResult out;
  out.cleaned = sparse;
  out.mask.pixels = Image<std::uint8_t>(sparse.width(), sparse.height(), 0);
  out.mask.removed = std::move(removed);
  out.mask.point_count = n;
  sparse.for_each([&](int u, int v, double, std::int32_t id) {
    if (id >= 0 && id <= max_id && removed_by_id[id]) {
      out.mask.pixels.at(u, v) = 1;
    }
  });
  for (int v = 0; v < sparse.height(); ++v) {
    for (int u = 0; u < sparse.width(); ++u) {
      if (out.mask.pixels.at(u, v)) out.cleaned.clear(u, v);
    }
  }
  return out;
}

}  // namespace geodepth

#endif  // GEODEPTH_OUTLIER_HPP
