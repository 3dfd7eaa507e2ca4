// SPDX-License-Identifier: Apache-2.0

#ifndef GEODEPTH_COMPLETION_HPP
#define GEODEPTH_COMPLETION_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "geodepth/distance_transform.hpp"
#include "geodepth/error.hpp"
#include "geodepth/evaluation.hpp"
#include "geodepth/geometry.hpp"
#include "geodepth/image.hpp"
#include "geodepth/normals.hpp"
#include "geodepth/outlier.hpp"

namespace geodepth {

/// Densified depths never drop below this (meters); keeps every output
/// representable in 16-bit 1/256 m grayscale.
constexpr double kMinDepth = 0.01;

struct PipelineConfig {
  bool outlier_removal = true;
  double epsilon = 1.0;  ///< occlusion depth gap, meters

  int range_image_cols = 512;
  int range_image_lines = 64;  ///< used only when the scan lacks ring indices
  int normal_max_gap = 3;
  bool smooth_normal_partials = true;

  DistanceMetric dt_metric = DistanceMetric::kEuclidean;
  double denom_guard = 1e-6;  ///< grazing-ray cutoff for the plane residual
  double max_range = 120.0;   ///< meters, output clamp ceiling

  int smooth_kernel = 5;  ///< odd width; 1 disables smoothing exactly
  double smooth_sigma = 1.0;
  bool preserve_seeds = false;  ///< keep measured pixels unsmoothed

  /// Scan points outside the camera frustum widened by this angle are
  /// dropped before any processing, so panoramic sweeps do not dilute the
  /// range-image resolution. The margin keeps neighbors of edge pixels.
  double fov_margin_deg = 10.0;

  /// Image rows excluded from evaluation (benchmark-devkit style sky crop).
  /// 0 scores every ground-truth pixel. Affects scoring only, never output.
  int eval_crop_top = 0;

  void validate() const {
    if (epsilon < 0.0) throw ConfigError("epsilon must be non-negative");
    if (range_image_cols < 1 || range_image_lines < 1) {
      throw ConfigError("range image bin counts must be positive");
    }
    if (normal_max_gap < 1) throw ConfigError("normal_max_gap must be at least 1");
    if (!(denom_guard > 0.0)) throw ConfigError("denom_guard must be positive");
    if (!(max_range > kMinDepth)) {
      throw ConfigError("max_range must exceed " + std::to_string(kMinDepth));
    }
    if (smooth_kernel < 1 || smooth_kernel % 2 == 0) {
      throw ConfigError("smooth_kernel must be a positive odd width, got " +
                        std::to_string(smooth_kernel));
    }
    if (smooth_kernel > 1 && !(smooth_sigma > 0.0)) {
      throw ConfigError("smooth_sigma must be positive");
    }
    if (fov_margin_deg < 0.0) {
      throw ConfigError("fov_margin_deg must be non-negative");
    }
    if (eval_crop_top < 0) {
      throw ConfigError("eval_crop_top must be non-negative");
    }
  }
};

/// Depth correction that moves the borrowed seed depth onto the seed's
/// tangent plane along the target pixel's viewing ray.
///
/// With unit ray d = ((u-pu)/fu, (v-pv)/fv, 1) through target pixel (u, v),
/// seed pixel offset (seed_du, seed_dv) = seed - target, seed depth z' and
/// seed unit normal n, the in-plane solution of n . p = n . p' gives
///
///   dz = z' * (n.x * seed_du / fu + n.y * seed_dv / fv) / (d . n).
///
/// Rays nearly parallel to the plane (|d . n| < denom_guard, n unit) get no
/// correction: the intersection recedes without bound and the seed depth is
/// the safer estimate.
inline double plane_residual(int u, int v, int seed_du, int seed_dv,
                             double seed_depth, const Eigen::Vector3d& normal,
                             const CameraIntrinsics& intr,
                             double denom_guard = 1e-6) {
  const double dx = (u - intr.pu) / intr.fu;
  const double dy = (v - intr.pv) / intr.fv;
  const double denom = normal.x() * dx + normal.y() * dy + normal.z();
  if (std::abs(denom) < denom_guard) return 0.0;
  const double numer = seed_depth * (normal.x() * seed_du / intr.fu +
                                     normal.y() * seed_dv / intr.fv);
  return numer / denom;
}

/// Normalized symmetric Gaussian taps; size must be odd.
inline std::vector<double> gaussian_kernel(int size, double sigma) {
  if (size < 1 || size % 2 == 0) {
    throw ConfigError("Gaussian kernel width must be positive and odd, got " +
                      std::to_string(size));
  }
  if (!(sigma > 0.0)) throw ConfigError("Gaussian sigma must be positive");
  std::vector<double> w(size);
  const int half = size / 2;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    const double x = i - half;
    w[i] = std::exp(-x * x / (2.0 * sigma * sigma));
    sum += w[i];
  }
  for (double& x : w) x /= sum;
  return w;
}

/// Separable Gaussian blur with replicated borders. kernel == 1 returns the
/// input bit for bit. Pixels flagged in `keep` retain their input value but
/// still spread into their neighbors.
inline DenseDepthMap gaussian_smooth(const DenseDepthMap& in, int kernel,
                                     double sigma,
                                     const Image<std::uint8_t>* keep = nullptr) {
  if (keep != nullptr &&
      (keep->width() != in.width() || keep->height() != in.height())) {
    throw InputError("keep mask size does not match the depth map");
  }
  if (kernel == 1) return in;
  const std::vector<double> w = gaussian_kernel(kernel, sigma);
  const int half = kernel / 2;
  const int width = in.width(), height = in.height();

  Image<double> tmp(width, height, 0.0);
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      double acc = 0.0;
      for (int k = -half; k <= half; ++k) {
        const int uu = std::clamp(u + k, 0, width - 1);
        acc += w[k + half] * in.at(uu, v);
      }
      tmp.at(u, v) = acc;
    }
  }
  DenseDepthMap out(width, height);
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      double acc = 0.0;
      for (int k = -half; k <= half; ++k) {
        const int vv = std::clamp(v + k, 0, height - 1);
        acc += w[k + half] * tmp.at(u, vv);
      }
      out.at(u, v) = acc;
    }
  }
  if (keep != nullptr) {
    for (int v = 0; v < height; ++v) {
      for (int u = 0; u < width; ++u) {
        if (keep->at(u, v) != 0) out.at(u, v) = in.at(u, v);
      }
    }
  }
  return out;
}

/// Every intermediate product of one densification run. `point_normals` is
/// indexed by the position of each point in the input scan.
struct CompletionStages {
  ProjectedScan projected;
  PointNormals point_normals;
  RemovalResult removal;
  NormalMap normals;  ///< camera frame, on the cleaned map
  NearestField field;
  DenseDepthMap nearest;   ///< each pixel borrows its seed depth as-is
  DenseDepthMap planar;    ///< nearest + plane residual, clamped
  DenseDepthMap smoothed;  ///< final output
};

namespace detail {

inline int line_count(const LidarScan& scan, int fallback) {
  if (!scan.has_lines()) return fallback;
  if (scan.num_lines > 0) return scan.num_lines;
  int max_line = 0;
  for (const int l : scan.line_index) max_line = std::max(max_line, l);
  return max_line + 1;
}

}  // namespace detail

inline CompletionStages complete_stages(const LidarScan& scan,
                                        const RigidTransform& extrinsics,
                                        const CameraIntrinsics& intr,
                                        const PipelineConfig& cfg = {}) {
  cfg.validate();
  intr.validate();
  extrinsics.validate();
  scan.validate();
  if (scan.points.empty()) throw InputError("cannot complete an empty scan");

  // Frustum crop. Viewing angles are measured per image edge so an offset
  // principal point widens the correct side.
  const double margin = cfg.fov_margin_deg * M_PI / 180.0;
  const double left = std::atan(intr.pu / intr.fu) + margin;
  const double right = std::atan((intr.width - intr.pu) / intr.fu) + margin;
  const double up = std::atan(intr.pv / intr.fv) + margin;
  const double down = std::atan((intr.height - intr.pv) / intr.fv) + margin;
  LidarScan front;
  front.num_lines = scan.has_lines() ? scan.num_lines : 0;
  std::vector<std::int32_t> orig;  // front index -> scan index
  for (std::size_t i = 0; i < scan.points.size(); ++i) {
    if (!(scan.points[i].norm() > 0.0)) continue;  // no viewing direction
    const Eigen::Vector3d p = extrinsics.apply(scan.points[i]);
    const double ax = std::atan2(p.x(), p.z());
    const double ay = std::atan2(p.y(), p.z());
    if (ax < -left || ax > right || ay < -up || ay > down) continue;
    front.points.push_back(scan.points[i]);
    if (scan.has_lines()) front.line_index.push_back(scan.line_index[i]);
    orig.push_back(static_cast<std::int32_t>(i));
  }
  if (front.points.empty()) {
    throw InputError("no scan point lies inside the widened camera frustum");
  }

  CompletionStages st;

  // Surface normals come from the scan's own range-image topology, before
  // any removal, so they describe the measured surfaces.
  const RangeImage ri =
      build_range_image(front, cfg.range_image_cols, cfg.range_image_lines);
  const PointNormals front_normals = estimate_normals(
      ri, NormalEstimationConfig{cfg.normal_max_gap, cfg.smooth_normal_partials});
  st.point_normals = PointNormals(static_cast<int>(scan.points.size()));
  for (std::size_t k = 0; k < orig.size(); ++k) {
    st.point_normals.normal[orig[k]] = front_normals.normal[k];
    st.point_normals.valid[orig[k]] = front_normals.valid[k];
  }

  st.projected = project_scan(front, extrinsics, intr);
  if (st.projected.points.empty()) {
    throw InputError("scan projects to no image pixel");
  }
  // Rewrite ids so everything downstream indexes the caller's scan.
  for (InFramePoint& p : st.projected.points) p.id = orig[p.id];
  for (int v = 0; v < intr.height; ++v) {
    for (int u = 0; u < intr.width; ++u) {
      if (st.projected.map.has(u, v)) {
        st.projected.map.set(u, v, st.projected.map.depth(u, v),
                             orig[st.projected.map.source_id(u, v)]);
      }
    }
  }

  if (cfg.outlier_removal) {
    std::vector<OutlierPoint> opoints;
    opoints.reserve(st.projected.points.size());
    for (const InFramePoint& p : st.projected.points) {
      const SphericalPoint s = to_spherical(scan.points[p.id]);
      // Image rows grow downward while spherical elevation grows upward;
      // the removal rule compares orderings, so elevation enters negated.
      opoints.push_back(
          OutlierPoint{p.u, p.v, s.azimuth, -s.elevation, p.depth, p.id});
    }
    SensorSpec spec;
    spec.image_width = intr.width;
    spec.image_height = intr.height;
    spec.lidar_lines = detail::line_count(scan, cfg.range_image_lines);
    spec.point_count = static_cast<int>(opoints.size());
    st.removal = remove_outliers(st.projected.map, opoints, spec, cfg.epsilon);
  } else {
    st.removal.cleaned = st.projected.map;
    st.removal.mask.pixels = Image<std::uint8_t>(intr.width, intr.height, 0);
    st.removal.mask.point_count = static_cast<int>(st.projected.points.size());
  }
  if (st.removal.cleaned.occupied_count() == 0) {
    throw InputError("outlier removal left no seed pixels");
  }

  st.normals = normals_to_camera(st.point_normals, extrinsics, st.removal.cleaned);
  st.field = nearest_field(st.removal.cleaned, &st.normals, cfg.dt_metric);

  st.nearest = DenseDepthMap(intr.width, intr.height);
  st.planar = DenseDepthMap(intr.width, intr.height);
  for (int v = 0; v < intr.height; ++v) {
    for (int u = 0; u < intr.width; ++u) {
      const double z0 = st.field.seed_depth.at(u, v);
      st.nearest.at(u, v) = z0;
      double z = z0;
      if (st.field.seed_has_normal.at(u, v) != 0) {
        z += plane_residual(u, v, st.field.offset_u(u, v),
                            st.field.offset_v(u, v), z0,
                            st.field.seed_normal.at(u, v), intr,
                            cfg.denom_guard);
      }
      st.planar.at(u, v) = std::clamp(z, kMinDepth, cfg.max_range);
    }
  }

  if (cfg.preserve_seeds && cfg.smooth_kernel > 1) {
    Image<std::uint8_t> seeds(intr.width, intr.height, 0);
    st.removal.cleaned.for_each(
        [&](int u, int v, double, std::int32_t) { seeds.at(u, v) = 1; });
    st.smoothed =
        gaussian_smooth(st.planar, cfg.smooth_kernel, cfg.smooth_sigma, &seeds);
  } else {
    st.smoothed = gaussian_smooth(st.planar, cfg.smooth_kernel, cfg.smooth_sigma);
  }
  return st;
}

struct CompletionResult {
  DenseDepthMap dense;
  OutlierMask mask;
};

inline CompletionResult complete(const LidarScan& scan,
                                 const RigidTransform& extrinsics,
                                 const CameraIntrinsics& intr,
                                 const PipelineConfig& cfg = {}) {
  CompletionStages st = complete_stages(scan, extrinsics, intr, cfg);
  return CompletionResult{std::move(st.smoothed), std::move(st.removal.mask)};
}

/// Error of each pipeline stage against the same ground truth. Rows appear
/// in pipeline order; rows after the removal stage carry its keep ratio.
struct AblationRow {
  std::string stage;
  EvalReport report;
};

inline std::vector<AblationRow> ablation_trace(const CompletionStages& st,
                                               const SparseDepthMap& gt,
                                               const EvalOptions& opt = {}) {
  std::vector<AblationRow> rows;
  rows.push_back({"sparse-input", metrics(st.projected.map, gt, opt)});
  const double keep = st.removal.mask.keep_ratio();
  rows.push_back({"outlier-removed", metrics(st.removal.cleaned, gt, opt)});
  rows.back().report.keep_ratio = keep;
  rows.push_back({"nearest-seed", metrics(st.nearest, gt, opt)});
  rows.back().report.keep_ratio = keep;
  rows.push_back({"planar-residual", metrics(st.planar, gt, opt)});
  rows.back().report.keep_ratio = keep;
  rows.push_back({"smoothed", metrics(st.smoothed, gt, opt)});
  rows.back().report.keep_ratio = keep;
  return rows;
}

}  // namespace geodepth

#endif  // GEODEPTH_COMPLETION_HPP
