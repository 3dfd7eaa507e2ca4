// SPDX-License-Identifier: Apache-2.0

#ifndef GEODEPTH_EVALUATION_HPP
#define GEODEPTH_EVALUATION_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "geodepth/distance_transform.hpp"
#include "geodepth/error.hpp"
#include "geodepth/geometry.hpp"
#include "geodepth/normals.hpp"

namespace geodepth {

/// Depth errors in the units used by the KITTI depth completion benchmark:
/// RMSE/MAE over depth in millimeters, iRMSE/iMAE over inverse depth in
/// 1/km. `density` is the fraction of evaluable image pixels that carried a
/// prediction; `keep_ratio` is filled in by pipelines that ran outlier
/// removal (1 otherwise).
struct EvalReport {
  double rmse_mm = 0.0;
  double mae_mm = 0.0;
  double irmse_1pkm = 0.0;
  double imae_1pkm = 0.0;
  double density = 0.0;
  double keep_ratio = 1.0;
  std::int64_t evaluated_pixels = 0;
};

struct EvalOptions {
  /// Rows above this line are excluded entirely (evaluation and density),
  /// mirroring benchmark crops that ignore the sky region.
  int crop_top = 0;
};

/// Streaming accumulator for depth errors. Frame accumulators merge by
/// plain summation, so a dataset aggregate equals the single-pass result
/// over all pixels regardless of how frames were distributed.
class MetricAccumulator {
 public:
  void add(double pred_m, double gt_m) {
    if (!(pred_m > 0.0) || !(gt_m > 0.0)) {
      throw InputError("metrics need positive depths, got pred=" +
                       std::to_string(pred_m) + " gt=" + std::to_string(gt_m));
    }
    const double e_mm = (pred_m - gt_m) * 1000.0;
    const double e_ikm = 1000.0 / pred_m - 1000.0 / gt_m;
    sum_sq_mm_ += e_mm * e_mm;
    sum_abs_mm_ += std::abs(e_mm);
    sum_sq_ikm_ += e_ikm * e_ikm;
    sum_abs_ikm_ += std::abs(e_ikm);
    ++evaluated_;
  }

  void count_pixels(std::int64_t predicted, std::int64_t total) {
    predicted_ += predicted;
    total_ += total;
  }

  void merge(const MetricAccumulator& other) {
    sum_sq_mm_ += other.sum_sq_mm_;
    sum_abs_mm_ += other.sum_abs_mm_;
    sum_sq_ikm_ += other.sum_sq_ikm_;
    sum_abs_ikm_ += other.sum_abs_ikm_;
    evaluated_ += other.evaluated_;
    predicted_ += other.predicted_;
    total_ += other.total_;
  }

  std::int64_t evaluated() const { return evaluated_; }

  EvalReport report() const {
    if (evaluated_ == 0) {
      throw InputError("no pixels were evaluated (empty prediction/truth overlap)");
    }
    EvalReport r;
    r.rmse_mm = std::sqrt(sum_sq_mm_ / evaluated_);
    r.mae_mm = sum_abs_mm_ / evaluated_;
    r.irmse_1pkm = std::sqrt(sum_sq_ikm_ / evaluated_);
    r.imae_1pkm = sum_abs_ikm_ / evaluated_;
    r.evaluated_pixels = evaluated_;
    r.density = total_ > 0 ? static_cast<double>(predicted_) / total_ : 0.0;
    return r;
  }

 private:
  double sum_sq_mm_ = 0.0;
  double sum_abs_mm_ = 0.0;
  double sum_sq_ikm_ = 0.0;
  double sum_abs_ikm_ = 0.0;
  std::int64_t evaluated_ = 0;
  std::int64_t predicted_ = 0;
  std::int64_t total_ = 0;
};

namespace detail {

inline void check_same_size(int pw, int ph, int gw, int gh) {
  if (pw != gw || ph != gh) {
    throw InputError("prediction " + std::to_string(pw) + "x" +
                     std::to_string(ph) + " and ground truth " +
                     std::to_string(gw) + "x" + std::to_string(gh) +
                     " differ in size");
  }
}

}  // namespace detail

/// Accumulates one sparse prediction against sparse ground truth: evaluated
/// over the intersection of valid pixels.
inline void accumulate_metrics(const SparseDepthMap& pred,
                               const SparseDepthMap& gt,
                               MetricAccumulator* acc,
                               const EvalOptions& opt = {}) {
  detail::check_same_size(pred.width(), pred.height(), gt.width(), gt.height());
  std::int64_t predicted = 0;
  for (int v = opt.crop_top; v < pred.height(); ++v) {
    for (int u = 0; u < pred.width(); ++u) {
      if (pred.has(u, v)) ++predicted;
      if (pred.has(u, v) && gt.has(u, v)) acc->add(pred.depth(u, v), gt.depth(u, v));
    }
  }
  acc->count_pixels(predicted, static_cast<std::int64_t>(pred.width()) *
                                   std::max(0, pred.height() - opt.crop_top));
}

/// Accumulates a dense prediction: evaluated over all truth-valid pixels.
inline void accumulate_metrics(const DenseDepthMap& pred,
                               const SparseDepthMap& gt,
                               MetricAccumulator* acc,
                               const EvalOptions& opt = {}) {
  detail::check_same_size(pred.width(), pred.height(), gt.width(), gt.height());
  for (int v = opt.crop_top; v < pred.height(); ++v) {
    for (int u = 0; u < pred.width(); ++u) {
      if (gt.has(u, v)) acc->add(pred.at(u, v), gt.depth(u, v));
    }
  }
  const std::int64_t total = static_cast<std::int64_t>(pred.width()) *
                             std::max(0, pred.height() - opt.crop_top);
  acc->count_pixels(total, total);
}

inline EvalReport metrics(const SparseDepthMap& pred, const SparseDepthMap& gt,
                          const EvalOptions& opt = {}) {
  MetricAccumulator acc;
  accumulate_metrics(pred, gt, &acc, opt);
  return acc.report();
}

inline EvalReport metrics(const DenseDepthMap& pred, const SparseDepthMap& gt,
                          const EvalOptions& opt = {}) {
  MetricAccumulator acc;
  accumulate_metrics(pred, gt, &acc, opt);
  return acc.report();
}

/// Copies a scan, assigning elevation-binned pseudo line indices: `lines`
/// uniform bins over the observed elevation span. Substitutes for ring
/// numbers when the source format lacks them.
inline LidarScan assign_pseudo_lines(const LidarScan& scan, int lines) {
  scan.validate();
  if (lines < 1) throw ConfigError("pseudo line count must be positive");
  if (scan.points.empty()) {
    throw InputError("cannot assign lines to an empty scan");
  }
  double el_min = 0.0, el_max = 0.0;
  bool first = true;
  std::vector<double> el(scan.points.size(), 0.0);
  for (std::size_t i = 0; i < scan.points.size(); ++i) {
    if (scan.points[i].norm() < 1e-9) continue;
    el[i] = to_spherical(scan.points[i]).elevation;
    if (first) {
      el_min = el_max = el[i];
      first = false;
    } else {
      el_min = std::min(el_min, el[i]);
      el_max = std::max(el_max, el[i]);
    }
  }
  LidarScan out;
  out.points = scan.points;
  out.num_lines = lines;
  out.line_index.resize(scan.points.size(), 0);
  const double span = el_max - el_min;
  for (std::size_t i = 0; i < scan.points.size(); ++i) {
    out.line_index[i] =
        span > 0.0 ? std::min(lines - 1, static_cast<int>((el[i] - el_min) /
                                                          span * lines))
                   : 0;
  }
  return out;
}

/// Line-decimated copy of a scan: keeps lines congruent to `phase` modulo
/// (L / target_lines) and renumbers them densely, so decimating to 32 and
/// then to 16 lines equals decimating straight to 16. Scans without ring
/// indices get pseudo lines first (`fallback_lines` bins).
inline LidarScan sparsify(const LidarScan& scan, int target_lines,
                          int fallback_lines = 64, int phase = 0) {
  scan.validate();
  if (target_lines < 1) {
    throw ConfigError("target line count must be positive");
  }
  LidarScan src = scan.has_lines() ? scan : assign_pseudo_lines(scan, fallback_lines);
  if (src.num_lines <= 0) {
    int max_line = 0;
    for (const int l : src.line_index) max_line = std::max(max_line, l);
    src.num_lines = max_line + 1;
  }
  if (src.num_lines % target_lines != 0) {
    throw ConfigError("cannot keep " + std::to_string(target_lines) +
                      " of " + std::to_string(src.num_lines) +
                      " lines evenly");
  }
  const int stride = src.num_lines / target_lines;
  if (phase < 0 || phase >= stride) {
    throw ConfigError("line phase must lie in [0, " + std::to_string(stride) +
                      "), got " + std::to_string(phase));
  }
  LidarScan out;
  out.num_lines = target_lines;
  for (std::size_t i = 0; i < src.points.size(); ++i) {
    const int line = src.line_index[i];
    if (line % stride != phase) continue;
    out.points.push_back(src.points[i]);
    out.line_index.push_back(line / stride);
  }
  return out;
}

/// How far pixels sit from their nearest seed, and how wrong the seed's
/// depth is as a prediction at that distance. One row per whole-pixel L1
/// distance up to `bins`, plus an overflow row. `fraction` is over all
/// image pixels and sums to 1; `mae_mm` averages |seed depth - truth| over
/// the truth-valid pixels of the row.
struct NearestStatsRow {
  double fraction = 0.0;
  std::int64_t gt_pixels = 0;
  double mae_mm = 0.0;
};

struct NearestStats {
  /// Seeds and depths as provided.
  std::vector<NearestStatsRow> raw;
  /// Seeds restricted to truth-valid cells, depths replaced by the truth:
  /// isolates the cost of borrowing a distant value from the cost of the
  /// value itself being wrong.
  std::vector<NearestStatsRow> gt_seeded;
};

namespace detail {

inline std::vector<NearestStatsRow> nearest_rows(const SparseDepthMap& seeds,
                                                 const SparseDepthMap& gt,
                                                 int bins) {
  const auto field = nearest_field(seeds, DistanceMetric::kL1);
  std::vector<NearestStatsRow> rows(bins + 1);
  std::vector<double> abs_sum(bins + 1, 0.0);
  const std::int64_t total =
      static_cast<std::int64_t>(seeds.width()) * seeds.height();
  for (int v = 0; v < seeds.height(); ++v) {
    for (int u = 0; u < seeds.width(); ++u) {
      const int d = static_cast<int>(field.distance.at(u, v));
      const int bin = d < bins ? d : bins;
      rows[bin].fraction += 1.0;
      if (gt.has(u, v)) {
        ++rows[bin].gt_pixels;
        abs_sum[bin] +=
            std::abs(field.seed_depth.at(u, v) - gt.depth(u, v)) * 1000.0;
      }
    }
  }
  for (int b = 0; b <= bins; ++b) {
    rows[b].fraction /= total;
    if (rows[b].gt_pixels > 0) rows[b].mae_mm = abs_sum[b] / rows[b].gt_pixels;
  }
  return rows;
}

}  // namespace detail

inline NearestStats nearest_stats(const SparseDepthMap& sparse,
                                  const SparseDepthMap& gt, int bins = 30) {
  detail::check_same_size(sparse.width(), sparse.height(), gt.width(),
                          gt.height());
  if (bins < 1) throw ConfigError("nearest_stats needs at least one bin");
  if (sparse.occupied_count() == 0) {
    throw InputError("nearest_stats needs a non-empty sparse map");
  }

  NearestStats out;
  out.raw = detail::nearest_rows(sparse, gt, bins);

  SparseDepthMap gt_seeds(sparse.width(), sparse.height());
  sparse.for_each([&](int u, int v, double, std::int32_t) {
    if (gt.has(u, v)) gt_seeds.set(u, v, gt.depth(u, v));
  });
  if (gt_seeds.occupied_count() == 0) {
    throw InputError(
        "nearest_stats: no sparse cell overlaps a truth-valid pixel");
  }
  out.gt_seeded = detail::nearest_rows(gt_seeds, gt, bins);
  return out;
}

}  // namespace geodepth

#endif  // GEODEPTH_EVALUATION_HPP
