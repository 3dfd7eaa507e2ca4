// SPDX-License-Identifier: Apache-2.0

#ifndef GEODEPTH_BATCH_HPP
#define GEODEPTH_BATCH_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "geodepth/completion.hpp"
#include "geodepth/dataset_io.hpp"
#include "geodepth/error.hpp"
#include "geodepth/evaluation.hpp"
#include "geodepth/synthscene.hpp"

namespace geodepth {

// Directory-level runs. Every frame is an isolated pure computation, so the
// worker count never changes any output byte: per-frame results land in
// per-frame files and the aggregate report merges frame accumulators in stem
// order.

// -------------------------------------------------------------------------
// Pipeline configuration as "key: value" text and as a JSON snapshot.

inline const char* distance_metric_name(DistanceMetric m) {
  return m == DistanceMetric::kEuclidean ? "euclidean" : "l1";
}

inline DistanceMetric parse_distance_metric(const std::string& word) {
  if (word == "euclidean") return DistanceMetric::kEuclidean;
  if (word == "l1") return DistanceMetric::kL1;
  throw ConfigError("unknown distance metric \"" + word +
                    "\" (expected euclidean or l1)");
}

namespace detail {

inline bool config_flag(const std::string& raw, const std::string& key) {
  if (raw == "1" || raw == "true") return true;
  if (raw == "0" || raw == "false") return false;
  throw ConfigError("config key \"" + key + "\" must be 0/1 or true/false, " +
                    "got \"" + raw + "\"");
}

inline int config_int(const KeyValueFile& kv, const std::string& key) {
  const double v = kv.values(key, 1)[0];
  if (v != std::floor(v)) {
    throw ConfigError("config key \"" + key + "\" must be an integer, got " +
                      std::to_string(v));
  }
  return static_cast<int>(v);
}

}  // namespace detail

/// Applies "key: value" entries onto `cfg`. Every PipelineConfig field is
/// addressable under its field name; unknown keys are errors so a typo can
/// never silently keep a default.
inline PipelineConfig parse_pipeline_config(const KeyValueFile& kv,
                                            PipelineConfig cfg = {}) {
  for (const auto& [key, raw] : kv.entries()) {
    if (key == "outlier_removal") {
      cfg.outlier_removal = detail::config_flag(raw, key);
    } else if (key == "epsilon") {
      cfg.epsilon = kv.values(key, 1)[0];
    } else if (key == "range_image_cols") {
      cfg.range_image_cols = detail::config_int(kv, key);
    } else if (key == "range_image_lines") {
      cfg.range_image_lines = detail::config_int(kv, key);
    } else if (key == "normal_max_gap") {
      cfg.normal_max_gap = detail::config_int(kv, key);
    } else if (key == "smooth_normal_partials") {
      cfg.smooth_normal_partials = detail::config_flag(raw, key);
    } else if (key == "dt_metric") {
      cfg.dt_metric = parse_distance_metric(raw);
    } else if (key == "denom_guard") {
      cfg.denom_guard = kv.values(key, 1)[0];
    } else if (key == "max_range") {
      cfg.max_range = kv.values(key, 1)[0];
    } else if (key == "smooth_kernel") {
      cfg.smooth_kernel = detail::config_int(kv, key);
    } else if (key == "smooth_sigma") {
      cfg.smooth_sigma = kv.values(key, 1)[0];
    } else if (key == "preserve_seeds") {
      cfg.preserve_seeds = detail::config_flag(raw, key);
    } else if (key == "fov_margin_deg") {
      cfg.fov_margin_deg = kv.values(key, 1)[0];
    } else if (key == "eval_crop_top") {
      cfg.eval_crop_top = detail::config_int(kv, key);
    } else {
      throw ConfigError(kv.path() + ": unknown config key \"" + key + "\"");
    }
  }
  cfg.validate();
  return cfg;
}

inline PipelineConfig load_pipeline_config(const std::string& path,
                                           PipelineConfig defaults = {}) {
  return parse_pipeline_config(KeyValueFile(path), defaults);
}

inline nlohmann::json config_to_json(const PipelineConfig& cfg) {
  nlohmann::json j;
  j["outlier_removal"] = cfg.outlier_removal;
  j["epsilon"] = cfg.epsilon;
  j["range_image_cols"] = cfg.range_image_cols;
  j["range_image_lines"] = cfg.range_image_lines;
  j["normal_max_gap"] = cfg.normal_max_gap;
  j["smooth_normal_partials"] = cfg.smooth_normal_partials;
  j["dt_metric"] = distance_metric_name(cfg.dt_metric);
  j["denom_guard"] = cfg.denom_guard;
  j["max_range"] = cfg.max_range;
  j["smooth_kernel"] = cfg.smooth_kernel;
  j["smooth_sigma"] = cfg.smooth_sigma;
  j["preserve_seeds"] = cfg.preserve_seeds;
  j["fov_margin_deg"] = cfg.fov_margin_deg;
  j["eval_crop_top"] = cfg.eval_crop_top;
  return j;
}

inline EvalOptions eval_options(const PipelineConfig& cfg) {
  EvalOptions ev;
  ev.crop_top = cfg.eval_crop_top;
  return ev;
}

// -------------------------------------------------------------------------
// Frame discovery and pairing.

struct FramePair {
  std::string stem;
  std::filesystem::path input;
  std::filesystem::path gt;  ///< empty when no ground truth was requested
};

/// Regular files in `dir` with one of the given extensions, keyed by
/// filename stem. Two files sharing a stem (a.bin next to a.png) are
/// ambiguous and rejected.
inline std::map<std::string, std::filesystem::path> index_directory(
    const std::filesystem::path& dir, const std::vector<std::string>& exts) {
  if (!std::filesystem::is_directory(dir)) {
    throw IoError(dir.string() + " is not a readable directory");
  }
  std::map<std::string, std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = entry.path().extension().string();
    if (std::find(exts.begin(), exts.end(), ext) == exts.end()) continue;
    const std::string stem = entry.path().stem().string();
    const auto [it, fresh] = out.emplace(stem, entry.path());
    if (!fresh) {
      throw InputError(dir.string() + ": frame stem \"" + stem +
                       "\" is ambiguous (" + it->second.filename().string() +
                       " and " + entry.path().filename().string() + ")");
    }
  }
  return out;
}

namespace detail {

inline std::string list_stems(const std::vector<std::string>& stems) {
  std::string s;
  const std::size_t shown = std::min<std::size_t>(stems.size(), 8);
  for (std::size_t i = 0; i < shown; ++i) {
    if (i) s += " ";
    s += stems[i];
  }
  if (stems.size() > shown) {
    s += " (+" + std::to_string(stems.size() - shown) + " more)";
  }
  return s;
}

}  // namespace detail

/// Pairs two directories frame by frame via filename stems. The stem sets
/// must be identical; otherwise the error lists the asymmetric difference.
inline std::vector<FramePair> pair_frames(
    const std::map<std::string, std::filesystem::path>& inputs,
    const std::map<std::string, std::filesystem::path>& gts,
    const std::string& input_label, const std::string& gt_label) {
  std::vector<std::string> only_in, only_gt;
  for (const auto& [stem, path] : inputs) {
    if (!gts.count(stem)) only_in.push_back(stem);
  }
  for (const auto& [stem, path] : gts) {
    if (!inputs.count(stem)) only_gt.push_back(stem);
  }
  if (!only_in.empty() || !only_gt.empty()) {
    std::string msg = "frame sets do not match:";
    if (!only_in.empty()) {
      msg += " only in " + input_label + ": " + detail::list_stems(only_in) + ";";
    }
    if (!only_gt.empty()) {
      msg += " only in " + gt_label + ": " + detail::list_stems(only_gt) + ";";
    }
    msg.pop_back();
    throw InputError(msg);
  }
  std::vector<FramePair> out;
  out.reserve(inputs.size());
  for (const auto& [stem, path] : inputs) {
    out.push_back(FramePair{stem, path, gts.at(stem)});
  }
  return out;  // maps iterate sorted, so pairs come out in stem order
}

// -------------------------------------------------------------------------
// Worker pool.

/// Runs fn(i) for every i in [0, n) on up to `workers` threads. Work items
/// must be independent. The first exception, if any, is rethrown on the
/// calling thread once all workers have finished.
inline void parallel_for(int n, int workers,
                         const std::function<void(int)>& fn) {
  if (n <= 0) return;
  const int k = std::clamp(workers, 1, n);
  if (k == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex mu;
  std::exception_ptr first;
  std::vector<std::thread> pool;
  pool.reserve(k);
  for (int t = 0; t < k; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          const std::lock_guard<std::mutex> lock(mu);
          if (!first) first = std::current_exception();
        }
      }
    });
  }
  for (std::thread& th : pool) th.join();
  if (first) std::rethrow_exception(first);
}

// -------------------------------------------------------------------------
// Run manifest.

struct FrameResult {
  std::string stem;
  double wall_ms = 0.0;
  bool ok = false;
  std::string error;
};

struct TimingSummary {
  double mean_ms = 0.0;
  double median_ms = 0.0;
  int counted = 0;
};

inline TimingSummary summarize_timing(const std::vector<FrameResult>& frames) {
  std::vector<double> ms;
  for (const FrameResult& f : frames) {
    if (f.ok) ms.push_back(f.wall_ms);
  }
  TimingSummary t;
  t.counted = static_cast<int>(ms.size());
  if (ms.empty()) return t;
  double sum = 0.0;
  for (double m : ms) sum += m;
  t.mean_ms = sum / ms.size();
  std::sort(ms.begin(), ms.end());
  const std::size_t h = ms.size() / 2;
  t.median_ms = ms.size() % 2 ? ms[h] : (ms[h - 1] + ms[h]) / 2.0;
  return t;
}

inline nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json j;
  j["rmse_mm"] = r.rmse_mm;
  j["mae_mm"] = r.mae_mm;
  j["irmse_1pkm"] = r.irmse_1pkm;
  j["imae_1pkm"] = r.imae_1pkm;
  j["density"] = r.density;
  j["keep_ratio"] = r.keep_ratio;
  j["evaluated_pixels"] = r.evaluated_pixels;
  return j;
}

/// Everything needed to reproduce and audit one batch run: the exact config,
/// the paths, per-frame wall times and failures, and the aggregate report
/// when ground truth was evaluated.
struct RunManifest {
  std::string command;
  PipelineConfig config;
  std::string input_dir;
  std::string gt_dir;
  std::string calib_cam;
  std::string calib_lidar;
  std::string out_dir;
  int workers = 1;
  int lines = 0;  ///< 0 = scans used as-is
  std::vector<FrameResult> frames;
  std::optional<EvalReport> report;

  int failed_count() const {
    int k = 0;
    for (const FrameResult& f : frames) k += f.ok ? 0 : 1;
    return k;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["command"] = command;
    j["config"] = config_to_json(config);
    j["input_dir"] = input_dir;
    if (!gt_dir.empty()) j["gt_dir"] = gt_dir;
    if (!calib_cam.empty()) j["calib_cam"] = calib_cam;
    if (!calib_lidar.empty()) j["calib_lidar"] = calib_lidar;
    j["out_dir"] = out_dir;
    j["workers"] = workers;
    if (lines > 0) j["lines"] = lines;
    j["frames"] = nlohmann::json::array();
    for (const FrameResult& f : frames) {
      nlohmann::json jf;
      jf["stem"] = f.stem;
      jf["wall_ms"] = f.wall_ms;
      jf["ok"] = f.ok;
      if (!f.error.empty()) jf["error"] = f.error;
      j["frames"].push_back(jf);
    }
    const TimingSummary t = summarize_timing(frames);
    j["timing_ms"] = {{"mean", t.mean_ms}, {"median", t.median_ms}};
    if (report) j["report"] = report_to_json(*report);
    return j;
  }
};

inline void write_manifest(const RunManifest& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << m.to_json().dump(2) << "\n";
  if (!out) throw IoError(path + ": write failed");
}

// -------------------------------------------------------------------------
// Commands.

namespace detail {

/// A frame's scan: velodyne binaries directly, depth PNGs by unprojecting
/// each measured pixel back through the calibration.
inline LidarScan load_scan(const std::filesystem::path& path,
                           const Calibration& calib) {
  if (path.extension() == ".bin") return read_lidar_bin(path.string());
  return scan_from_sparse(read_depth_png(path.string()), calib.intrinsics,
                          calib.extrinsics);
}

inline double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace detail

struct CompleteOptions {
  std::string input_dir;   ///< .bin scans or sparse depth .png frames
  std::string calib_cam;   ///< camera calibration text file
  std::string calib_lidar; ///< LiDAR extrinsics text file
  std::string out_dir;
  std::string gt_dir;      ///< optional: evaluate while completing
  PipelineConfig config;
  int workers = 1;
  int lines = 0;           ///< 0 = as-is; 64/32/16 sparsifies the scan first
  bool write_masks = false;
  int camera = 2;
};

/// Completes every frame of a directory. Calibration problems abort before
/// any output exists; a frame that fails to read or process is recorded in
/// the manifest and the run continues. Outputs: out_dir/<stem>.png dense
/// depth, optional out_dir/masks/<stem>.png removal renders (a separate
/// directory so the depth outputs stay a clean frame set), and
/// out_dir/manifest.json.
inline RunManifest run_complete(const CompleteOptions& opt) {
  const Calibration calib =
      read_calibration(opt.calib_cam, opt.calib_lidar, opt.camera);
  opt.config.validate();
  if (opt.lines < 0) throw ConfigError("lines must be non-negative");

  const auto inputs = index_directory(opt.input_dir, {".bin", ".png"});
  if (inputs.empty()) {
    throw InputError(opt.input_dir + " holds no .bin or .png frames");
  }
  std::vector<FramePair> pairs;
  if (opt.gt_dir.empty()) {
    for (const auto& [stem, path] : inputs) {
      pairs.push_back(FramePair{stem, path, {}});
    }
  } else {
    pairs = pair_frames(inputs, index_directory(opt.gt_dir, {".png"}),
                        "input", "ground truth");
  }
  std::filesystem::create_directories(opt.out_dir);
  if (opt.write_masks) {
    std::filesystem::create_directories(std::filesystem::path(opt.out_dir) /
                                        "masks");
  }

  struct Slot {
    FrameResult frame;
    MetricAccumulator acc;
  };
  std::vector<Slot> slots(pairs.size());
  const std::filesystem::path out_base(opt.out_dir);

  parallel_for(static_cast<int>(pairs.size()), opt.workers, [&](int i) {
    Slot& slot = slots[i];
    slot.frame.stem = pairs[i].stem;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      LidarScan scan = detail::load_scan(pairs[i].input, calib);
      if (opt.lines > 0) scan = sparsify(scan, opt.lines);
      const CompletionResult result =
          complete(scan, calib.extrinsics, calib.intrinsics, opt.config);
      write_depth_png(result.dense,
                      (out_base / (pairs[i].stem + ".png")).string());
      if (opt.write_masks) {
        write_rgb_png(render_mask(result.mask.pixels),
                      (out_base / "masks" / (pairs[i].stem + ".png")).string());
      }
      if (!pairs[i].gt.empty()) {
        const SparseDepthMap gt = read_depth_png(pairs[i].gt.string());
        accumulate_metrics(result.dense, gt, &slot.acc,
                           eval_options(opt.config));
      }
      slot.frame.ok = true;
    } catch (const Error& e) {
      slot.frame.ok = false;
      slot.frame.error = e.what();
    }
    slot.frame.wall_ms = detail::elapsed_ms(t0);
  });

  RunManifest m;
  m.command = "complete";
  m.config = opt.config;
  m.input_dir = opt.input_dir;
  m.gt_dir = opt.gt_dir;
  m.calib_cam = opt.calib_cam;
  m.calib_lidar = opt.calib_lidar;
  m.out_dir = opt.out_dir;
  m.workers = opt.workers;
  m.lines = opt.lines;
  MetricAccumulator total;
  for (Slot& slot : slots) {
    m.frames.push_back(std::move(slot.frame));
    total.merge(slot.acc);  // stem order: aggregation is order-independent
  }
  if (!opt.gt_dir.empty() && total.evaluated() > 0) {
    m.report = total.report();
  }
  write_manifest(m, (out_base / "manifest.json").string());
  return m;
}

struct FrameEval {
  std::string stem;
  EvalReport report;
};

/// Per-frame reports in stem order plus the pooled dataset aggregate. The
/// aggregate merges pixel sums, so it equals a single pass over all pixels,
/// not an average of the per-frame rows.
struct EvalTable {
  std::vector<FrameEval> frames;
  EvalReport total;
};

/// Metrics of prediction PNGs against ground-truth PNGs paired by stem.
/// Each frame is scored over the intersection of measured pixels.
inline EvalTable run_evaluate_table(const std::string& pred_dir,
                                    const std::string& gt_dir,
                                    int workers = 1,
                                    const EvalOptions& eval = {}) {
  const std::vector<FramePair> pairs =
      pair_frames(index_directory(pred_dir, {".png"}),
                  index_directory(gt_dir, {".png"}), "prediction",
                  "ground truth");
  if (pairs.empty()) throw InputError(pred_dir + " holds no .png frames");

  std::vector<MetricAccumulator> accs(pairs.size());
  parallel_for(static_cast<int>(pairs.size()), workers, [&](int i) {
    const SparseDepthMap pred = read_depth_png(pairs[i].input.string());
    const SparseDepthMap gt = read_depth_png(pairs[i].gt.string());
    accumulate_metrics(pred, gt, &accs[i], eval);
  });
  EvalTable table;
  MetricAccumulator total;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    table.frames.push_back({pairs[i].stem, accs[i].report()});
    total.merge(accs[i]);
  }
  table.total = total.report();
  return table;
}

inline EvalReport run_evaluate(const std::string& pred_dir,
                               const std::string& gt_dir, int workers = 1,
                               const EvalOptions& eval = {}) {
  return run_evaluate_table(pred_dir, gt_dir, workers, eval).total;
}

/// CSV rendering of an evaluation table: one frame per row, dataset
/// aggregate last under the frame_id "all". Columns, in order:
/// frame_id, rmse, mae, irmse, imae, density, keep_ratio.
inline std::string eval_table_csv(const EvalTable& table) {
  std::string out = "frame_id,rmse,mae,irmse,imae,density,keep_ratio\n";
  const auto row = [&out](const std::string& id, const EvalReport& r) {
    char buf[192];
    std::snprintf(buf, sizeof(buf), "%s,%.4f,%.4f,%.4f,%.4f,%.6f,%.6f\n",
                  id.c_str(), r.rmse_mm, r.mae_mm, r.irmse_1pkm, r.imae_1pkm,
                  r.density, r.keep_ratio);
    out += buf;
  };
  for (const FrameEval& f : table.frames) row(f.stem, f.report);
  row("all", table.total);
  return out;
}

struct AblateOptions {
  std::string input_dir;
  std::string calib_cam;
  std::string calib_lidar;
  std::string gt_dir;  ///< required: every stage is scored against it
  PipelineConfig config;
  int workers = 1;
  int lines = 0;
  int camera = 2;
};

/// Stage-by-stage error over a directory, pooled across frames: the rows of
/// ablation_trace aggregated the same way run_evaluate pools frames.
inline std::vector<AblationRow> run_ablate(const AblateOptions& opt) {
  const Calibration calib =
      read_calibration(opt.calib_cam, opt.calib_lidar, opt.camera);
  opt.config.validate();
  if (opt.gt_dir.empty()) {
    throw ConfigError("ablation needs a ground-truth directory");
  }
  const std::vector<FramePair> pairs =
      pair_frames(index_directory(opt.input_dir, {".bin", ".png"}),
                  index_directory(opt.gt_dir, {".png"}), "input",
                  "ground truth");
  if (pairs.empty()) throw InputError(opt.input_dir + " holds no frames");

  constexpr int kStages = 5;
  struct Slot {
    MetricAccumulator acc[kStages];
    std::int64_t removed = 0;
    std::int64_t points = 0;
  };
  std::vector<Slot> slots(pairs.size());
  parallel_for(static_cast<int>(pairs.size()), opt.workers, [&](int i) {
    LidarScan scan = detail::load_scan(pairs[i].input, calib);
    if (opt.lines > 0) scan = sparsify(scan, opt.lines);
    const CompletionStages st =
        complete_stages(scan, calib.extrinsics, calib.intrinsics, opt.config);
    const SparseDepthMap gt = read_depth_png(pairs[i].gt.string());
    const EvalOptions ev = eval_options(opt.config);
    accumulate_metrics(st.projected.map, gt, &slots[i].acc[0], ev);
    accumulate_metrics(st.removal.cleaned, gt, &slots[i].acc[1], ev);
    accumulate_metrics(st.nearest, gt, &slots[i].acc[2], ev);
    accumulate_metrics(st.planar, gt, &slots[i].acc[3], ev);
    accumulate_metrics(st.smoothed, gt, &slots[i].acc[4], ev);
    slots[i].removed = static_cast<std::int64_t>(st.removal.mask.removed.size());
    slots[i].points = st.removal.mask.point_count;
  });

  MetricAccumulator total[kStages];
  std::int64_t removed = 0, points = 0;
  for (const Slot& s : slots) {
    for (int k = 0; k < kStages; ++k) total[k].merge(s.acc[k]);
    removed += s.removed;
    points += s.points;
  }
  const double keep =
      points > 0 ? 1.0 - static_cast<double>(removed) / points : 1.0;
  static const char* kNames[kStages] = {"sparse-input", "outlier-removed",
                                        "nearest-seed", "planar-residual",
                                        "smoothed"};
  std::vector<AblationRow> rows;
  for (int k = 0; k < kStages; ++k) {
    rows.push_back(AblationRow{kNames[k], total[k].report()});
    if (k >= 1) rows.back().report.keep_ratio = keep;
  }
  return rows;
}

struct SparsifyOptions {
  std::string input_dir;  ///< .bin scans
  std::string out_dir;
  int lines = 16;
  int phase = 0;
  int fallback_lines = 64;  ///< pseudo-line count for scans without rings
  int workers = 1;
};

/// Thins every scan of a directory to the requested line count and writes
/// the result as .bin files under the same stems.
inline std::vector<FrameResult> run_sparsify(const SparsifyOptions& opt) {
  const auto inputs = index_directory(opt.input_dir, {".bin"});
  if (inputs.empty()) {
    throw InputError(opt.input_dir + " holds no .bin frames");
  }
  std::filesystem::create_directories(opt.out_dir);
  std::vector<FramePair> pairs;
  for (const auto& [stem, path] : inputs) {
    pairs.push_back(FramePair{stem, path, {}});
  }
  std::vector<FrameResult> results(pairs.size());
  const std::filesystem::path out_base(opt.out_dir);
  parallel_for(static_cast<int>(pairs.size()), opt.workers, [&](int i) {
    results[i].stem = pairs[i].stem;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const LidarScan scan = read_lidar_bin(pairs[i].input.string());
      const LidarScan thin =
          sparsify(scan, opt.lines, opt.fallback_lines, opt.phase);
      write_lidar_bin(thin, (out_base / (pairs[i].stem + ".bin")).string());
      results[i].ok = true;
    } catch (const Error& e) {
      results[i].ok = false;
      results[i].error = e.what();
    }
    results[i].wall_ms = detail::elapsed_ms(t0);
  });
  return results;
}

/// Pooled nearest-seed statistics over a directory: fractions weighted by
/// frame pixel counts, errors by ground-truth pixel counts, so the result
/// equals a single pass over all pixels.
inline NearestStats run_stats(const std::string& input_dir,
                              const std::string& gt_dir, int bins = 30,
                              int workers = 1) {
  const std::vector<FramePair> pairs = pair_frames(
      index_directory(input_dir, {".png"}),
      index_directory(gt_dir, {".png"}), "input", "ground truth");
  if (pairs.empty()) throw InputError(input_dir + " holds no .png frames");

  struct Slot {
    NearestStats stats;
    std::int64_t pixels = 0;
  };
  std::vector<Slot> slots(pairs.size());
  parallel_for(static_cast<int>(pairs.size()), workers, [&](int i) {
    const SparseDepthMap sparse = read_depth_png(pairs[i].input.string());
    const SparseDepthMap gt = read_depth_png(pairs[i].gt.string());
    slots[i].stats = nearest_stats(sparse, gt, bins);
    slots[i].pixels = static_cast<std::int64_t>(sparse.width()) * sparse.height();
  });

  const auto merge_rows = [&](std::vector<NearestStatsRow> NearestStats::*member) {
    std::vector<NearestStatsRow> rows(bins + 1);
    std::vector<double> abs_sum(bins + 1, 0.0);
    std::int64_t pixels = 0;
    for (const Slot& s : slots) {
      pixels += s.pixels;
      const std::vector<NearestStatsRow>& r = s.stats.*member;
      for (int b = 0; b <= bins; ++b) {
        rows[b].fraction += r[b].fraction * s.pixels;
        rows[b].gt_pixels += r[b].gt_pixels;
        abs_sum[b] += r[b].mae_mm * r[b].gt_pixels;
      }
    }
    for (int b = 0; b <= bins; ++b) {
      rows[b].fraction /= pixels;
      if (rows[b].gt_pixels > 0) rows[b].mae_mm = abs_sum[b] / rows[b].gt_pixels;
    }
    return rows;
  };
  NearestStats out;
  out.raw = merge_rows(&NearestStats::raw);
  out.gt_seeded = merge_rows(&NearestStats::gt_seeded);
  return out;
}

enum class RenderMode { kDepth, kNormal, kOutlierMask, kError };

inline RenderMode parse_render_mode(const std::string& word) {
  if (word == "depth") return RenderMode::kDepth;
  if (word == "normal") return RenderMode::kNormal;
  if (word == "outlier_mask") return RenderMode::kOutlierMask;
  if (word == "error") return RenderMode::kError;
  throw ConfigError("unknown render mode \"" + word +
                    "\" (expected depth, normal, outlier_mask, or error)");
}

struct RenderOptions {
  std::string input_dir;  ///< depth .png (all modes) or .bin (pipeline modes)
  std::string out_dir;
  std::string gt_dir;      ///< error mode
  std::string calib_cam;   ///< normal / outlier_mask modes
  std::string calib_lidar;
  RenderMode mode = RenderMode::kDepth;
  PipelineConfig config;  ///< pipeline settings for normal / outlier_mask
  double max_range = 120.0;
  double error_span_m = 2.0;
  int workers = 1;
  int camera = 2;
};

/// Colorized renders of a directory. depth and error read files as they
/// are; normal and outlier_mask run the pipeline stages to produce the
/// quantity being rendered.
inline std::vector<FrameResult> run_render(const RenderOptions& opt) {
  const bool needs_calib = opt.mode == RenderMode::kNormal ||
                           opt.mode == RenderMode::kOutlierMask;
  const bool needs_gt = opt.mode == RenderMode::kError;
  if (needs_gt && opt.gt_dir.empty()) {
    throw ConfigError("error renders need a ground-truth directory");
  }
  std::optional<Calibration> calib;
  if (needs_calib) {
    calib = read_calibration(opt.calib_cam, opt.calib_lidar, opt.camera);
  }
  const auto inputs = index_directory(
      opt.input_dir, needs_calib ? std::vector<std::string>{".bin", ".png"}
                                 : std::vector<std::string>{".png"});
  if (inputs.empty()) throw InputError(opt.input_dir + " holds no frames");
  std::vector<FramePair> pairs;
  if (needs_gt) {
    pairs = pair_frames(inputs, index_directory(opt.gt_dir, {".png"}),
                        "input", "ground truth");
  } else {
    for (const auto& [stem, path] : inputs) {
      pairs.push_back(FramePair{stem, path, {}});
    }
  }
  std::filesystem::create_directories(opt.out_dir);
  const std::filesystem::path out_base(opt.out_dir);

  std::vector<FrameResult> results(pairs.size());
  parallel_for(static_cast<int>(pairs.size()), opt.workers, [&](int i) {
    results[i].stem = pairs[i].stem;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      RgbImage img;
      switch (opt.mode) {
        case RenderMode::kDepth:
          img = render_depth(read_depth_png(pairs[i].input.string()),
                             opt.max_range);
          break;
        case RenderMode::kError:
          img = render_error(read_depth_png(pairs[i].input.string()),
                             read_depth_png(pairs[i].gt.string()),
                             opt.error_span_m);
          break;
        case RenderMode::kNormal:
        case RenderMode::kOutlierMask: {
          const CompletionStages st =
              complete_stages(detail::load_scan(pairs[i].input, *calib),
                              calib->extrinsics, calib->intrinsics,
                              opt.config);
          img = opt.mode == RenderMode::kNormal
                    ? render_normals(st.normals)
                    : render_mask(st.removal.mask.pixels);
          break;
        }
      }
      write_rgb_png(img, (out_base / (pairs[i].stem + ".png")).string());
      results[i].ok = true;
    } catch (const Error& e) {
      results[i].ok = false;
      results[i].error = e.what();
    }
    results[i].wall_ms = detail::elapsed_ms(t0);
  });
  return results;
}

// -------------------------------------------------------------------------
// Synthetic dataset generation.

/// Generator settings for a randomized two-plane driving-like dataset:
/// a tilted background wall and (optionally) a vertical occluder stripe in
/// front of it, scanned by a LiDAR displaced `baseline` meters from the
/// camera. Identical spec -> identical bytes on disk.
struct SynthSpec {
  int frames = 5;
  std::uint32_t seed = 1;
  CameraIntrinsics intrinsics{350.0, 350.0, 160.0, 48.0, 320, 96};
  int lines = 64;
  double azimuth_step_deg = 0.25;
  double baseline = 0.3;  ///< camera offset from the LiDAR, camera x
  bool occluder = true;
  double range_jitter_sigma = 0.0;
  double max_range = 120.0;

  void validate() const {
    if (frames < 1) throw ConfigError("synth needs at least one frame");
    intrinsics.validate();
    if (lines < 2) throw ConfigError("synth needs at least two lines");
    if (!(azimuth_step_deg > 0.0)) {
      throw ConfigError("azimuth step must be positive");
    }
    if (!(max_range > 0.0)) throw ConfigError("max_range must be positive");
    if (range_jitter_sigma < 0.0) {
      throw ConfigError("range jitter sigma must be non-negative");
    }
  }
};

inline SynthSpec parse_synth_spec(const KeyValueFile& kv) {
  SynthSpec spec;
  for (const auto& [key, raw] : kv.entries()) {
    if (key == "frames") {
      spec.frames = detail::config_int(kv, key);
    } else if (key == "seed") {
      spec.seed = static_cast<std::uint32_t>(detail::config_int(kv, key));
    } else if (key == "width") {
      spec.intrinsics.width = detail::config_int(kv, key);
    } else if (key == "height") {
      spec.intrinsics.height = detail::config_int(kv, key);
    } else if (key == "fu") {
      spec.intrinsics.fu = kv.values(key, 1)[0];
    } else if (key == "fv") {
      spec.intrinsics.fv = kv.values(key, 1)[0];
    } else if (key == "pu") {
      spec.intrinsics.pu = kv.values(key, 1)[0];
    } else if (key == "pv") {
      spec.intrinsics.pv = kv.values(key, 1)[0];
    } else if (key == "lines") {
      spec.lines = detail::config_int(kv, key);
    } else if (key == "azimuth_step_deg") {
      spec.azimuth_step_deg = kv.values(key, 1)[0];
    } else if (key == "baseline") {
      spec.baseline = kv.values(key, 1)[0];
    } else if (key == "occluder") {
      spec.occluder = detail::config_flag(raw, key);
    } else if (key == "range_jitter_sigma") {
      spec.range_jitter_sigma = kv.values(key, 1)[0];
    } else if (key == "max_range") {
      spec.max_range = kv.values(key, 1)[0];
    } else {
      throw ConfigError(kv.path() + ": unknown scene key \"" + key + "\"");
    }
  }
  spec.validate();
  return spec;
}

/// The scene of frame `index` under `spec`. Deterministic in (spec, index).
inline SceneSpec synth_frame_scene(const SynthSpec& spec, int index) {
  spec.validate();
  std::mt19937 rng(spec.seed + static_cast<std::uint32_t>(index) * 9973u);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto range = [&](double lo, double hi) {
    return lo + (hi - lo) * unit(rng);
  };

  SceneSpec scene;
  scene.intrinsics = spec.intrinsics;
  scene.max_range = spec.max_range;
  scene.range_jitter_sigma = spec.range_jitter_sigma;
  scene.seed = spec.seed + static_cast<std::uint32_t>(index);
  // World axes follow the camera convention; the LiDAR sits at the origin
  // and the camera `baseline` to its right.
  scene.lidar_pose =
      RigidTransform{lidar_to_camera_axes(), Eigen::Vector3d::Zero()};
  scene.camera_pose = RigidTransform{Eigen::Matrix3d::Identity(),
                                     Eigen::Vector3d(spec.baseline, 0, 0)};

  const Eigen::Vector3d bg_normal =
      Eigen::Vector3d(range(-0.15, 0.15), range(-0.15, 0.15), -1.0)
          .normalized();
  scene.surfaces.push_back(Surface::make_plane(
      Eigen::Vector3d(0, 0, range(10.0, 16.0)), bg_normal));
  if (spec.occluder) {
    const Eigen::Vector3d oc_normal =
        Eigen::Vector3d(range(-0.08, 0.08), range(-0.08, 0.08), -1.0)
            .normalized();
    // A vertical stripe (bounded horizontally, infinite vertically) so the
    // whole silhouette is two clean vertical edges.
    scene.surfaces.push_back(Surface::make_plane(
        Eigen::Vector3d(range(-1.5, 1.5), 0, range(4.0, 8.0)), oc_normal,
        range(0.7, 1.4), 0.0));
  }

  // The sweep covers the camera frustum with a small margin.
  const double deg = 180.0 / M_PI;
  const double half_w = spec.intrinsics.width / 2.0;
  const double half_h = spec.intrinsics.height / 2.0;
  const double az = std::atan(half_w / spec.intrinsics.fu) * deg + 2.0;
  const double el = std::atan(half_h / spec.intrinsics.fv) * deg + 1.0;
  scene.pattern.lines = spec.lines;
  scene.pattern.elevation_min_deg = -el;
  scene.pattern.elevation_max_deg = el;
  scene.pattern.azimuth_min_deg = -az;
  scene.pattern.azimuth_max_deg = az;
  scene.pattern.azimuth_step_deg = spec.azimuth_step_deg;
  return scene;
}

/// Writes a synthetic dataset in the directory layout the other commands
/// consume: velodyne/<stem>.bin, gt/<stem>.png, and a calibration pair at
/// the root. Returns the frame stems.
inline std::vector<std::string> run_synth(const SynthSpec& spec,
                                          const std::string& out_dir) {
  spec.validate();
  const std::filesystem::path base(out_dir);
  std::filesystem::create_directories(base / "velodyne");
  std::filesystem::create_directories(base / "gt");

  Calibration calib;
  calib.intrinsics = spec.intrinsics;
  // LiDAR -> camera: world is camera-aligned at the LiDAR origin.
  const SceneSpec probe = synth_frame_scene(spec, 0);
  calib.extrinsics = probe.camera_pose.inverse().compose(probe.lidar_pose);
  write_calibration(calib, (base / "calib_cam_to_cam.txt").string(),
                    (base / "calib_velo_to_cam.txt").string());

  std::vector<std::string> stems;
  for (int i = 0; i < spec.frames; ++i) {
    const SceneSpec scene = synth_frame_scene(spec, i);
    char stem[16];
    std::snprintf(stem, sizeof(stem), "%06d", i);
    const SyntheticScan scan = render_scan(scene);
    if (scan.scan.points.empty()) {
      throw InputError(std::string("synthetic frame ") + stem +
                       " produced no scan points");
    }
    write_lidar_bin(scan.scan,
                    (base / "velodyne" / (std::string(stem) + ".bin")).string());
    const TruthImage truth = render_truth(scene);
    write_depth_png(truth_as_sparse(truth),
                    (base / "gt" / (std::string(stem) + ".png")).string());
    stems.push_back(stem);
  }
  return stems;
}

}  // namespace geodepth

#endif  // GEODEPTH_BATCH_HPP
