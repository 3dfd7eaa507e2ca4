// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "geodepth/batch.hpp"

namespace gd = geodepth;

namespace {

// Exit codes: 0 full success, 1 some frames failed, 2 configuration or
// format problem (bad flags, missing calibration, malformed files).
constexpr int kOk = 0;
constexpr int kPartial = 1;
constexpr int kConfig = 2;

struct Cli {
  std::string input;
  std::string gt;
  std::string calib;
  std::string out;
  std::string config;
  std::string dt_metric;
  std::string render_mode = "depth";
  int workers = 1;
  int lines = 0;
  bool no_outlier_removal = false;
  bool no_smooth = false;
  bool mask_out = false;
};

/// Config file first, then flag overrides.
gd::PipelineConfig build_config(const Cli& cli) {
  gd::PipelineConfig cfg;
  if (!cli.config.empty()) cfg = gd::load_pipeline_config(cli.config);
  if (cli.no_outlier_removal) cfg.outlier_removal = false;
  if (cli.no_smooth) cfg.smooth_kernel = 1;
  if (!cli.dt_metric.empty()) {
    cfg.dt_metric = gd::parse_distance_metric(cli.dt_metric);
  }
  cfg.validate();
  return cfg;
}

/// --calib names a directory holding the standard calibration pair.
std::pair<std::string, std::string> calib_pair(const std::string& calib) {
  if (calib.empty()) {
    throw gd::ConfigError("--calib is required for this command");
  }
  if (!std::filesystem::is_directory(calib)) {
    throw gd::ConfigError("--calib must be a directory holding "
                          "calib_cam_to_cam.txt and calib_velo_to_cam.txt, "
                          "got " + calib);
  }
  const std::filesystem::path base(calib);
  return {(base / "calib_cam_to_cam.txt").string(),
          (base / "calib_velo_to_cam.txt").string()};
}

void print_report(const gd::EvalReport& r) {
  std::printf("rmse %10.2f mm   mae %10.2f mm   irmse %8.3f 1/km   "
              "imae %8.3f 1/km   density %6.2f%%\n",
              r.rmse_mm, r.mae_mm, r.irmse_1pkm, r.imae_1pkm,
              r.density * 100.0);
}

int report_failures(const std::vector<gd::FrameResult>& frames) {
  int failed = 0;
  for (const gd::FrameResult& f : frames) {
    if (!f.ok) {
      ++failed;
      std::fprintf(stderr, "frame %s failed: %s\n", f.stem.c_str(),
                   f.error.c_str());
    }
  }
  return failed;
}

int cmd_complete(const Cli& cli) {
  gd::CompleteOptions opt;
  opt.input_dir = cli.input;
  std::tie(opt.calib_cam, opt.calib_lidar) = calib_pair(cli.calib);
  opt.out_dir = cli.out;
  opt.gt_dir = cli.gt;
  opt.config = build_config(cli);
  opt.workers = cli.workers;
  opt.lines = cli.lines;
  opt.write_masks = cli.mask_out;

  const gd::RunManifest m = gd::run_complete(opt);
  const int failed = report_failures(m.frames);
  const gd::TimingSummary t = gd::summarize_timing(m.frames);
  std::printf("completed %zu frames (%d failed)\n", m.frames.size(), failed);
  std::printf("wall time per frame: mean %.2f ms, median %.2f ms\n",
              t.mean_ms, t.median_ms);
  if (m.report) print_report(*m.report);
  std::printf("manifest: %s\n",
              (std::filesystem::path(cli.out) / "manifest.json").c_str());
  return failed > 0 ? kPartial : kOk;
}

int cmd_evaluate(const Cli& cli) {
  const gd::EvalTable table = gd::run_evaluate_table(
      cli.input, cli.gt, cli.workers, gd::eval_options(build_config(cli)));
  print_report(table.total);
  if (!cli.out.empty()) {
    std::ofstream file(cli.out);
    file << gd::eval_table_csv(table);
    if (!file.good()) {
      throw gd::IoError("cannot write report table " + cli.out);
    }
    std::printf("report table: %s\n", cli.out.c_str());
  }
  return kOk;
}

int cmd_ablate(const Cli& cli) {
  gd::AblateOptions opt;
  opt.input_dir = cli.input;
  std::tie(opt.calib_cam, opt.calib_lidar) = calib_pair(cli.calib);
  opt.gt_dir = cli.gt;
  opt.config = build_config(cli);
  opt.workers = cli.workers;
  opt.lines = cli.lines;

  const std::vector<gd::AblationRow> rows = gd::run_ablate(opt);
  std::printf("%-16s %12s %12s %12s %12s %9s %8s\n", "stage", "rmse(mm)",
              "mae(mm)", "irmse(1/km)", "imae(1/km)", "density%", "keep%");
  for (const gd::AblationRow& row : rows) {
    std::printf("%-16s %12.2f %12.2f %12.3f %12.3f %9.2f %8.2f\n",
                row.stage.c_str(), row.report.rmse_mm, row.report.mae_mm,
                row.report.irmse_1pkm, row.report.imae_1pkm,
                row.report.density * 100.0, row.report.keep_ratio * 100.0);
  }
  return kOk;
}

int cmd_sparsify(const Cli& cli) {
  gd::SparsifyOptions opt;
  opt.input_dir = cli.input;
  opt.out_dir = cli.out;
  opt.lines = cli.lines;
  opt.workers = cli.workers;
  const std::vector<gd::FrameResult> results = gd::run_sparsify(opt);
  const int failed = report_failures(results);
  std::printf("sparsified %zu scans to %d lines (%d failed)\n",
              results.size(), cli.lines, failed);
  return failed > 0 ? kPartial : kOk;
}

int cmd_stats(const Cli& cli) {
  const gd::NearestStats stats = gd::run_stats(cli.input, cli.gt, 30,
                                               cli.workers);
  std::printf("%-9s %10s %10s %12s %18s\n", "dist(px)", "fraction%",
              "gt px", "mae(mm)", "gt-seeded mae(mm)");
  for (std::size_t b = 0; b < stats.raw.size(); ++b) {
    char label[16];
    if (b + 1 < stats.raw.size()) {
      std::snprintf(label, sizeof(label), "%zu", b);
    } else {
      std::snprintf(label, sizeof(label), ">=%zu", b);
    }
    std::printf("%-9s %10.4f %10lld %12.2f %18.2f\n", label,
                stats.raw[b].fraction * 100.0,
                static_cast<long long>(stats.raw[b].gt_pixels),
                stats.raw[b].mae_mm, stats.gt_seeded[b].mae_mm);
  }
  return kOk;
}

int cmd_render(const Cli& cli) {
  gd::RenderOptions opt;
  opt.mode = gd::parse_render_mode(cli.render_mode);
  opt.input_dir = cli.input;
  opt.out_dir = cli.out;
  opt.gt_dir = cli.gt;
  if (opt.mode == gd::RenderMode::kNormal ||
      opt.mode == gd::RenderMode::kOutlierMask) {
    std::tie(opt.calib_cam, opt.calib_lidar) = calib_pair(cli.calib);
  }
  opt.config = build_config(cli);
  opt.workers = cli.workers;
  const std::vector<gd::FrameResult> results = gd::run_render(opt);
  const int failed = report_failures(results);
  std::printf("rendered %zu frames as %s (%d failed)\n", results.size(),
              cli.render_mode.c_str(), failed);
  return failed > 0 ? kPartial : kOk;
}

int cmd_synth(const Cli& cli) {
  gd::SynthSpec spec;
  if (!cli.config.empty()) {
    spec = gd::parse_synth_spec(gd::KeyValueFile(cli.config));
  }
  const std::vector<std::string> stems = gd::run_synth(spec, cli.out);
  std::printf("wrote %zu synthetic frames under %s "
              "(velodyne/, gt/, calibration pair)\n",
              stems.size(), cli.out.c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LiDAR depth completion toolkit: occlusion outlier removal "
               "plus surface-geometry densification"};
  app.require_subcommand(1);
  Cli cli;

  const auto add_common = [&](CLI::App* cmd, bool with_pipeline) {
    cmd->add_option("--workers", cli.workers, "worker threads")
        ->check(CLI::PositiveNumber);
    if (with_pipeline) {
      cmd->add_option("--config", cli.config, "pipeline config file");
      cmd->add_flag("--no-outlier-removal", cli.no_outlier_removal,
                    "keep every projected point");
      cmd->add_flag("--no-smooth", cli.no_smooth,
                    "skip the final Gaussian smoothing");
      cmd->add_option("--dt-metric", cli.dt_metric,
                      "nearest-seed metric")
          ->check(CLI::IsMember({"euclidean", "l1"}));
    }
  };

  CLI::App* complete = app.add_subcommand(
      "complete", "densify sparse scans over a directory of frames");
  complete->add_option("--input", cli.input, "scan directory (.bin or .png)")
      ->required();
  complete->add_option("--calib", cli.calib, "calibration directory")
      ->required();
  complete->add_option("--out", cli.out, "output directory")->required();
  complete->add_option("--gt", cli.gt, "ground-truth directory (evaluate)");
  complete->add_option("--lines", cli.lines, "sparsify the scan first")
      ->check(CLI::IsMember({16, 32, 64}));
  complete->add_flag("--mask-out", cli.mask_out,
                     "write removal mask renders next to the depth maps");
  add_common(complete, true);

  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "aggregate metrics of predictions against ground truth");
  evaluate->add_option("--input", cli.input, "prediction directory")
      ->required();
  evaluate->add_option("--gt", cli.gt, "ground-truth directory")->required();
  evaluate->add_option(
      "--out", cli.out,
      "write a per-frame CSV table: frame_id,rmse,mae,irmse,imae,density,"
      "keep_ratio, dataset aggregate last");
  evaluate->add_option("--config", cli.config,
                       "pipeline config file (eval_crop_top applies)");
  add_common(evaluate, false);

  CLI::App* ablate = app.add_subcommand(
      "ablate", "score every pipeline stage against ground truth");
  ablate->add_option("--input", cli.input, "scan directory")->required();
  ablate->add_option("--calib", cli.calib, "calibration directory")
      ->required();
  ablate->add_option("--gt", cli.gt, "ground-truth directory")->required();
  ablate->add_option("--lines", cli.lines, "sparsify the scan first")
      ->check(CLI::IsMember({16, 32, 64}));
  add_common(ablate, true);

  CLI::App* sparsify = app.add_subcommand(
      "sparsify", "thin scans to a lower line count");
  sparsify->add_option("--input", cli.input, "scan directory (.bin)")
      ->required();
  sparsify->add_option("--out", cli.out, "output directory")->required();
  sparsify->add_option("--lines", cli.lines, "target line count")
      ->required()
      ->check(CLI::IsMember({16, 32, 64}));
  add_common(sparsify, false);

  CLI::App* stats = app.add_subcommand(
      "stats", "nearest-seed distance and error table");
  stats->add_option("--input", cli.input, "sparse depth directory")
      ->required();
  stats->add_option("--gt", cli.gt, "ground-truth directory")->required();
  add_common(stats, false);

  CLI::App* render = app.add_subcommand(
      "render", "colorized inspection images");
  render->add_option("mode", cli.render_mode,
                     "depth, normal, outlier_mask, or error")
      ->required()
      ->check(CLI::IsMember({"depth", "normal", "outlier_mask", "error"}));
  render->add_option("--input", cli.input, "input directory")->required();
  render->add_option("--out", cli.out, "output directory")->required();
  render->add_option("--gt", cli.gt, "ground truth (error mode)");
  render->add_option("--calib", cli.calib,
                     "calibration directory (normal / outlier_mask)");
  add_common(render, true);

  CLI::App* synth = app.add_subcommand(
      "synth", "generate a synthetic dataset (velodyne/, gt/, calibration)");
  synth->add_option("--config", cli.config, "scene spec file");
  synth->add_option("--out", cli.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (complete->parsed()) return cmd_complete(cli);
    if (evaluate->parsed()) return cmd_evaluate(cli);
    if (ablate->parsed()) return cmd_ablate(cli);
    if (sparsify->parsed()) return cmd_sparsify(cli);
    if (stats->parsed()) return cmd_stats(cli);
    if (render->parsed()) return cmd_render(cli);
    if (synth->parsed()) return cmd_synth(cli);
  } catch (const gd::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kConfig;
  }
  return kOk;
}
