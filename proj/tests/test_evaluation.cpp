// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "geodepth/evaluation.hpp"
#include "testutil.hpp"

namespace gd = geodepth;

namespace {

gd::SparseDepthMap map_from(const std::vector<std::tuple<int, int, double>>& cells,
                            int w, int h) {
  gd::SparseDepthMap m(w, h);
  for (const auto& [u, v, d] : cells) m.set(u, v, d);
  return m;
}

// Straight-line reference for every statistic, summing in its own order.
struct RefStats {
  double rmse_mm, mae_mm, irmse, imae;
};

RefStats reference_metrics(const std::vector<std::pair<double, double>>& pairs) {
  double sq = 0, ab = 0, isq = 0, iab = 0;
  for (const auto& [p, g] : pairs) {
    const double e = (p - g) * 1000.0;
    const double ie = 1000.0 / p - 1000.0 / g;
    sq += e * e;
    ab += std::abs(e);
    isq += ie * ie;
    iab += std::abs(ie);
  }
  const double n = static_cast<double>(pairs.size());
  return {std::sqrt(sq / n), ab / n, std::sqrt(isq / n), iab / n};
}

}  // namespace

TEST_CASE("worked two-pixel example reproduces the benchmark units") {
  // pred {2m, 4m} against truth {1m, 2m}.
  const auto pred = map_from({{0, 0, 2.0}, {1, 0, 4.0}}, 2, 1);
  const auto gt = map_from({{0, 0, 1.0}, {1, 0, 2.0}}, 2, 1);
  const auto r = gd::metrics(pred, gt);

  CHECK(r.rmse_mm == Catch::Approx(std::sqrt(2.5e6)).epsilon(1e-12));
  CHECK(r.rmse_mm == Catch::Approx(1581.13883).epsilon(1e-8));
  CHECK(r.mae_mm == Catch::Approx(1500.0).epsilon(1e-12));
  CHECK(r.irmse_1pkm == Catch::Approx(std::sqrt(156250.0)).epsilon(1e-12));
  CHECK(r.irmse_1pkm == Catch::Approx(395.284708).epsilon(1e-8));
  CHECK(r.imae_1pkm == Catch::Approx(375.0).epsilon(1e-12));
  CHECK(r.evaluated_pixels == 2);
  CHECK(r.density == Catch::Approx(1.0));
  CHECK(r.keep_ratio == 1.0);
}

TEST_CASE("metrics match a straight-line reference on random maps") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> depth(0.5, 80.0);
  std::bernoulli_distribution occ(0.4);

  for (int round = 0; round < 10; ++round) {
    gd::SparseDepthMap pred(23, 17), gt(23, 17);
    std::vector<std::pair<double, double>> pairs;
    int pred_cells = 0;
    for (int v = 0; v < 17; ++v) {
      for (int u = 0; u < 23; ++u) {
        const bool hp = occ(rng), hg = occ(rng);
        const double dp = depth(rng), dg = depth(rng);
        if (hp) {
          pred.set(u, v, dp);
          ++pred_cells;
        }
        if (hg) gt.set(u, v, dg);
        if (hp && hg) pairs.emplace_back(dp, dg);
      }
    }
    if (pairs.empty()) continue;
    const auto r = gd::metrics(pred, gt);
    const auto ref = reference_metrics(pairs);
    CHECK(r.rmse_mm == Catch::Approx(ref.rmse_mm).epsilon(1e-12));
    CHECK(r.mae_mm == Catch::Approx(ref.mae_mm).epsilon(1e-12));
    CHECK(r.irmse_1pkm == Catch::Approx(ref.irmse).epsilon(1e-12));
    CHECK(r.imae_1pkm == Catch::Approx(ref.imae).epsilon(1e-12));
    CHECK(r.evaluated_pixels == static_cast<std::int64_t>(pairs.size()));
    CHECK(r.density == Catch::Approx(pred_cells / (23.0 * 17.0)).epsilon(1e-12));
  }
}

TEST_CASE("merged accumulators equal one pooled pass") {
  std::mt19937 rng(12);
  std::uniform_real_distribution<double> depth(0.5, 60.0);

  std::vector<std::pair<double, double>> pairs(500);
  for (auto& pr : pairs) pr = {depth(rng), depth(rng)};

  gd::MetricAccumulator pooled;
  for (const auto& [p, g] : pairs) pooled.add(p, g);
  pooled.count_pixels(500, 1000);

  gd::MetricAccumulator a, b, c;
  for (int i = 0; i < 170; ++i) a.add(pairs[i].first, pairs[i].second);
  for (int i = 170; i < 420; ++i) b.add(pairs[i].first, pairs[i].second);
  for (int i = 420; i < 500; ++i) c.add(pairs[i].first, pairs[i].second);
  a.count_pixels(170, 340);
  b.count_pixels(250, 500);
  c.count_pixels(80, 160);
  a.merge(b);
  a.merge(c);

  const auto rp = pooled.report();
  const auto rm = a.report();
  CHECK(rm.rmse_mm == Catch::Approx(rp.rmse_mm).epsilon(1e-12));
  CHECK(rm.mae_mm == Catch::Approx(rp.mae_mm).epsilon(1e-12));
  CHECK(rm.irmse_1pkm == Catch::Approx(rp.irmse_1pkm).epsilon(1e-12));
  CHECK(rm.imae_1pkm == Catch::Approx(rp.imae_1pkm).epsilon(1e-12));
  CHECK(rm.evaluated_pixels == rp.evaluated_pixels);
  CHECK(rm.density == Catch::Approx(rp.density).epsilon(1e-12));
}

TEST_CASE("dense and sparse evaluation agree where both are defined") {
  std::mt19937 rng(13);
  std::uniform_real_distribution<double> depth(1.0, 50.0);

  gd::DenseDepthMap dense(9, 7);
  gd::SparseDepthMap gt(9, 7);
  for (int v = 0; v < 7; ++v)
    for (int u = 0; u < 9; ++u) {
      dense.at(u, v) = depth(rng);
      if ((u + v) % 3 == 0) gt.set(u, v, depth(rng));
    }
  gd::SparseDepthMap sparse(9, 7);
  gt.for_each([&](int u, int v, double, std::int32_t) {
    sparse.set(u, v, dense.at(u, v));
  });

  const auto rd = gd::metrics(dense, gt);
  const auto rs = gd::metrics(sparse, gt);
  CHECK(rd.rmse_mm == Catch::Approx(rs.rmse_mm).epsilon(1e-12));
  CHECK(rd.mae_mm == Catch::Approx(rs.mae_mm).epsilon(1e-12));
  CHECK(rd.evaluated_pixels == rs.evaluated_pixels);
  CHECK(rd.density == Catch::Approx(1.0));
  CHECK(rs.density < 1.0);
}

TEST_CASE("scaling every depth scales the error units accordingly") {
  std::mt19937 rng(14);
  std::uniform_real_distribution<double> depth(1.0, 40.0);
  const double s = 2.5;

  gd::SparseDepthMap pred(12, 8), gt(12, 8), pred_s(12, 8), gt_s(12, 8);
  for (int v = 0; v < 8; ++v)
    for (int u = 0; u < 12; ++u) {
      if ((u * 5 + v) % 4 != 0) continue;
      const double p = depth(rng), g = depth(rng);
      pred.set(u, v, p);
      gt.set(u, v, g);
      pred_s.set(u, v, s * p);
      gt_s.set(u, v, s * g);
    }

  const auto r = gd::metrics(pred, gt);
  const auto rs = gd::metrics(pred_s, gt_s);
  CHECK(rs.rmse_mm == Catch::Approx(s * r.rmse_mm).epsilon(1e-9));
  CHECK(rs.mae_mm == Catch::Approx(s * r.mae_mm).epsilon(1e-9));
  CHECK(rs.irmse_1pkm == Catch::Approx(r.irmse_1pkm / s).epsilon(1e-9));
  CHECK(rs.imae_1pkm == Catch::Approx(r.imae_1pkm / s).epsilon(1e-9));
}

TEST_CASE("top crop removes rows from evaluation and density") {
  gd::SparseDepthMap pred(4, 4), gt(4, 4);
  pred.set(0, 0, 99.0);  // wildly wrong, sits in the cropped band
  gt.set(0, 0, 1.0);
  pred.set(1, 2, 5.0);
  gt.set(1, 2, 5.0);

  const auto full = gd::metrics(pred, gt);
  CHECK(full.rmse_mm > 1000.0);

  gd::EvalOptions opt;
  opt.crop_top = 2;
  const auto cropped = gd::metrics(pred, gt, opt);
  CHECK(cropped.rmse_mm == Catch::Approx(0.0).margin(1e-12));
  CHECK(cropped.evaluated_pixels == 1);
  CHECK(cropped.density == Catch::Approx(1.0 / 8.0).epsilon(1e-12));
}

TEST_CASE("metric input validation") {
  gd::SparseDepthMap a(4, 4), b(5, 4);
  a.set(0, 0, 1.0);
  b.set(0, 0, 1.0);
  CHECK_THROWS_AS(gd::metrics(a, b), gd::InputError);

  gd::SparseDepthMap pred(4, 4), gt(4, 4);
  pred.set(0, 0, 1.0);
  gt.set(3, 3, 1.0);  // disjoint: nothing to evaluate
  CHECK_THROWS_AS(gd::metrics(pred, gt), gd::InputError);

  gd::MetricAccumulator acc;
  CHECK_THROWS_AS(acc.add(0.0, 1.0), gd::InputError);
  CHECK_THROWS_AS(acc.add(1.0, -2.0), gd::InputError);
  CHECK_THROWS_AS(acc.report(), gd::InputError);
}

namespace {

// 64-line scan: one point per line, elevation increasing with line index.
gd::LidarScan ringed_scan(int lines) {
  gd::LidarScan scan;
  scan.num_lines = lines;
  for (int l = 0; l < lines; ++l) {
    const double el = (-20.0 + 25.0 * l / (lines - 1)) * M_PI / 180.0;
    scan.points.push_back(gd::from_spherical(
        gd::SphericalPoint{10.0, 0.02 * l, el, false}));
    scan.line_index.push_back(l);
  }
  return scan;
}

}  // namespace

TEST_CASE("sparsify keeps every stride-th line and renumbers densely") {
  const auto scan = ringed_scan(64);
  const auto s16 = gd::sparsify(scan, 16);

  REQUIRE(s16.points.size() == 16);
  CHECK(s16.num_lines == 16);
  for (int k = 0; k < 16; ++k) {
    CHECK(s16.line_index[k] == k);
    // Line 4k of the source survives.
    CHECK((s16.points[k] - scan.points[4 * k]).norm() == 0.0);
  }

  const auto phase1 = gd::sparsify(scan, 16, 64, 1);
  for (int k = 0; k < 16; ++k) CHECK((phase1.points[k] - scan.points[4 * k + 1]).norm() == 0.0);
}

TEST_CASE("repeated decimation composes") {
  const auto scan = ringed_scan(64);
  const auto direct = gd::sparsify(scan, 16);
  const auto staged = gd::sparsify(gd::sparsify(scan, 32), 16);
  REQUIRE(direct.points.size() == staged.points.size());
  for (std::size_t i = 0; i < direct.points.size(); ++i) {
    CHECK((direct.points[i] - staged.points[i]).norm() == 0.0);
    CHECK(direct.line_index[i] == staged.line_index[i]);
  }
}

TEST_CASE("sparsify validates its arithmetic") {
  const auto scan = ringed_scan(64);
  CHECK_THROWS_AS(gd::sparsify(scan, 10), gd::ConfigError);   // 64 % 10 != 0
  CHECK_THROWS_AS(gd::sparsify(scan, 0), gd::ConfigError);
  CHECK_THROWS_AS(gd::sparsify(scan, 16, 64, 4), gd::ConfigError);  // phase >= stride
  CHECK_THROWS_AS(gd::sparsify(scan, 16, 64, -1), gd::ConfigError);
}

TEST_CASE("scans without ring indices fall back to elevation bins") {
  auto scan = ringed_scan(64);
  scan.line_index.clear();
  scan.num_lines = 0;

  // Explicit pseudo-line assignment and the sparsify fallback must agree.
  const auto withlines = gd::assign_pseudo_lines(scan, 64);
  REQUIRE(withlines.num_lines == 64);
  const auto a = gd::sparsify(scan, 16, 64);
  const auto b = gd::sparsify(withlines, 16);
  REQUIRE(a.points.size() == b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) CHECK((a.points[i] - b.points[i]).norm() == 0.0);

  // Binning is monotone in elevation and spans [0, L-1].
  CHECK(withlines.line_index.front() == 0);
  CHECK(withlines.line_index.back() == 63);
  for (std::size_t i = 1; i < withlines.line_index.size(); ++i) {
    CHECK(withlines.line_index[i] >= withlines.line_index[i - 1]);
  }
}

TEST_CASE("nearest-seed statistics on an enumerable grid") {
  // Single seed at the corner of an 8x8 image: L1 distance is u + v.
  gd::SparseDepthMap sparse(8, 8);
  sparse.set(0, 0, 5.0);
  gd::SparseDepthMap gt(8, 8);
  gt.set(0, 0, 4.0);   // distance 0
  gt.set(2, 1, 6.0);   // distance 3
  gt.set(3, 0, 4.5);   // distance 3
  gt.set(7, 7, 9.0);   // distance 14

  const auto st = gd::nearest_stats(sparse, gt, 30);
  REQUIRE(st.raw.size() == 31);

  double total = 0.0;
  for (const auto& row : st.raw) total += row.fraction;
  CHECK(total == Catch::Approx(1.0).epsilon(1e-12));

  // Count pixels with u + v == d by hand: d + 1 of them for d < 8.
  CHECK(st.raw[0].fraction == Catch::Approx(1.0 / 64.0));
  CHECK(st.raw[3].fraction == Catch::Approx(4.0 / 64.0));
  CHECK(st.raw[14].fraction == Catch::Approx(1.0 / 64.0));

  CHECK(st.raw[0].gt_pixels == 1);
  CHECK(st.raw[0].mae_mm == Catch::Approx(1000.0));  // |5 - 4| m
  CHECK(st.raw[3].gt_pixels == 2);
  CHECK(st.raw[3].mae_mm == Catch::Approx((1000.0 + 500.0) / 2.0));
  CHECK(st.raw[14].mae_mm == Catch::Approx(4000.0));

  // Truth-seeded variant: the seed takes its own truth value, so the bin-0
  // error vanishes and every other bin measures pure extrapolation.
  CHECK(st.gt_seeded[0].mae_mm == Catch::Approx(0.0).margin(1e-12));
  CHECK(st.gt_seeded[3].mae_mm == Catch::Approx((2000.0 + 500.0) / 2.0));
  CHECK(st.gt_seeded[14].mae_mm == Catch::Approx(5000.0));
}

TEST_CASE("nearest-seed statistics overflow row absorbs far pixels") {
  gd::SparseDepthMap sparse(16, 1);
  sparse.set(0, 0, 3.0);
  gd::SparseDepthMap gt(16, 1);
  gt.set(0, 0, 3.0);
  gt.set(15, 0, 3.0);

  const auto st = gd::nearest_stats(sparse, gt, 4);
  REQUIRE(st.raw.size() == 5);
  double total = 0.0;
  for (const auto& row : st.raw) total += row.fraction;
  CHECK(total == Catch::Approx(1.0).epsilon(1e-12));
  // Distances 4..15 land in the overflow row.
  CHECK(st.raw[4].fraction == Catch::Approx(12.0 / 16.0));
  CHECK(st.raw[4].gt_pixels == 1);
}

TEST_CASE("nearest-seed statistics input validation") {
  gd::SparseDepthMap sparse(4, 4), gt(4, 4);
  CHECK_THROWS_AS(gd::nearest_stats(sparse, gt), gd::InputError);  // no seeds
  sparse.set(1, 1, 2.0);
  gt.set(3, 3, 2.0);
  // Seed does not overlap truth: the truth-seeded variant has no seeds.
  CHECK_THROWS_AS(gd::nearest_stats(sparse, gt), gd::InputError);
  gt.set(1, 1, 2.5);
  CHECK_NOTHROW(gd::nearest_stats(sparse, gt));
  CHECK_THROWS_AS(gd::nearest_stats(sparse, gt, 0), gd::ConfigError);

  gd::SparseDepthMap wrong(5, 4);
  CHECK_THROWS_AS(gd::nearest_stats(sparse, wrong), gd::InputError);
}
