// SPDX-License-Identifier: Apache-2.0

#ifndef GEODEPTH_DISTANCE_TRANSFORM_HPP
#define GEODEPTH_DISTANCE_TRANSFORM_HPP

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "geodepth/error.hpp"
#include "geodepth/geometry.hpp"
#include "geodepth/image.hpp"
#include "geodepth/normals.hpp"

namespace geodepth {

enum class DistanceMetric { kEuclidean, kL1 };

/// Per-pixel handle to the nearest seed of a sparse map: the seed's pixel,
/// the metric distance to it, and the seed's payload (depth, and normal when
/// one was attached). Ties are broken toward the smaller seed row, then the
/// smaller seed column, so the field is a pure function of the seed set.
struct NearestField {
  DistanceMetric metric = DistanceMetric::kEuclidean;
  Image<std::int32_t> seed_u;
  Image<std::int32_t> seed_v;
  Image<double> distance;
  Image<double> seed_depth;
  Image<Eigen::Vector3d> seed_normal;
  Image<std::uint8_t> seed_has_normal;

  int width() const { return seed_u.width(); }
  int height() const { return seed_u.height(); }

  int offset_u(int u, int v) const { return seed_u.at(u, v) - u; }
  int offset_v(int u, int v) const { return seed_v.at(u, v) - v; }
};

namespace detail {

constexpr std::int64_t kFarCost = std::numeric_limits<std::int64_t>::max() / 4;

// Pass 1, shared by both metrics: for every pixel, the nearest occupied
// column within its own row (ties toward the smaller column), or -1.
inline void row_champions(const SparseDepthMap& sparse, Image<std::int32_t>* out) {
  const int w = sparse.width(), h = sparse.height();
  for (int v = 0; v < h; ++v) {
    std::int32_t* row = out->row(v);
    int last = -1;
    for (int u = 0; u < w; ++u) {
      if (sparse.has(u, v)) last = u;
      row[u] = last;
    }
    int next = -1;
    for (int u = w - 1; u >= 0; --u) {
      if (sparse.has(u, v)) next = u;
      if (next < 0) continue;
      // Strict: on equal distance the left (smaller) column stands.
      if (row[u] < 0 || next - u < u - row[u]) row[u] = next;
    }
  }
}

// Lower envelope of the parabolas y(v) = f[q] + (v - q)^2 over one column.
// Boundary abscissas are kept as exact rationals num/den (den > 0), so the
// tie toward the smaller row is never lost to rounding.
struct Envelope {
  std::vector<int> vertex;
  std::vector<std::int64_t> num;
  std::vector<std::int64_t> den;
};

inline void column_envelope(const std::vector<std::int64_t>& f, int h,
                            Envelope* env, std::vector<int>* assign) {
  auto& vtx = env->vertex;
  auto& num = env->num;
  auto& den = env->den;
  vtx.clear();
  num.assign(1, 0);
  den.assign(1, 0);  // sentinel; boundary 0 unused

  const auto intersect = [&](int p, int q, std::int64_t* n, std::int64_t* d) {
    // abscissa where parabola q catches parabola p (p < q)
    *n = (f[q] + static_cast<std::int64_t>(q) * q) -
         (f[p] + static_cast<std::int64_t>(p) * p);
    *d = 2 * static_cast<std::int64_t>(q - p);
  };

  for (int q = 0; q < h; ++q) {
    if (f[q] >= kFarCost) continue;
    if (vtx.empty()) {
      vtx.push_back(q);
      continue;
    }
    std::int64_t n = 0, d = 1;
    intersect(vtx.back(), q, &n, &d);
    // Pop while the new boundary does not lie strictly right of the last:
    // n/d <= num.back()/den.back().
    while (!vtx.empty()) {
      if (vtx.size() == 1) break;
      if (n * den.back() > num.back() * d) break;
      vtx.pop_back();
      num.pop_back();
      den.pop_back();
      intersect(vtx.back(), q, &n, &d);
    }
    vtx.push_back(q);
    num.push_back(n);
    den.push_back(d);
  }

  assign->resize(h);
  int k = 0;
  const int m = static_cast<int>(vtx.size());
  for (int v = 0; v < h; ++v) {
    // Advance while the right boundary of segment k lies strictly left of v;
    // a pixel exactly on a boundary stays with the left (smaller) vertex.
    while (k + 1 < m && num[k + 1] < static_cast<std::int64_t>(v) * den[k + 1]) {
      ++k;
    }
    (*assign)[v] = vtx[k];
  }
}

}  // namespace detail

/// Exact nearest-seed transform of a sparse depth map. Every pixel receives
/// a handle to its nearest occupied cell under the chosen metric; seed
/// pixels map to themselves with distance zero. O(W*H) for both metrics.
inline NearestField nearest_field(const SparseDepthMap& sparse,
                                  const NormalMap* normals = nullptr,
                                  DistanceMetric metric = DistanceMetric::kEuclidean) {
  if (sparse.occupied_count() < 1) {
    throw InputError("nearest_field requires at least one occupied cell");
  }
  if (normals != nullptr && (normals->width() != sparse.width() ||
                             normals->height() != sparse.height())) {
    throw InputError("normal map size does not match the sparse map");
  }
  const int w = sparse.width(), h = sparse.height();

  NearestField out;
  out.metric = metric;
  out.seed_u = Image<std::int32_t>(w, h, -1);
  out.seed_v = Image<std::int32_t>(w, h, -1);
  out.distance = Image<double>(w, h, 0.0);
  out.seed_depth = Image<double>(w, h, 0.0);
  out.seed_normal = Image<Eigen::Vector3d>(w, h, Eigen::Vector3d::Zero());
  out.seed_has_normal = Image<std::uint8_t>(w, h, 0);

  Image<std::int32_t> champ(w, h, -1);
  detail::row_champions(sparse, &champ);

  if (metric == DistanceMetric::kEuclidean) {
    std::vector<std::int64_t> f(h);
    detail::Envelope env;
    std::vector<int> assign;
    for (int u = 0; u < w; ++u) {
      for (int v = 0; v < h; ++v) {
        const std::int32_t c = champ.at(u, v);
        const std::int64_t du = c < 0 ? 0 : c - u;
        f[v] = c < 0 ? detail::kFarCost : du * du;
      }
      detail::column_envelope(f, h, &env, &assign);
      for (int v = 0; v < h; ++v) {
        const int vs = assign[v];
        out.seed_v.at(u, v) = vs;
        out.seed_u.at(u, v) = champ.at(u, vs);
      }
    }
  } else {
    struct Carry {
      std::int64_t cost;
      std::int32_t su, sv;
    };
    std::vector<Carry> col(h);
    for (int u = 0; u < w; ++u) {
      for (int v = 0; v < h; ++v) {
        const std::int32_t c = champ.at(u, v);
        col[v] = {c < 0 ? detail::kFarCost : std::abs(c - u), c,
                  static_cast<std::int32_t>(v)};
      }
      // Downward: carried seeds have smaller rows and win ties.
      for (int v = 1; v < h; ++v) {
        if (col[v - 1].cost + 1 <= col[v].cost) {
          col[v] = {col[v - 1].cost + 1, col[v - 1].su, col[v - 1].sv};
        }
      }
      // Upward: the settled value has the smaller-or-equal row and wins ties.
      for (int v = h - 2; v >= 0; --v) {
        if (col[v + 1].cost + 1 < col[v].cost) {
          col[v] = {col[v + 1].cost + 1, col[v + 1].su, col[v + 1].sv};
        }
      }
      for (int v = 0; v < h; ++v) {
        out.seed_u.at(u, v) = col[v].su;
        out.seed_v.at(u, v) = col[v].sv;
      }
    }
  }

  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const int su = out.seed_u.at(u, v);
      const int sv = out.seed_v.at(u, v);
      const double du = su - u, dv = sv - v;
      out.distance.at(u, v) = metric == DistanceMetric::kEuclidean
                                  ? std::sqrt(du * du + dv * dv)
                                  : std::abs(du) + std::abs(dv);
      out.seed_depth.at(u, v) = sparse.depth(su, sv);
      if (normals != nullptr && normals->has(su, sv)) {
        out.seed_normal.at(u, v) = normals->at(su, sv);
        out.seed_has_normal.at(u, v) = 1;
      }
    }
  }
  return out;
}

inline NearestField nearest_field(const SparseDepthMap& sparse,
                                  DistanceMetric metric) {
  return nearest_field(sparse, nullptr, metric);
}

}  // namespace geodepth

#endif  // GEODEPTH_DISTANCE_TRANSFORM_HPP
