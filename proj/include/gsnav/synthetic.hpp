#pragma once

// Deterministic synthetic scenes for demos, benchmarks, and stress tests.
// Everything is driven by the keyed counter generator, so a fixture is fully
// determined by its parameters and seed.

#include <cmath>
#include <cstdint>
#include <vector>

#include "gsnav/math.hpp"
#include "gsnav/rng.hpp"
#include "gsnav/scene.hpp"

namespace gsnav::synthetic {

/// Unit quaternion (w, x, y, z) uniform on SO(3): four normals, normalized.
inline Vec4 random_quat(rng::CounterRng& rng) {
  Vec4 q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  const double n = q.norm();
  if (n < 1e-12) return Vec4(1.0, 0.0, 0.0, 0.0);
  return q / n;
}

/// Random ellipsoid: center uniform in [center_lo, center_hi]^3, semi-axes
/// log-uniform in [axis_lo, axis_hi], orientation uniform on SO(3).
inline scene::Ellipsoid random_ellipsoid(rng::CounterRng& rng,
                                         double center_lo, double center_hi,
                                         double axis_lo, double axis_hi) {
  scene::Ellipsoid e;
  e.mu = Vec3(rng.uniform(center_lo, center_hi),
              rng.uniform(center_lo, center_hi),
              rng.uniform(center_lo, center_hi));
  const double la = std::log(axis_lo), lb = std::log(axis_hi);
  for (int d = 0; d < 3; ++d)
    e.semi_axes[d] = std::exp(rng.uniform(la, lb));
  e.rot = quat_to_rot(random_quat(rng));
  return e;
}

/// Scene assembled directly from ellipsoids, with bounds recomputed.
inline scene::Scene scene_from_ellipsoids(std::vector<scene::Ellipsoid> es,
                                          double gamma = 0.2) {
  scene::Scene s;
  s.ellipsoids = std::move(es);
  s.gamma = gamma;
  s.source_count = static_cast<int>(s.ellipsoids.size());
  scene::recompute_bounds(s);
  return s;
}

/// Cluttered-cylinder fixture: a dense core of random ellipsoids filling a
/// squat cylinder centered on the z-axis.  Everything outside the cylinder is
/// free by construction, so start/goal pairs placed on a wide surrounding
/// circle always admit a route around (or over) the clutter.
struct ClutterParams {
  int count = 10000;
  double core_radius = 8.0;
  double height = 6.0;      ///< clutter occupies z in [0, height]
  double axis_min = 0.02;   ///< ellipsoid semi-axes after confidence scaling
  double axis_max = 0.12;
  double gamma = 0.2;       ///< enclosed confidence mass the records are sized for
  std::uint64_t seed = 20240001ULL;
};

/// Raw splat records for the clutter fixture.  Scales are chosen so that
/// converting with the same gamma yields semi-axes in [axis_min, axis_max].
inline std::vector<scene::GaussianRecord> clutter_records(
    const ClutterParams& p) {
  const double conf = std::sqrt(scene::chi2_quantile3(p.gamma));
  const double la = std::log(p.axis_min), lb = std::log(p.axis_max);
  rng::CounterRng rng(p.seed, "clutter");
  std::vector<scene::GaussianRecord> records;
  records.reserve(static_cast<std::size_t>(p.count));
  for (int i = 0; i < p.count; ++i) {
    scene::GaussianRecord r;
    const double rad = p.core_radius * std::sqrt(rng.uniform());
    const double ang = 2.0 * M_PI * rng.uniform();
    r.mu = Vec3(rad * std::cos(ang), rad * std::sin(ang),
                p.height * rng.uniform());
    for (int d = 0; d < 3; ++d)
      r.log_scale[d] = rng.uniform(la, lb) - std::log(conf);
    r.rot_wxyz = random_quat(rng);
    r.opacity_logit = rng.uniform(1.0, 4.0);  // opacity 0.73..0.98, all kept
    r.color_dc = Vec3(rng.uniform(), rng.uniform(), rng.uniform());
    r.has_color = true;
    records.push_back(r);
  }
  return records;
}

/// The clutter fixture converted straight to a scene.
inline scene::Scene clutter_scene(const ClutterParams& p) {
  scene::ToSceneOptions opts;
  opts.gamma = p.gamma;
  return scene::to_scene(clutter_records(p), opts);
}

}  // namespace gsnav::synthetic
