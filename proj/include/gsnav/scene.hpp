#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "gsnav/error.hpp"
#include "gsnav/math.hpp"

namespace gsnav::scene {

/// One raw splat as stored on disk: activations not yet applied.
struct GaussianRecord {
  Vec3 mu = Vec3::Zero();
  Vec3 log_scale = Vec3::Zero();   // exp() gives the axis scales
  Vec4 rot_wxyz = Vec4(1, 0, 0, 0);  // unnormalized quaternion
  double opacity_logit = 0.0;        // sigmoid() gives opacity
  Vec3 color_dc = Vec3::Zero();      // optional degree-0 color coefficients
  bool has_color = false;
};

/// Rigid ellipsoid {x : (x-mu)^T M^{-1} (x-mu) <= 1} with
/// M = rot * diag(semi_axes^2) * rot^T.
struct Ellipsoid {
  Vec3 mu = Vec3::Zero();
  Mat3 rot = Mat3::Identity();
  Vec3 semi_axes = Vec3::Ones();

  Mat3 shape() const {
    return rot * semi_axes.array().square().matrix().asDiagonal() * rot.transpose();
  }
  Mat3 shape_inv() const {
    return rot * semi_axes.array().square().inverse().matrix().asDiagonal() *
           rot.transpose();
  }
  /// Half-extents of the tight axis-aligned bounding box: sqrt(diag(shape)).
  Vec3 aabb_half() const {
    Vec3 h;
    const Mat3 m = shape();
    for (int i = 0; i < 3; ++i) h[i] = std::sqrt(std::max(m(i, i), 0.0));
    return h;
  }
  double max_semi_axis() const { return semi_axes.maxCoeff(); }

  /// Squared Mahalanobis distance of a point under this ellipsoid's metric.
  double mahalanobis2(const Vec3& x) const {
    const Vec3 d = rot.transpose() * (x - mu);
    return (d.array() / semi_axes.array()).square().sum();
  }
};

struct Scene {
  std::vector<Ellipsoid> ellipsoids;
  Vec3 bounds_min = Vec3::Zero();
  Vec3 bounds_max = Vec3::Zero();
  double gamma = 0.0;       // confidence mass each ellipsoid encloses
  int source_count = 0;     // raw records the scene was built from
  std::vector<int> rejected;  // indices of records dropped as malformed
};

/// Refresh bounds_min/bounds_max to the union of the ellipsoid AABBs
/// (zeros for an empty scene).  Call after assembling ellipsoids by hand.
inline void recompute_bounds(Scene& s) {
  s.bounds_min = Vec3::Constant(std::numeric_limits<double>::infinity());
  s.bounds_max = -s.bounds_min;
  for (const Ellipsoid& e : s.ellipsoids) {
    const Vec3 h = e.aabb_half();
    s.bounds_min = s.bounds_min.cwiseMin(e.mu - h);
    s.bounds_max = s.bounds_max.cwiseMax(e.mu + h);
  }
  if (s.ellipsoids.empty()) s.bounds_min = s.bounds_max = Vec3::Zero();
}

/// CDF of the chi-squared distribution with 3 degrees of freedom,
/// F(x) = erf(sqrt(x/2)) - sqrt(2 x / pi) * exp(-x/2).
inline double chi2_cdf3(double x) {
  if (x <= 0.0) return 0.0;
  return std::erf(std::sqrt(0.5 * x)) -
         std::sqrt(2.0 * x / M_PI) * std::exp(-0.5 * x);
}

/// Quantile of chi-squared(3): smallest x with F(x) >= gamma, to 1e-10 in x.
/// gamma must lie in [0, 1); gamma = 0 returns 0.
inline double chi2_quantile3(double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0))
    fail(ErrorCode::kDomain,
         "chi2_quantile3: gamma must be in [0, 1), got " + std::to_string(gamma));
  if (gamma == 0.0) return 0.0;
  double lo = 0.0, hi = 1.0;
  while (chi2_cdf3(hi) < gamma) hi *= 2.0;
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    (chi2_cdf3(mid) < gamma ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct ToSceneOptions {
  double gamma = 0.2;          // confidence mass enclosed per ellipsoid
  double opacity_min = 0.1;    // records below this opacity are dropped
  bool linear_scales = false;  // scales/opacity stored without activations
};

/// Convert raw records to confidence ellipsoids: drop transparent splats, apply
/// exp/sigmoid activations (unless linear_scales), and scale axes by the
/// chi-squared(3) quantile so each ellipsoid encloses `gamma` probability mass.
/// Records with non-finite scales or a zero-norm quaternion are rejected and
/// their indices recorded; filtering everything out is an error.
inline Scene to_scene(const std::vector<GaussianRecord>& records,
                      const ToSceneOptions& opt = {}) {
  if (!(opt.gamma > 0.0 && opt.gamma < 1.0))
    fail(ErrorCode::kDomain,
         "to_scene: gamma must be in (0, 1), got " + std::to_string(opt.gamma));
  const double axis_gain = std::sqrt(chi2_quantile3(opt.gamma));
  Scene s;
  s.gamma = opt.gamma;
  s.source_count = static_cast<int>(records.size());
  s.ellipsoids.reserve(records.size());
  for (int idx = 0; idx < static_cast<int>(records.size()); ++idx) {
    const GaussianRecord& r = records[idx];
    Vec3 semi;
    bool finite = r.mu.allFinite() && std::isfinite(r.opacity_logit);
    for (int i = 0; i < 3; ++i) {
      const double scale =
          opt.linear_scales ? r.log_scale[i] : std::exp(r.log_scale[i]);
      semi[i] = axis_gain * scale;
      if (!std::isfinite(scale) || scale <= 0.0) finite = false;
    }
    if (!finite || r.rot_wxyz.norm() < 1e-12) {
      s.rejected.push_back(idx);
      continue;
    }
    const double opacity =
        opt.linear_scales ? r.opacity_logit : sigmoid(r.opacity_logit);
    if (opacity < opt.opacity_min) continue;
    Ellipsoid e;
    e.mu = r.mu;
    e.rot = quat_to_rot(r.rot_wxyz);
    e.semi_axes = semi;
    s.ellipsoids.push_back(e);
  }
  if (s.ellipsoids.empty()) {
    std::string detail = "to_scene: all " + std::to_string(records.size()) +
                         " records filtered out (empty scene)";
    if (!s.rejected.empty()) {
      detail += "; rejected record indices:";
      for (int idx : s.rejected) detail += " " + std::to_string(idx);
    }
    fail(ErrorCode::kDomain, detail);
  }
  recompute_bounds(s);
  return s;
}

}  // namespace gsnav::scene
