#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "gsnav/error.hpp"
#include "gsnav/kdtree.hpp"
#include "gsnav/math.hpp"
#include "gsnav/scene.hpp"

namespace gsnav::collide {

using scene::Ellipsoid;
using scene::Scene;

/// Spherical robot body of radius kappa (> 0 for a real vehicle; 0 collapses
/// the test to point-vs-ellipsoid membership).
struct SphereBody {
  double radius = 0.0;
};

struct Segment {
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();
  Vec3 delta() const { return b - a; }
};

/// Outcome of one intersection test.  The two bodies are disjoint exactly when
/// k_star > 1; k_star is a certified lower bound on the true maximum of the
/// test function, so "disjoint" verdicts are never false and extra iterations
/// can only raise k_star (never flip disjoint back to collision).
struct IntersectionResult {
  bool disjoint = false;
  double k_star = 0.0;  // K evaluated at (s_star, t_star)
  double s_star = 0.5;  // best blending parameter found in (0, 1)
  double t_star = 0.0;  // segment parameter of the worst robot position
};

/// One evaluation of the concave test function: value, slope in s, and the
/// minimizing segment parameter at this s (0 for stationary tests).
struct KEval {
  double k = 0.0;
  double dkds = 0.0;
  double t = 0.0;
};

namespace detail {

// Both the sphere-vs-ellipsoid and the general-pair test reduce, in the right
// basis, to K(s) = sum_i u_i^2 * s(1-s) / (a_i + b_i s) with positive
// denominators on (0, 1).  K is concave there, vanishing at both ends.
inline double k_term(double u2, double a, double b, double s) {
  return u2 * s * (1.0 - s) / (a + b * s);
}
inline double k_slope_term(double u2, double a, double b, double s) {
  const double den = a + b * s;
  return u2 * (a * (1.0 - 2.0 * s) - b * s * s) / (den * den);
}

}  // namespace detail

/// Evaluate the sphere-vs-ellipsoid test function and its s-derivative for a
/// fixed center displacement `delta` (robot center minus ellipsoid mean).
/// Denominator convention: the obstacle occupies the 1/(1-s) slot and the
/// robot sphere the 1/s slot, giving kappa^2 + s*(lambda_i^2 - kappa^2).
inline KEval k_of_s(const Ellipsoid& e, const SphereBody& body, const Vec3& delta,
                    double s) {
  if (!(s > 0.0 && s < 1.0))
    fail(ErrorCode::kDomain, "k_of_s: s must lie in (0, 1)");
  if (body.radius <= 0.0) fail(ErrorCode::kDomain, "k_of_s: body radius must be positive");
  const double k2 = body.radius * body.radius;
  const Vec3 w = e.rot.transpose() * delta;
  KEval out;
  for (int i = 0; i < 3; ++i) {
    const double lam2 = e.semi_axes[i] * e.semi_axes[i];
    out.k += detail::k_term(w[i] * w[i], k2, lam2 - k2, s);
    out.dkds += detail::k_slope_term(w[i] * w[i], k2, lam2 - k2, s);
  }
  return out;
}

/// Maximize a concave closure over s in (0, 1) by gradient-sign bisection.
/// Runs iters+1 midpoint evaluations, so the returned point satisfies
/// |s_hat - s*| <= 1/2^(iters+1).  A midpoint with exactly zero slope is the
/// global maximizer of the concave closure and is returned immediately.
/// Returned k/t are the closure outputs at s_hat; `best` additionally carries
/// the highest K seen across all evaluated midpoints, which is monotone in the
/// iteration budget (budgets evaluate nested midpoint prefixes).
struct BisectionResult {
  double s_hat = 0.5;
  KEval at_s_hat;
  double s_best = 0.5;
  KEval best;
};

template <class Closure>
BisectionResult bisection_max(Closure&& k_closure, int iters) {
  if (iters < 1) fail(ErrorCode::kDomain, "bisection_max: need at least one iteration");
  double lo = 0.0, hi = 1.0;
  BisectionResult out;
  bool have_best = false;
  for (int i = 0; i <= iters; ++i) {
    const double mid = 0.5 * (lo + hi);
    const KEval ev = k_closure(mid);
    out.s_hat = mid;
    out.at_s_hat = ev;
    if (!have_best || ev.k > out.best.k) {
      have_best = true;
      out.best = ev;
      out.s_best = mid;
    }
    if (ev.dkds == 0.0) break;  // exact stationary point of a concave function
    (ev.dkds > 0.0 ? lo : hi) = mid;
  }
  return out;
}

namespace detail {

// Segment test in the obstacle's eigenframe.  For each midpoint s the inner
// minimization over the segment parameter is the clamped vertex of a convex
// quadratic; the outer slope uses the envelope theorem (the dt*/ds term
// vanishes both at interior minima and on clamped faces).
struct SegmentKernel {
  Vec3 w0;     // segment start minus mean, obstacle frame
  Vec3 wd;     // segment direction, obstacle frame
  Vec3 a;      // per-axis kappa^2
  Vec3 b;      // per-axis lambda_i^2 - kappa^2

  KEval operator()(double s) const {
    Vec3 d;  // diagonal of the blended inverse metric
    for (int i = 0; i < 3; ++i) d[i] = s * (1.0 - s) / (a[i] + b[i] * s);
    const double quad = wd.dot(d.asDiagonal() * wd);
    double t = 0.0;
    if (quad > 0.0) t = clamp01(-w0.dot(d.asDiagonal() * wd) / quad);
    const Vec3 w = w0 + t * wd;
    KEval ev;
    ev.t = t;
    for (int i = 0; i < 3; ++i) {
      ev.k += k_term(w[i] * w[i], a[i], b[i], s);
      ev.dkds += k_slope_term(w[i] * w[i], a[i], b[i], s);
    }
    return ev;
  }
};

inline SegmentKernel make_segment_kernel(const Ellipsoid& e, const SphereBody& body,
                                         const Segment& seg) {
  SegmentKernel k;
  k.w0 = e.rot.transpose() * (seg.a - e.mu);
  k.wd = e.rot.transpose() * seg.delta();
  const double k2 = body.radius * body.radius;
  for (int i = 0; i < 3; ++i) {
    k.a[i] = k2;
    k.b[i] = e.semi_axes[i] * e.semi_axes[i] - k2;
  }
  return k;
}

inline IntersectionResult package(const BisectionResult& b) {
  IntersectionResult r;
  r.k_star = b.best.k;
  r.s_star = b.s_best;
  r.t_star = b.best.t;
  r.disjoint = r.k_star > 1.0;
  return r;
}

}  // namespace detail

/// Exact conservative test between a spherical robot sweeping a segment and
/// one ellipsoid.  Zero-length segments give the stationary sphere test.
inline IntersectionResult test_sphere_segment(const Ellipsoid& e,
                                              const SphereBody& body,
                                              const Segment& seg, int iters = 10) {
  if (body.radius <= 0.0)
    fail(ErrorCode::kDomain, "test_sphere_segment: body radius must be positive");
  return detail::package(
      bisection_max(detail::make_segment_kernel(e, body, seg), iters));
}

/// Batched form: one result per obstacle, bitwise identical to calling the
/// scalar test per element (shared segment precomputation only).
inline std::vector<IntersectionResult> test_sphere_segment_batch(
    const std::vector<Ellipsoid>& obstacles, const SphereBody& body,
    const Segment& seg, int iters = 10) {
  std::vector<IntersectionResult> out;
  out.reserve(obstacles.size());
  for (const Ellipsoid& e : obstacles)
    out.push_back(test_sphere_segment(e, body, seg, iters));
  return out;
}

/// General ellipsoid-vs-ellipsoid test via the generalized eigenvalue
/// reduction: with shapes Ma, Mb, Cholesky Mb = L L^T and the eigensystem of
/// L^{-1} Ma L^{-T} diagonalize the blended metric, so K(s) again has the
/// rational one-dimensional form (a_i = 1, b_i = lambda_i - 1).
inline IntersectionResult test_ellipsoid_pair(const Ellipsoid& ea,
                                              const Ellipsoid& eb, int iters = 10) {
  const Mat3 ma = ea.shape();
  const Mat3 mb = eb.shape();
  const Eigen::LLT<Mat3> llt(mb);
  if (llt.info() != Eigen::Success)
    fail(ErrorCode::kDomain, "test_ellipsoid_pair: shape matrix not SPD");
  const Mat3 linv_ma =
      llt.matrixL().solve(ma);  // L^{-1} Ma
  Mat3 c = llt.matrixL().solve(linv_ma.transpose()).transpose();  // L^{-1} Ma L^{-T}
  c = 0.5 * (c + c.transpose());
  const Eigen::SelfAdjointEigenSolver<Mat3> eig(c);
  if (eig.info() != Eigen::Success)
    fail(ErrorCode::kInternal, "test_ellipsoid_pair: eigensolver failed");
  // phi^T Mb phi = I with phi = L^{-T} V; weights are components of
  // phi^T delta.
  const Mat3 phi_t = eig.eigenvectors().transpose() *
                     Mat3(llt.matrixL().solve(Mat3::Identity()));
  const Vec3 u = phi_t * (eb.mu - ea.mu);
  const Vec3 lam = eig.eigenvalues();
  auto closure = [&](double s) {
    KEval ev;
    for (int i = 0; i < 3; ++i) {
      ev.k += detail::k_term(u[i] * u[i], 1.0, lam[i] - 1.0, s);
      ev.dkds += detail::k_slope_term(u[i] * u[i], 1.0, lam[i] - 1.0, s);
    }
    return ev;
  };
  return detail::package(bisection_max(closure, iters));
}

inline std::vector<IntersectionResult> test_ellipsoid_pair_batch(
    const std::vector<Ellipsoid>& as, const Ellipsoid& eb, int iters = 10) {
  std::vector<IntersectionResult> out;
  out.reserve(as.size());
  for (const Ellipsoid& ea : as) out.push_back(test_ellipsoid_pair(ea, eb, iters));
  return out;
}

/// Spatial index over ellipsoid means plus the per-ellipsoid loosest radius,
/// shared by the minimal-collision-set query and clearance oracles.
struct SceneIndex {
  spatial::KdTree tree;
  std::vector<double> max_axis;
  double global_max_axis = 0.0;

  explicit SceneIndex(const Scene& s) {
    std::vector<Vec3> mus;
    mus.reserve(s.ellipsoids.size());
    max_axis.reserve(s.ellipsoids.size());
    for (const Ellipsoid& e : s.ellipsoids) {
      mus.push_back(e.mu);
      max_axis.push_back(e.max_semi_axis());
      global_max_axis = std::max(global_max_axis, max_axis.back());
    }
    tree = spatial::KdTree(std::move(mus));
  }
};

/// Smallest set of ellipsoid indices that can possibly collide with the body
/// placed at x: fixed-point ball query whose radius shrinks with the largest
/// semi-axis still inside.  The returned set is a superset of every ellipsoid
/// whose center lies within its own semi-axis plus kappa of x, so no true
/// collision candidate is ever dropped.
inline std::vector<int> minimal_collision_set(const SceneIndex& index,
                                              const SphereBody& body,
                                              const Vec3& x) {
  auto largest = [&](const std::vector<int>& ids) {
    double m = 0.0;
    for (int i : ids) m = std::max(m, index.max_axis[static_cast<std::size_t>(i)]);
    return m;
  };
  std::vector<int> ids =
      index.tree.radius_query(x, index.global_max_axis + body.radius);
  if (ids.empty()) return ids;
  double lam = largest(ids);
  for (;;) {
    std::vector<int> next = index.tree.radius_query(x, lam + body.radius);
    if (next.empty()) return next;
    const double nlam = largest(next);
    if (nlam < lam) {
      ids = std::move(next);
      lam = nlam;
      continue;
    }
    return next;
  }
}

/// Minimum-volume enclosing ellipsoid of a point cloud by Khachiyan's
/// first-order weight update on the lifted moment matrix.  Stops when the
/// lifted support value is within (1+tol) of optimal, so every input point
/// satisfies the returned quadratic within the same slack.
inline Ellipsoid min_volume_ellipsoid(const std::vector<Vec3>& points,
                                      double tol = 1e-6, int max_iters = 200000) {
  const int n = static_cast<int>(points.size());
  if (n < 4)
    fail(ErrorCode::kDomain, "min_volume_ellipsoid: need at least 4 points");
  Eigen::Matrix<double, 4, Eigen::Dynamic> q(4, n);
  for (int i = 0; i < n; ++i) q.col(i) << points[static_cast<std::size_t>(i)], 1.0;
  VecX u = VecX::Constant(n, 1.0 / n);
  const double d = 3.0;
  for (int it = 0; it < max_iters; ++it) {
    const Eigen::Matrix4d m = q * u.asDiagonal() * q.transpose();
    const Eigen::FullPivLU<Eigen::Matrix4d> lu(m);
    if (!lu.isInvertible())
      fail(ErrorCode::kDomain, "min_volume_ellipsoid: degenerate point set");
    const Eigen::Matrix4d minv = lu.inverse();
    int add = 0, drop = -1;
    double mmax = -1.0;
    double mmin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      const double mi = q.col(i).dot(minv * q.col(i));
      if (mi > mmax) {
        mmax = mi;
        add = i;
      }
      if (u[i] > 0.0 && mi < mmin) {
        mmin = mi;
        drop = i;
      }
    }
    if (mmax - (d + 1.0) <= tol) break;
    // Pair the classic add step with an away step on the slackest support
    // point (whichever side violates optimality more), both with exact line
    // search on log det.  Add-only updates decay like 1/t; the away step makes
    // the gap shrink geometrically, so tight tolerances stay cheap.
    if (drop < 0 || mmax - (d + 1.0) >= (d + 1.0) - mmin) {
      const double step = (mmax - d - 1.0) / ((d + 1.0) * (mmax - 1.0));
      u *= (1.0 - step);
      u[add] += step;
    } else {
      double step = u[drop] / (1.0 - u[drop]);  // removes the weight entirely
      if (mmin > 1.0 + 1e-12)
        step = std::min(step, (d + 1.0 - mmin) / ((d + 1.0) * (mmin - 1.0)));
      u *= (1.0 + step);
      u[drop] = std::max(u[drop] - step, 0.0);
    }
  }
  Vec3 c = Vec3::Zero();
  for (int i = 0; i < n; ++i) c += u[i] * points[static_cast<std::size_t>(i)];
  Mat3 scatter = Mat3::Zero();
  for (int i = 0; i < n; ++i) {
    const Vec3& p = points[static_cast<std::size_t>(i)];
    scatter += u[i] * p * p.transpose();
  }
  const Mat3 cov = scatter - c * c.transpose();
  const Eigen::FullPivLU<Mat3> lu(cov);
  if (!lu.isInvertible())
    fail(ErrorCode::kDomain, "min_volume_ellipsoid: degenerate point set");
  const Mat3 a = lu.inverse() / d;  // (x-c)^T a (x-c) <= 1
  const Eigen::SelfAdjointEigenSolver<Mat3> eig(0.5 * (a + a.transpose()));
  Ellipsoid e;
  e.mu = c;
  Mat3 v = eig.eigenvectors();
  if (v.determinant() < 0.0) v.col(2) *= -1.0;
  e.rot = v;
  for (int i = 0; i < 3; ++i)
    e.semi_axes[i] = 1.0 / std::sqrt(std::max(eig.eigenvalues()[i], 1e-300));
  return e;
}

}  // namespace gsnav::collide
