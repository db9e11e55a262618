#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "gsnav/collide.hpp"
#include "gsnav/corridor.hpp"
#include "gsnav/error.hpp"
#include "gsnav/json_util.hpp"
#include "gsnav/kdtree.hpp"
#include "gsnav/math.hpp"
#include "gsnav/rng.hpp"
#include "gsnav/scene.hpp"
#include "gsnav/spline.hpp"

namespace gsnav::oracle {

using collide::Segment;
using collide::SphereBody;
using corridor::Polytope;
using scene::Ellipsoid;
using scene::Scene;

struct PairTestResult {
  bool intersect = false;
  double min_mahalanobis = 0.0;  // min of a's metric over b, <= 1 iff intersect
};

/// Ground-truth ellipsoid intersection: minimize a's squared Mahalanobis
/// distance over ellipsoid b.  Inside-ball minimizers come from the
/// unconstrained stationary point; boundary minimizers from the secular
/// equation sum h_i^2/(lambda_i + nu)^2 = 1 solved by bisection to 1e-10.
/// Shares no code with the K(s) test.
inline PairTestResult exact_pair_test(const Ellipsoid& a, const Ellipsoid& b) {
  const Mat3 ainv = a.shape_inv();
  const Mat3 rs = b.rot * b.semi_axes.asDiagonal();  // maps unit ball to b
  const Vec3 v = b.mu - a.mu;
  const Mat3 bmat = rs.transpose() * ainv * rs;
  const Vec3 h = rs.transpose() * (ainv * v);
  const double c0 = v.dot(ainv * v);

  Eigen::SelfAdjointEigenSolver<Mat3> eig(0.5 * (bmat + bmat.transpose()));
  const Vec3 lam = eig.eigenvalues();
  const Vec3 ht = eig.eigenvectors().transpose() * h;

  PairTestResult out;
  // Unconstrained stationary point y* = -B^{-1} h.
  double norm2 = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double yi = -ht[i] / lam[i];
    norm2 += yi * yi;
  }
  if (norm2 <= 1.0) {
    double value = c0;
    for (int i = 0; i < 3; ++i) value -= ht[i] * ht[i] / lam[i];
    out.min_mahalanobis = std::max(value, 0.0);
    out.intersect = out.min_mahalanobis <= 1.0;
    return out;
  }
  // Boundary: psi(nu) = sum h_i^2/(lam_i+nu)^2 is decreasing; psi(0) > 1 here
  // and psi(||h||) <= 1, so the root lies in [0, ||h||].
  const double hnorm = std::sqrt(ht.squaredNorm());
  double lo = 0.0, hi = hnorm;
  for (int it = 0; it < 200 && hi - lo > 1e-14 * (1.0 + hnorm); ++it) {
    const double nu = 0.5 * (lo + hi);
    double psi = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double d = lam[i] + nu;
      psi += ht[i] * ht[i] / (d * d);
    }
    (psi > 1.0 ? lo : hi) = nu;
  }
  const double nu = 0.5 * (lo + hi);
  double value = c0;
  for (int i = 0; i < 3; ++i) {
    const double d = lam[i] + nu;
    value -= ht[i] * ht[i] * (lam[i] + 2.0 * nu) / (d * d);
  }
  out.min_mahalanobis = std::max(value, 0.0);
  out.intersect = out.min_mahalanobis <= 1.0;
  return out;
}

struct PolytopeClearResult {
  bool clear = false;
  double margin = 0.0;  // min over samples of the largest facet violation
};

/// Sample n points on the body-inflated ellipsoid surface (uniform on the
/// sphere, pushed through the affine ellipsoid map, then offset by the body
/// radius along the true outward normal) and require every sample to violate
/// at least one polytope facet.  Samples within 1e-12 of a facet plane count
/// as outside (floating-point slack).  Deterministic for a fixed seed.
inline PolytopeClearResult polytope_clear(const Polytope& poly, const Ellipsoid& e,
                                          const SphereBody& body, int n, int seed) {
  if (n < 1) fail(ErrorCode::kDomain, "polytope_clear: need n >= 1");
  if (poly.halfspaces.empty())
    fail(ErrorCode::kDomain, "polytope_clear: polytope has no facets");
  rng::CounterRng gen(static_cast<std::uint64_t>(seed), "polytope_clear");
  const Mat3 map = e.rot * e.semi_axes.asDiagonal();
  const Mat3 normal_map = e.rot * e.semi_axes.cwiseInverse().asDiagonal();
  std::vector<Vec3> units(poly.halfspaces.size());
  std::vector<double> norms(poly.halfspaces.size());
  for (std::size_t f = 0; f < poly.halfspaces.size(); ++f) {
    norms[f] = poly.halfspaces[f].a.norm();
    check(norms[f] > 1e-15, "polytope_clear: degenerate facet");
    units[f] = poly.halfspaces[f].a / norms[f];
  }
  PolytopeClearResult out;
  out.clear = true;
  out.margin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    // Marsaglia's method for a uniform direction.
    double u, v, s;
    do {
      u = gen.uniform(-1.0, 1.0);
      v = gen.uniform(-1.0, 1.0);
      s = u * u + v * v;
    } while (s >= 1.0);
    const double root = std::sqrt(std::max(1.0 - s, 0.0));
    const Vec3 dir(2.0 * u * root, 2.0 * v * root, 1.0 - 2.0 * s);
    const Vec3 surface = e.mu + map * dir;
    const Vec3 x = surface + body.radius * (normal_map * dir).normalized();
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t f = 0; f < poly.halfspaces.size(); ++f)
      worst = std::max(worst, units[f].dot(x) - poly.halfspaces[f].b / norms[f]);
    out.margin = std::min(out.margin, worst);
    if (worst < -1e-12) out.clear = false;
  }
  return out;
}

struct ClearanceViolation {
  int piece = 0;
  int sample_index = 0;   // within the piece
  double time = 0.0;      // absolute trajectory time
  int ellipsoid = 0;
  double k_star = 0.0;
};

struct ClearanceReport {
  double min_k_star = std::numeric_limits<double>::infinity();
  int argmin_ellipsoid = -1;
  double argmin_time = 0.0;
  int argmin_piece = -1;
  std::vector<ClearanceViolation> violations;
};

/// Exact clearance sweep: k_star of the body against every scene ellipsoid at
/// evenly spaced sample points of every piece (zero-length segments).  A
/// KD-tree narrows the candidates via K(s) >= d^2 / (2 (kappa^2 + lam_max^2)),
/// which lower-bounds the test value by center distance, so the reported
/// minimum equals the full scan's.
inline ClearanceReport trajectory_clearance(const spline::Trajectory& traj,
                                            const Scene& s, const SphereBody& body,
                                            int samples_per_piece = 100) {
  if (samples_per_piece < 2)
    fail(ErrorCode::kDomain, "trajectory_clearance: need >= 2 samples per piece");
  ClearanceReport report;
  if (s.ellipsoids.empty()) return report;

  std::vector<Vec3> centers(s.ellipsoids.size());
  double lam_max = 0.0;
  for (std::size_t i = 0; i < s.ellipsoids.size(); ++i) {
    centers[i] = s.ellipsoids[i].mu;
    lam_max = std::max(lam_max, s.ellipsoids[i].max_semi_axis());
  }
  const spatial::KdTree tree(centers);
  // d^2/(2 (kappa^2 + lam_max^2)) <= K(1/2) <= reported k_star, so candidates
  // for k_star <= bound live within distance sqrt(2 (kappa^2+lam_max^2) bound).
  const double alpha2 = 2.0 * (body.radius * body.radius + lam_max * lam_max);
  const int knn_seed = std::min<int>(16, static_cast<int>(centers.size()));

  double t_cursor = traj.t0;
  for (std::size_t piece = 0; piece < traj.pieces.size(); ++piece) {
    const spline::BezierPiece& bp = traj.pieces[piece];
    for (int j = 0; j < samples_per_piece; ++j) {
      const double tau = static_cast<double>(j) / (samples_per_piece - 1);
      const double time = t_cursor + tau * bp.duration;
      const VecX w = spline::bernstein(bp.degree(), tau, 0);
      Vec3 x = Vec3::Zero();
      for (int m = 0; m <= bp.degree(); ++m)
        x += w[m] * Vec3(bp.control_points.row(m).transpose());
      const Segment probe{x, x};

      std::vector<int> cand = tree.knn(x, knn_seed);
      std::sort(cand.begin(), cand.end());
      double local_min = std::numeric_limits<double>::infinity();
      std::vector<char> tested(s.ellipsoids.size(), 0);
      auto run = [&](int idx) {
        if (tested[static_cast<std::size_t>(idx)]) return;
        tested[static_cast<std::size_t>(idx)] = 1;
        const double k =
            collide::test_sphere_segment(s.ellipsoids[static_cast<std::size_t>(idx)],
                                         body, probe)
                .k_star;
        if (k < local_min) local_min = k;
        if (k < report.min_k_star) {
          report.min_k_star = k;
          report.argmin_ellipsoid = idx;
          report.argmin_time = time;
          report.argmin_piece = static_cast<int>(piece);
        }
        if (k <= 1.0)
          report.violations.push_back(
              {static_cast<int>(piece), j, time, idx, k});
      };
      for (int idx : cand) run(idx);
      // One expansion round covers both the true minimum and every possible
      // violation (k_star <= 1).
      const double bound = std::max(local_min, 1.0 + 1e-9);
      for (int idx : tree.radius_query(x, std::sqrt(alpha2 * bound) + 1e-9))
        run(idx);
    }
    t_cursor += bp.duration;
  }
  return report;
}

inline Json clearance_report_to_json(const ClearanceReport& r) {
  Json violations = Json::array();
  for (const ClearanceViolation& v : r.violations)
    violations.push_back(Json{{"piece", v.piece},
                              {"sample_index", v.sample_index},
                              {"time", v.time},
                              {"ellipsoid", v.ellipsoid},
                              {"k_star", v.k_star}});
  return Json{{"min_k_star", number_or_inf(r.min_k_star)},
              {"argmin_ellipsoid", r.argmin_ellipsoid},
              {"argmin_time", r.argmin_time},
              {"argmin_piece", r.argmin_piece},
              {"violations", violations}};
}

}  // namespace gsnav::oracle
