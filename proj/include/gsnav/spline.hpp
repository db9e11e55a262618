#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "gsnav/corridor.hpp"
#include "gsnav/error.hpp"
#include "gsnav/json_util.hpp"
#include "gsnav/math.hpp"
#include "gsnav/qp.hpp"

namespace gsnav::spline {

using corridor::Corridor;
using corridor::Polytope;

/// One Bézier piece in normalized time t in [0,1], played back over
/// `duration` seconds.
struct BezierPiece {
  MatX control_points;  // (M+1) x 3
  double duration = 1.0;

  int degree() const { return static_cast<int>(control_points.rows()) - 1; }
};

struct Trajectory {
  std::vector<BezierPiece> pieces;
  double t0 = 0.0;
  bool fallback = false;  // degenerate seed-polyline result (QP did not solve)

  double total_duration() const {
    double total = 0.0;
    for (const BezierPiece& p : pieces) total += p.duration;
    return total;
  }
};

/// Bernstein basis of degree M at t, differentiated `order` times with
/// respect to t.  Returns the M+1 weights; order 0 weights are a partition
/// of unity.
inline VecX bernstein(int M, double t, int order = 0) {
  if (M < 0) fail(ErrorCode::kDomain, "bernstein: degree must be >= 0");
  if (!(t >= 0.0 && t <= 1.0))
    fail(ErrorCode::kDomain, "bernstein: t must lie in [0, 1]");
  if (order < 0 || order > M)
    fail(ErrorCode::kDomain, "bernstein: order must lie in [0, M]");
  // Basis of degree M - order, then `order` finite-difference lifts, using
  // d/dt B_{m,k+1} = (k+1) (B_{m-1,k} - B_{m,k}).
  const int base = M - order;
  VecX b = VecX::Zero(M + 1);
  b[0] = 1.0;
  for (int deg = 1; deg <= base; ++deg) {
    for (int m = deg; m >= 1; --m) b[m] = t * b[m - 1] + (1.0 - t) * b[m];
    b[0] *= 1.0 - t;
  }
  for (int deg = base; deg < M; ++deg) {
    for (int m = deg + 1; m >= 1; --m)
      b[m] = (deg + 1) * (b[m - 1] - b[m]);
    b[0] *= -(deg + 1);
  }
  return b;
}

/// Stacked-control-point QP for a corridor: path-length objective, endpoint
/// equalities, junction continuity up to continuity_order in metric time, and
/// per-control-point polytope feasibility rows.  Durations default to 1 per
/// piece when not provided.
inline qp::QuadraticProgram assemble_qp(const Corridor& c, const Vec3& x0,
                                        const Vec3& xf, int M,
                                        int continuity_order,
                                        const std::vector<double>& durations = {}) {
  const int P = static_cast<int>(c.polytopes.size());
  if (P < 1) fail(ErrorCode::kDomain, "assemble_qp: corridor has no polytopes");
  if (M < 1) fail(ErrorCode::kDomain, "assemble_qp: degree must be >= 1");
  if (continuity_order < 0 || continuity_order > M)
    fail(ErrorCode::kDomain, "assemble_qp: continuity order must lie in [0, M]");
  if (!durations.empty() && static_cast<int>(durations.size()) != P)
    fail(ErrorCode::kDomain, "assemble_qp: need one duration per polytope");
  if (!c.polytopes.front().contains(x0, 1e-9))
    fail(ErrorCode::kDomain, "assemble_qp: start point infeasible in first polytope");
  if (!c.polytopes.back().contains(xf, 1e-9))
    fail(ErrorCode::kDomain, "assemble_qp: goal point infeasible in last polytope");

  const int pts_per_piece = M + 1;
  const int n = 3 * pts_per_piece * P;
  auto var = [&](int piece, int m, int d) {
    return (piece * pts_per_piece + m) * 3 + d;
  };

  qp::QuadraticProgram prog;
  // Objective: sum over pieces and consecutive control points of
  // ||c_{m+1} - c_m||^2, i.e. H = 2 D'D.
  {
    std::vector<Eigen::Triplet<double>> trips;
    for (int piece = 0; piece < P; ++piece)
      for (int m = 0; m < M; ++m)
        for (int d = 0; d < 3; ++d) {
          const int i = var(piece, m, d);
          const int j = var(piece, m + 1, d);
          trips.emplace_back(i, i, 2.0);
          trips.emplace_back(j, j, 2.0);
          trips.emplace_back(i, j, -2.0);
          trips.emplace_back(j, i, -2.0);
        }
    prog.hessian.resize(n, n);
    prog.hessian.setFromTriplets(trips.begin(), trips.end());
  }
  prog.linear = VecX::Zero(n);

  // Equalities: endpoint configuration plus junction continuity r = 0..D.
  // The r-th metric-time derivative at a piece boundary is
  // (M!/(M-r)!) * Delta^r c / duration^r; the factorial factor cancels
  // across the junction and is dropped.
  {
    std::vector<Eigen::Triplet<double>> trips;
    std::vector<double> rhs;
    int row = 0;
    auto push_row = [&](double value) {
      rhs.push_back(value);
      return row++;
    };
    for (int d = 0; d < 3; ++d) {
      trips.emplace_back(push_row(x0[d]), var(0, 0, d), 1.0);
    }
    for (int d = 0; d < 3; ++d) {
      trips.emplace_back(push_row(xf[d]), var(P - 1, M, d), 1.0);
    }
    auto binom = [](int k, int j) {
      double v = 1.0;
      for (int i = 0; i < j; ++i) v = v * (k - i) / (i + 1);
      return v;
    };
    for (int piece = 0; piece + 1 < P; ++piece) {
      const double dt_a = durations.empty() ? 1.0 : durations[static_cast<std::size_t>(piece)];
      const double dt_b = durations.empty() ? 1.0 : durations[static_cast<std::size_t>(piece) + 1];
      for (int r = 0; r <= continuity_order; ++r) {
        const double scale_a = 1.0 / std::pow(dt_a, r);
        const double scale_b = 1.0 / std::pow(dt_b, r);
        for (int d = 0; d < 3; ++d) {
          const int this_row = push_row(0.0);
          // End of piece: Delta^r acting on c_{M-r}..c_M.
          for (int j = 0; j <= r; ++j) {
            const double w = (j % 2 == 0 ? 1.0 : -1.0) * binom(r, j) * scale_a;
            trips.emplace_back(this_row, var(piece, M - j, d), w);
          }
          // Start of next piece: Delta^r acting on c_0..c_r, negated.
          for (int j = 0; j <= r; ++j) {
            const double w =
                ((r - j) % 2 == 0 ? 1.0 : -1.0) * binom(r, j) * scale_b;
            trips.emplace_back(this_row, var(piece + 1, j, d), -w);
          }
        }
      }
    }
    prog.eq_matrix.resize(row, n);
    prog.eq_matrix.setFromTriplets(trips.begin(), trips.end());
    prog.eq_rhs = Eigen::Map<const VecX>(rhs.data(), row);
  }

  // Inequalities: every control point of piece p feasible in polytope p,
  // rows normalized to unit facet normals.
  {
    std::vector<Eigen::Triplet<double>> trips;
    std::vector<double> rhs;
    int row = 0;
    for (int piece = 0; piece < P; ++piece)
      for (const corridor::Halfspace& h :
           c.polytopes[static_cast<std::size_t>(piece)].halfspaces) {
        const double norm = h.a.norm();
        check(norm > 1e-15, "assemble_qp: degenerate facet normal");
        for (int m = 0; m <= M; ++m) {
          for (int d = 0; d < 3; ++d)
            trips.emplace_back(row, var(piece, m, d), h.a[d] / norm);
          rhs.push_back(h.b / norm);
          ++row;
        }
      }
    prog.ineq_matrix.resize(row, n);
    prog.ineq_matrix.setFromTriplets(trips.begin(), trips.end());
    prog.ineq_rhs = Eigen::Map<const VecX>(rhs.data(), row);
  }

  // Feasible anchor: control points spread along each piece's chord between
  // its hand-off endpoints (feasible by convexity).
  {
    prog.polish_target = VecX::Zero(n);
    for (int piece = 0; piece < P; ++piece) {
      const Vec3 from =
          piece == 0 ? x0 : c.transition_points[static_cast<std::size_t>(piece) - 1];
      const Vec3 to = piece == P - 1
                          ? xf
                          : c.transition_points[static_cast<std::size_t>(piece)];
      for (int m = 0; m <= M; ++m) {
        const Vec3 pt = from + (static_cast<double>(m) / M) * (to - from);
        for (int d = 0; d < 3; ++d) prog.polish_target[var(piece, m, d)] = pt[d];
      }
    }
  }
  return prog;
}

struct SplineParams {
  int degree = 6;
  int continuity_order = 2;
  double qp_tol = 1e-8;
  int qp_max_iter = 20000;
};

struct BodyParams {
  double kappa = 0.25;
  double vmax = 0.5;
  double amax = 1.0;
};

/// Fit a Bézier spline through the corridor: durations from covered seed arc
/// length over vmax, control points from the QP.  On solver failure, falls
/// back to the corridor's hand-off polyline as a degree-1 trajectory with
/// fallback = true (safe, not smooth).
/// Hand-off polyline: one linear piece per polytope, endpoints at the
/// corridor's transition points.  Every piece lies inside its own polytope by
/// convexity (a transition point is feasible in both adjacent polytopes), so
/// the result is safe — just not smooth.  Marked with fallback = true.
inline Trajectory fallback_trajectory(const Corridor& c, const Vec3& x0,
                                      const Vec3& xf,
                                      const std::vector<double>& durations) {
  const int P = static_cast<int>(c.polytopes.size());
  if (P < 1)
    fail(ErrorCode::kDomain, "fallback_trajectory: corridor has no polytopes");
  if (static_cast<int>(durations.size()) != P)
    fail(ErrorCode::kDomain,
         "fallback_trajectory: need one duration per polytope");
  Trajectory traj;
  traj.t0 = 0.0;
  traj.fallback = true;
  for (int piece = 0; piece < P; ++piece) {
    const Vec3 from =
        piece == 0 ? x0 : c.transition_points[static_cast<std::size_t>(piece) - 1];
    const Vec3 to =
        piece == P - 1 ? xf : c.transition_points[static_cast<std::size_t>(piece)];
    BezierPiece bp;
    bp.control_points.resize(2, 3);
    bp.control_points.row(0) = from.transpose();
    bp.control_points.row(1) = to.transpose();
    bp.duration = durations[static_cast<std::size_t>(piece)];
    traj.pieces.push_back(bp);
  }
  return traj;
}

inline Trajectory fit_trajectory(const Corridor& c, const Vec3& x0, const Vec3& xf,
                                 const BodyParams& body = {},
                                 const SplineParams& params = {}) {
  const int P = static_cast<int>(c.polytopes.size());
  if (P < 1) fail(ErrorCode::kDomain, "fit_trajectory: corridor has no polytopes");
  if (params.degree < std::max(1, params.continuity_order))
    fail(ErrorCode::kDomain,
         "fit_trajectory: degree must be >= max(1, continuity order)");
  if (!(body.vmax > 0.0))
    fail(ErrorCode::kDomain, "fit_trajectory: vmax must be positive");
  std::vector<double> durations(static_cast<std::size_t>(P));
  for (int piece = 0; piece < P; ++piece) {
    const double arc = static_cast<int>(c.covered_arc.size()) == P
                           ? c.covered_arc[static_cast<std::size_t>(piece)]
                           : (xf - x0).norm() / P;
    durations[static_cast<std::size_t>(piece)] = std::max(arc / body.vmax, 1e-6);
  }

  Trajectory traj;
  traj.t0 = 0.0;
  const int M = params.degree;
  qp::QuadraticProgram prog =
      assemble_qp(c, x0, xf, M, params.continuity_order, durations);
  auto piece_from_vector = [&](const VecX& z, int piece) {
    BezierPiece bp;
    bp.control_points.resize(M + 1, 3);
    for (int m = 0; m <= M; ++m)
      for (int d = 0; d < 3; ++d)
        bp.control_points(m, d) = z[(piece * (M + 1) + m) * 3 + d];
    bp.duration = durations[static_cast<std::size_t>(piece)];
    return bp;
  };
  try {
    const VecX z = qp::solve_qp(prog, params.qp_tol, params.qp_max_iter);
    for (int piece = 0; piece < P; ++piece)
      traj.pieces.push_back(piece_from_vector(z, piece));
    // Control points must sit inside their own polytope (convex-hull safety);
    // measured against unit facet normals so the slack is metric.
    for (int piece = 0; piece < P; ++piece) {
      const Polytope& poly = c.polytopes[static_cast<std::size_t>(piece)];
      const BezierPiece& bp = traj.pieces[static_cast<std::size_t>(piece)];
      for (int m = 0; m <= M; ++m) {
        const Vec3 pt(bp.control_points.row(m).transpose());
        for (const corridor::Halfspace& h : poly.halfspaces)
          check((h.a.dot(pt) - h.b) / h.a.norm() <= 1e-8,
                "fit_trajectory: control point escaped its polytope");
      }
    }
    return traj;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kQpFailure) throw;
  }
  return fallback_trajectory(c, x0, xf, durations);
}

struct TrajectorySample {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 acceleration = Vec3::Zero();
  Vec3 jerk = Vec3::Zero();
  bool clamped = false;
};

/// Evaluate position and time-derivatives at absolute time T, clamping to the
/// trajectory's time range (flagged in the result).
inline TrajectorySample sample(const Trajectory& traj, double T) {
  if (traj.pieces.empty()) fail(ErrorCode::kDomain, "sample: empty trajectory");
  TrajectorySample out;
  double rel = T - traj.t0;
  const double total = traj.total_duration();
  if (rel < 0.0) {
    rel = 0.0;
    out.clamped = true;
  } else if (rel > total) {
    rel = total;
    out.clamped = true;
  }
  std::size_t piece = 0;
  while (piece + 1 < traj.pieces.size() && rel > traj.pieces[piece].duration) {
    rel -= traj.pieces[piece].duration;
    ++piece;
  }
  const BezierPiece& bp = traj.pieces[piece];
  const int M = bp.degree();
  const double tau = std::min(std::max(rel / bp.duration, 0.0), 1.0);
  auto derivative = [&](int order) -> Vec3 {
    if (order > M) return Vec3::Zero();
    const VecX w = bernstein(M, tau, order);
    Vec3 v = Vec3::Zero();
    for (int m = 0; m <= M; ++m)
      v += w[m] * Vec3(bp.control_points.row(m).transpose());
    return v / std::pow(bp.duration, order);
  };
  out.position = derivative(0);
  out.velocity = derivative(1);
  out.acceleration = derivative(2);
  out.jerk = derivative(3);
  return out;
}

/// Arc length of the sampled position polyline, `samples_per_piece` uniform
/// samples per piece (>= 2).  Converges to the true length from below.
inline double arc_length(const Trajectory& traj, int samples_per_piece = 100) {
  if (samples_per_piece < 2)
    fail(ErrorCode::kDomain, "arc_length: need at least 2 samples per piece");
  double total = 0.0;
  for (const BezierPiece& bp : traj.pieces) {
    Vec3 prev = Vec3(bp.control_points.row(0).transpose());
    for (int i = 1; i < samples_per_piece; ++i) {
      const double t = static_cast<double>(i) / (samples_per_piece - 1);
      const VecX w = bernstein(bp.degree(), t);
      Vec3 x = Vec3::Zero();
      for (int m = 0; m <= bp.degree(); ++m)
        x += w[m] * Vec3(bp.control_points.row(m).transpose());
      total += (x - prev).norm();
      prev = x;
    }
  }
  return total;
}

// --- serialization --------------------------------------------------------

inline Json trajectory_to_json(const Trajectory& traj) {
  Json pieces = Json::array();
  for (const BezierPiece& bp : traj.pieces) {
    Json pts = Json::array();
    for (int m = 0; m < bp.control_points.rows(); ++m)
      pts.push_back(vec3_to_json(Vec3(bp.control_points.row(m).transpose())));
    pieces.push_back(Json{{"control_points", pts}, {"duration", bp.duration}});
  }
  return Json{{"pieces", pieces}, {"t0", traj.t0}, {"fallback", traj.fallback}};
}

inline Trajectory trajectory_from_json(const Json& j) {
  Trajectory traj;
  for (const Json& pj : require_field(j, "pieces", "trajectory")) {
    BezierPiece bp;
    const Json& pts = require_field(pj, "control_points", "trajectory piece");
    if (!pts.is_array() || pts.size() < 2)
      fail(ErrorCode::kSchema, "trajectory piece: need at least 2 control points");
    bp.control_points.resize(static_cast<int>(pts.size()), 3);
    for (std::size_t m = 0; m < pts.size(); ++m)
      bp.control_points.row(static_cast<int>(m)) =
          json_to_vec3(pts[m], "trajectory control point").transpose();
    bp.duration = require_field(pj, "duration", "trajectory piece").get<double>();
    if (!(bp.duration > 0.0))
      fail(ErrorCode::kSchema, "trajectory piece: duration must be positive");
    traj.pieces.push_back(bp);
  }
  if (traj.pieces.empty())
    fail(ErrorCode::kSchema, "trajectory: needs at least one piece");
  traj.t0 = j.value("t0", 0.0);
  traj.fallback = j.value("fallback", false);
  return traj;
}

/// CSV sampling dump: header T,px,py,pz,vx,vy,vz,ax,ay,az,jx,jy,jz with
/// `samples` rows spread evenly over the trajectory's time range.
inline std::string trajectory_to_csv(const Trajectory& traj, int samples) {
  if (samples < 2) fail(ErrorCode::kDomain, "trajectory_to_csv: need >= 2 samples");
  std::ostringstream out;
  out.precision(17);
  out << "T,px,py,pz,vx,vy,vz,ax,ay,az,jx,jy,jz\n";
  const double total = traj.total_duration();
  for (int i = 0; i < samples; ++i) {
    const double T = traj.t0 + total * i / (samples - 1);
    const TrajectorySample s = sample(traj, T);
    out << T;
    for (int d = 0; d < 3; ++d) out << ',' << s.position[d];
    for (int d = 0; d < 3; ++d) out << ',' << s.velocity[d];
    for (int d = 0; d < 3; ++d) out << ',' << s.acceleration[d];
    for (int d = 0; d < 3; ++d) out << ',' << s.jerk[d];
    out << '\n';
  }
  return out.str();
}

}  // namespace gsnav::spline
