// Release acceptance harness.  Runs ten end-to-end criteria against the
// library and the command-line tool, printing one [PASS]/[FAIL] line per
// criterion; the exit status is the number of failed criteria.  References
// are independent of the implementation paths they check: dense linear
// algebra for the collision curve, a secular-equation distance oracle,
// surface sampling, finite differences, and a dense active-set QP.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gsnav/gsnav.hpp"
#include "support/grid_argmax.hpp"
#include "support/pose_fixtures.hpp"
#include "support/reference_qp.hpp"
#include "support/subprocess.hpp"

namespace {

using namespace gsnav;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using scene::Ellipsoid;
using scene::Scene;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int prec = 3) {
  std::ostringstream ss;
  ss.precision(prec);
  ss << v;
  return ss.str();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ---- shared fixtures ------------------------------------------------------

fs::path work_dir() {
  const fs::path dir = fs::temp_directory_path() / "gsnav_acceptance";
  fs::create_directories(dir);
  return dir;
}

subprocess::Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), GSNAV_CLI_PATH);
  return subprocess::run(args);
}

/// 10k-splat cluttered cylinder scene, generated once through the CLI.
fs::path clutter_fixture() {
  const fs::path ply = work_dir() / "clutter10k.ply";
  if (!fs::exists(ply)) {
    const auto res =
        run_cli({"synth", "--count", "10000", "--out", ply.string()});
    if (res.exit_code != 0)
      throw std::runtime_error("synth failed: " + res.output);
  }
  return ply;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Ellipsoid unit_sphere(const Vec3& center) {
  Ellipsoid e;
  e.mu = center;
  return e;  // rot = I, semi_axes = (1, 1, 1)
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == '\n') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

struct BenchRow {
  int success = 0;
  double path_length = 0.0;
  double min_k_star = 0.0;
};

std::vector<BenchRow> parse_bench_csv(const std::string& text) {
  std::vector<BenchRow> rows;
  const std::vector<std::string> lines = split_lines(text);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::istringstream ss(lines[i]);
    std::string field;
    std::vector<std::string> f;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (f.size() < 4) continue;
    BenchRow r;
    r.success = std::stoi(f[1]);
    r.path_length = std::stod(f[2]);  // strtod accepts inf/nan spellings
    r.min_k_star = std::stod(f[3]);
    rows.push_back(r);
  }
  return rows;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

// ---- dense-algebra pair collision curve -----------------------------------

/// Reference value of the pair test function with the first ellipsoid in the
/// s slot: K(s) = s(1-s) d^T [(1-s) B + s A]^{-1} d, d = b.mu - a.mu.
double dense_pair_k(const Ellipsoid& a, const Ellipsoid& b, double s) {
  const Mat3 m = (1.0 - s) * b.shape() + s * a.shape();
  const Vec3 d = b.mu - a.mu;
  return s * (1.0 - s) * d.dot(m.fullPivLu().solve(d));
}

/// The same curve in closed rational form: the denominator det((1-s)B + sA)
/// is cubic in s and the numerator d^T adj((1-s)B + sA) d quadratic, so both
/// are pinned by dense evaluations at a few nodes.  Evaluation then costs a
/// handful of flops, which makes the million-point grid reference affordable,
/// and the derivative comes out in closed form for driving the bisection.
struct PairCurve {
  double n0 = 0, n1 = 0, n2 = 0;
  double c0 = 0, c1 = 0, c2 = 0, c3 = 0;

  collide::KEval operator()(double s) const {
    const double n = n0 + s * (n1 + s * n2);
    const double dn = n1 + 2.0 * s * n2;
    const double c = c0 + s * (c1 + s * (c2 + s * c3));
    const double dc = c1 + s * (2.0 * c2 + 3.0 * s * c3);
    const double w = s * (1.0 - s);
    const double dw = 1.0 - 2.0 * s;
    collide::KEval ev;
    ev.k = w * n / c;
    ev.dkds = (dw * n + w * dn) / c - w * n * dc / (c * c);
    return ev;
  }
};

PairCurve make_pair_curve(const Ellipsoid& a, const Ellipsoid& b) {
  const Mat3 ma = a.shape(), mb = b.shape();
  const Vec3 d = b.mu - a.mu;
  const auto det_at = [&](double s) {
    return Mat3((1.0 - s) * mb + s * ma).determinant();
  };
  const auto num_at = [&](double s) {
    const Mat3 m = (1.0 - s) * mb + s * ma;
    return m.determinant() * d.dot(m.fullPivLu().solve(d));
  };
  PairCurve pc;
  {
    Eigen::Matrix4d v;
    Eigen::Vector4d f;
    const double nodes[4] = {0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0};
    for (int i = 0; i < 4; ++i) {
      const double s = nodes[i];
      v.row(i) << 1.0, s, s * s, s * s * s;
      f[i] = det_at(s);
    }
    const Eigen::Vector4d c = v.fullPivLu().solve(f);
    pc.c0 = c[0];
    pc.c1 = c[1];
    pc.c2 = c[2];
    pc.c3 = c[3];
  }
  {
    Mat3 v;
    Vec3 f;
    const double nodes[3] = {0.0, 0.5, 1.0};
    for (int i = 0; i < 3; ++i) {
      const double s = nodes[i];
      v.row(i) << 1.0, s, s * s;
      f[i] = num_at(s);
    }
    const Vec3 n = v.fullPivLu().solve(f);
    pc.n0 = n[0];
    pc.n1 = n[1];
    pc.n2 = n[2];
  }
  return pc;
}

// ---- criterion 1: collision verdicts vs the distance oracle ---------------

Outcome criterion_collision_verdicts() {
  const auto t0 = Clock::now();
  rng::CounterRng rng(20240001ULL, "acceptance_pairs");
  int checked = 0, banded = 0, mismatches = 0, unsafe_at_10 = 0;
  for (int i = 0; i < 10000; ++i) {
    const Ellipsoid a = synthetic::random_ellipsoid(rng, -2.0, 2.0, 0.1, 1.0);
    const Ellipsoid b = synthetic::random_ellipsoid(rng, -2.0, 2.0, 0.1, 1.0);
    const oracle::PairTestResult exact = oracle::exact_pair_test(a, b);
    // A 10-iteration verdict of "disjoint" must never contradict the oracle,
    // band or no band: the test reports a certified lower bound.
    if (collide::test_ellipsoid_pair(a, b, 10).disjoint && exact.intersect)
      ++unsafe_at_10;
    if (std::abs(exact.min_mahalanobis - 1.0) <= 1e-8) {
      ++banded;
      continue;
    }
    ++checked;
    if (collide::test_ellipsoid_pair(a, b, 30).disjoint == exact.intersect)
      ++mismatches;
  }
  const double dt = seconds_since(t0);
  std::ostringstream d;
  d << checked << " pairs compared (" << banded << " inside the 1e-8 band), "
    << mismatches << " verdict mismatches at 30 iterations, " << unsafe_at_10
    << " unsafe disjoint claims at 10 iterations, " << fmt(dt) << " s";
  return {mismatches == 0 && unsafe_at_10 == 0 && dt < 10.0, d.str()};
}

// ---- criterion 2: bisection convergence rate ------------------------------

Outcome criterion_bisection_rate() {
  rng::CounterRng rng(20240001ULL, "acceptance_bisection");
  const double grid_slack = gridmax::half_spacing();
  long long violations = 0;
  int curve_mismatches = 0;
  double worst_ratio = 0.0;  // |s_hat - s*| over the bound, max over runs
  for (int inst = 0; inst < 1000; ++inst) {
    const Ellipsoid a = synthetic::random_ellipsoid(rng, -2.0, 2.0, 0.1, 1.0);
    const Ellipsoid b = synthetic::random_ellipsoid(rng, -2.0, 2.0, 0.1, 1.0);
    const PairCurve curve = make_pair_curve(a, b);
    for (double probe : {0.37, 0.81}) {
      const double want = dense_pair_k(a, b, probe);
      if (std::abs(curve(probe).k - want) >
          1e-9 * std::max(1.0, std::abs(want)))
        ++curve_mismatches;
    }
    const gridmax::Result grid =
        gridmax::argmax([&](double s) { return curve(s).k; });
    for (int k = 1; k <= 20; ++k) {
      const collide::BisectionResult r = collide::bisection_max(curve, k);
      const double bound = std::ldexp(1.0, -(k + 1)) + grid_slack;
      const double err = std::abs(r.s_hat - grid.s);
      worst_ratio = std::max(worst_ratio, err / bound);
      if (err > bound) ++violations;
    }
  }
  std::ostringstream d;
  d << "1000 instances x 20 budgets, " << violations
    << " bound violations (worst error / bound = " << fmt(worst_ratio)
    << "), " << curve_mismatches << " curve cross-check mismatches";
  return {violations == 0 && curve_mismatches == 0, d.str()};
}

// ---- criterion 3: closed-form sphere pairs --------------------------------

Outcome criterion_sphere_closed_form() {
  bool ok = true;
  std::ostringstream d;
  for (double dist : {1.0, 2.0, 2.5, 3.0, 10.0}) {
    const collide::IntersectionResult r = collide::test_ellipsoid_pair(
        unit_sphere(Vec3::Zero()), unit_sphere(Vec3(dist, 0.0, 0.0)), 10);
    if (std::abs(r.k_star - dist * dist / 4.0) > 1e-9) {
      ok = false;
      d << "k mismatch at d=" << dist << " (" << r.k_star << "); ";
    }
    if (r.disjoint != (dist > 2.0)) {
      ok = false;
      d << "verdict wrong at d=" << dist << "; ";
    }
  }
  // The flip sits exactly at d = 2: k = 1 exactly there (no strict margin),
  // and the next representable step either side flips the verdict.
  const auto at2 = collide::test_ellipsoid_pair(
      unit_sphere(Vec3::Zero()), unit_sphere(Vec3(2.0, 0.0, 0.0)), 10);
  const bool exact_at_2 = at2.k_star == 1.0 && !at2.disjoint;
  const double eps = std::ldexp(1.0, -20);
  const bool above = collide::test_ellipsoid_pair(
                         unit_sphere(Vec3::Zero()),
                         unit_sphere(Vec3(2.0 + eps, 0.0, 0.0)), 10)
                         .disjoint;
  const bool below = !collide::test_ellipsoid_pair(
                          unit_sphere(Vec3::Zero()),
                          unit_sphere(Vec3(2.0 - eps, 0.0, 0.0)), 10)
                          .disjoint;
  if (!(exact_at_2 && above && below)) {
    ok = false;
    d << "verdict does not flip exactly at d=2; ";
  }
  if (ok) d << "k = d^2/4 within 1e-9 on all five distances, flip exact at d=2";
  return {ok, d.str()};
}

// ---- criterion 4: separating hyperplanes ----------------------------------

Outcome criterion_hyperplane_separation() {
  const auto t0 = Clock::now();
  rng::CounterRng rng(20240001ULL, "acceptance_hyperplanes");
  int made = 0, segment_side_bad = 0, obstacle_side_bad = 0;
  double min_margin = std::numeric_limits<double>::infinity();
  while (made < 10000) {
    const Ellipsoid obstacle =
        synthetic::random_ellipsoid(rng, -2.0, 2.0, 0.1, 1.0);
    const collide::SphereBody body{rng.uniform(0.1, 0.5)};
    collide::Segment seg;
    for (int i = 0; i < 3; ++i) {
      seg.a[i] = rng.uniform(-4.0, 4.0);
      seg.b[i] = rng.uniform(-4.0, 4.0);
    }
    if (!collide::test_sphere_segment(obstacle, body, seg, 30).disjoint)
      continue;
    const corridor::Halfspace h =
        corridor::support_hyperplane(seg, body, obstacle, 30, 1e-6);
    // The robot side a.x <= b is linear, so the two endpoints certify the
    // whole segment.
    if (h.a.dot(seg.a) > h.b + 1e-12 || h.a.dot(seg.b) > h.b + 1e-12)
      ++segment_side_bad;
    // The inflated obstacle must stay on the far side: no boundary sample
    // may land inside the robot halfspace.
    corridor::Polytope poly;
    poly.halfspaces.push_back(h);
    const oracle::PolytopeClearResult clear =
        oracle::polytope_clear(poly, obstacle, body, 100000, made);
    if (!clear.clear) ++obstacle_side_bad;
    min_margin = std::min(min_margin, clear.margin);
    ++made;
  }
  // Analytic tangency: unit obstacle at the origin, point robot of radius 1
  // at (4,0,0), no buffer.  The supporting plane is x = 2 exactly.
  const corridor::Halfspace ht = corridor::support_hyperplane(
      {Vec3(4.0, 0.0, 0.0), Vec3(4.0, 0.0, 0.0)}, collide::SphereBody{1.0},
      unit_sphere(Vec3::Zero()), 10, 0.0);
  const bool tangent_exact = ht.a[0] == -1.0 && ht.a[1] == 0.0 &&
                             ht.a[2] == 0.0 && ht.b == -2.0;
  const double dt = seconds_since(t0);
  std::ostringstream d;
  d << "10000 disjoint triples, " << segment_side_bad
    << " segment-side failures, " << obstacle_side_bad
    << " of the 1e5-sample obstacle checks failed (closest margin "
    << fmt(min_margin) << "), tangent plane "
    << (tangent_exact ? "exact" : "NOT exact") << ", " << fmt(dt) << " s";
  return {segment_side_bad == 0 && obstacle_side_bad == 0 && tangent_exact,
          d.str()};
}

// ---- criterion 5: end-to-end safety bench ---------------------------------

Outcome criterion_end_to_end_safety() {
  const fs::path ply = clutter_fixture();
  const fs::path csv = work_dir() / "bench100.csv";
  const auto t0 = Clock::now();
  const auto res =
      run_cli({"bench", "--scene", ply.string(), "--trials", "100",
               "--samples", "100", "--seed", "1", "--out", csv.string()});
  const double dt = seconds_since(t0);
  if (res.exit_code != 0)
    return {false, "bench exited " + std::to_string(res.exit_code) + ": " +
                       res.output.substr(0, 200)};
  const std::vector<BenchRow> rows = parse_bench_csv(read_file(csv));
  int good = 0;
  double weakest = std::numeric_limits<double>::infinity();
  for (const BenchRow& r : rows) {
    if (r.success == 1 && r.min_k_star > 1.0) ++good;
    weakest = std::min(weakest, r.min_k_star);
  }
  std::ostringstream d;
  d << good << "/" << rows.size()
    << " trajectories returned and verified safe (weakest min k = "
    << fmt(weakest) << "), " << fmt(dt) << " s";
  return {rows.size() == 100 && good == 100 && dt < 300.0, d.str()};
}

// ---- criterion 6: spline feasibility and QP cross-check -------------------

Vec3 piece_deriv(const spline::BezierPiece& bp, double tau, int order) {
  const VecX w = spline::bernstein(bp.degree(), tau, order);
  Vec3 v = Vec3::Zero();
  for (int m = 0; m <= bp.degree(); ++m)
    v += w[m] * Vec3(bp.control_points.row(m).transpose());
  return v / std::pow(bp.duration, order);
}

double unit_violation(const corridor::Polytope& poly, const Vec3& x) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const corridor::Halfspace& h : poly.halfspaces)
    worst = std::max(worst, (h.a.dot(x) - h.b) / h.a.norm());
  return worst;
}

corridor::Polytope axis_box(const Vec3& lo, const Vec3& hi) {
  corridor::Polytope p;
  for (int axis = 0; axis < 3; ++axis) {
    corridor::Halfspace plus, minus;
    plus.a = Vec3::Unit(axis);
    plus.b = hi[axis];
    minus.a = -Vec3::Unit(axis);
    minus.b = -lo[axis];
    p.halfspaces.push_back(plus);
    p.halfspaces.push_back(minus);
  }
  return p;
}

/// Chain of unit-offset boxes along x whose hand-off chords are congruent,
/// so the piecewise-chord anchor satisfies every continuity order.
corridor::Corridor box_chain(int pieces) {
  corridor::Corridor c;
  for (int p = 0; p < pieces; ++p) {
    c.polytopes.push_back(
        axis_box(Vec3(p, -1.0, -1.0), Vec3(p + 2.0, 1.0, 1.0)));
    c.covered_arc.push_back(1.0);
  }
  for (int p = 1; p < pieces; ++p) {
    c.transition_points.push_back(Vec3(p + 0.5, 0.0, 0.0));
    c.transition_indices.push_back(p);
  }
  c.start = Vec3(0.5, 0.0, 0.0);
  c.goal = Vec3(pieces + 0.5, 0.0, 0.0);
  return c;
}

Outcome criterion_spline_correctness() {
  std::ostringstream d;
  bool ok = true;

  // Fitted trajectories through two corridors: a straight shot and an
  // L-shaped detour around a sphere.
  struct Case {
    corridor::Corridor corridor;
    Vec3 x0, xf;
  };
  std::vector<Case> cases;
  {
    const Scene empty;
    const Vec3 x0(0.0, 0.0, 0.0), xf(2.0, 1.0, 0.5);
    cases.push_back(
        {corridor::build_corridor({x0, xf}, empty, collide::SphereBody{0.25}),
         x0, xf});
  }
  {
    Scene sc;
    Ellipsoid e = unit_sphere(Vec3::Zero());
    e.semi_axes = Vec3::Constant(0.8);
    sc.ellipsoids.push_back(e);
    scene::recompute_bounds(sc);
    const std::vector<Vec3> seed = {Vec3(-2.0, 0.0, 0.0), Vec3(0.0, 2.0, 0.0),
                                    Vec3(2.0, 0.0, 0.0)};
    cases.push_back(
        {corridor::build_corridor(seed, sc, collide::SphereBody{0.25}),
         seed.front(), seed.back()});
  }

  double worst_point = -std::numeric_limits<double>::infinity();
  double worst_endpoint = 0.0, worst_junction = 0.0;
  for (const Case& cs : cases) {
    const spline::Trajectory traj =
        spline::fit_trajectory(cs.corridor, cs.x0, cs.xf);
    if (traj.fallback) {
      ok = false;
      d << "fit fell back to the seed polyline; ";
      continue;
    }
    for (std::size_t p = 0; p < traj.pieces.size(); ++p) {
      const corridor::Polytope& poly = cs.corridor.polytopes[p];
      const spline::BezierPiece& bp = traj.pieces[p];
      for (int m = 0; m <= bp.degree(); ++m)
        worst_point = std::max(
            worst_point,
            unit_violation(poly, Vec3(bp.control_points.row(m).transpose())));
      for (int j = 0; j < 10000; ++j)
        worst_point = std::max(
            worst_point,
            unit_violation(poly, piece_deriv(bp, j / 9999.0, 0)));
    }
    worst_endpoint = std::max(
        worst_endpoint, (piece_deriv(traj.pieces.front(), 0.0, 0) - cs.x0).norm());
    worst_endpoint = std::max(
        worst_endpoint, (piece_deriv(traj.pieces.back(), 1.0, 0) - cs.xf).norm());
    for (std::size_t p = 0; p + 1 < traj.pieces.size(); ++p)
      for (int order = 0; order <= 2; ++order)
        worst_junction = std::max(
            worst_junction, (piece_deriv(traj.pieces[p], 1.0, order) -
                             piece_deriv(traj.pieces[p + 1], 0.0, order))
                                .norm());
  }
  if (worst_point > 1e-9) ok = false;
  if (worst_endpoint > 1e-6) ok = false;
  if (worst_junction > 1e-6) ok = false;

  // Objective cross-check against the dense active-set reference.
  double worst_gap = 0.0;
  for (const auto& [degree, pieces] : std::vector<std::pair<int, int>>{
           {3, 1}, {3, 2}, {4, 3}}) {
    const corridor::Corridor c = box_chain(pieces);
    const qp::QuadraticProgram prog =
        spline::assemble_qp(c, c.start, c.goal, degree, 2);
    const VecX z = qp::solve_qp(prog);
    refqp::Problem dense;
    dense.H = MatX(prog.hessian);
    dense.q = prog.linear;
    dense.A = MatX(prog.eq_matrix);
    dense.b = prog.eq_rhs;
    dense.G = MatX(prog.ineq_matrix);
    dense.h = prog.ineq_rhs;
    const refqp::Solution ref = refqp::solve(dense, prog.polish_target);
    if (!ref.converged) {
      ok = false;
      d << "reference solver did not converge (M=" << degree << ", P=" << pieces
        << "); ";
      continue;
    }
    const double gap = std::abs(refqp::objective(dense, z) -
                                refqp::objective(dense, ref.z)) /
                       (1.0 + std::abs(refqp::objective(dense, ref.z)));
    worst_gap = std::max(worst_gap, gap);
  }
  if (worst_gap > 1e-6) ok = false;

  d << "worst sampled violation " << fmt(worst_point) << ", endpoint error "
    << fmt(worst_endpoint) << ", junction error " << fmt(worst_junction)
    << ", objective gap " << fmt(worst_gap);
  return {ok, d.str()};
}

// ---- criterion 7: localization --------------------------------------------

Outcome criterion_localization() {
  const locgeo::CameraIntrinsics intr = posefix::vga_camera();
  std::ostringstream d;
  bool ok = true;

  rng::CounterRng rng(20240001ULL, "acceptance_localization");
  int refine_bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const locgeo::Pose truth = posefix::random_pose(rng);
    const auto corrs = posefix::make_corrs(
        intr, truth, posefix::frustum_points(rng, intr, truth, 60));
    const locgeo::Pose init =
        posefix::perturb(rng, truth, 20.0 * M_PI / 180.0, 0.1);
    const locgeo::Pose est = locgeo::pnp_refine(corrs, intr, init, 200, 1e-12);
    if (posefix::rotation_error_deg(est.rot, truth.rot) >= 1e-6 ||
        (est.trans - truth.trans).norm() >= 1e-8)
      ++refine_bad;
  }
  if (refine_bad > 0) ok = false;

  int ransac_bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const locgeo::Pose truth = posefix::random_pose(rng);
    auto corrs = posefix::make_corrs(
        intr, truth, posefix::frustum_points(rng, intr, truth, 100));
    for (int i = 70; i < 100; ++i) {
      const double ang = rng.uniform(0.0, 2.0 * M_PI);
      const double radius = rng.uniform(25.0, 60.0);
      corrs[static_cast<std::size_t>(i)].pixel +=
          radius * Vec2(std::cos(ang), std::sin(ang));
    }
    const locgeo::Pose init =
        posefix::perturb(rng, truth, 20.0 * M_PI / 180.0, 0.1);
    const locgeo::RansacResult r = locgeo::pnp_ransac(
        corrs, intr, init, 2.0, 500, static_cast<std::uint64_t>(trial));
    bool all_true_inliers = true;
    for (int i = 0; i < 70; ++i)
      if (!r.inliers[static_cast<std::size_t>(i)]) all_true_inliers = false;
    if (!all_true_inliers ||
        posefix::rotation_error_deg(r.pose.rot, truth.rot) >= 1e-4)
      ++ransac_bad;
  }
  if (ransac_bad > 0) ok = false;

  double umeyama_worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    locgeo::Pose truth;
    truth.rot = posefix::random_rotation(rng, M_PI);
    truth.trans =
        Vec3(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0));
    std::vector<locgeo::Correspondence3D3D> pairs;
    for (int i = 0; i < 30; ++i) {
      const Vec3 q(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0),
                   rng.uniform(-2.0, 2.0));
      pairs.push_back({truth.rot * q + truth.trans, q});
    }
    const locgeo::Pose est = locgeo::umeyama(pairs);
    umeyama_worst = std::max(umeyama_worst,
                             (est.rot - truth.rot).cwiseAbs().maxCoeff());
    umeyama_worst =
        std::max(umeyama_worst, (est.trans - truth.trans).norm());
  }
  if (umeyama_worst > 1e-12) ok = false;

  double jac_worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const locgeo::Pose pose = posefix::random_pose(rng);
    const auto corrs = posefix::make_corrs(
        intr, pose, posefix::frustum_points(rng, intr, pose, 1));
    Vec2 residual;
    Eigen::Matrix<double, 2, 6> jac;
    if (!locgeo::detail::reprojection_jacobian(intr, pose, corrs[0], residual,
                                               jac))
      continue;
    const double h = 1e-6;
    for (int dim = 0; dim < 6; ++dim) {
      const auto pixel_at = [&](double delta) {
        locgeo::Pose p = pose;
        if (dim < 3)
          p.rot = so3_exp(delta * Vec3::Unit(dim)) * pose.rot;
        else
          p.trans[dim - 3] += delta;
        return locgeo::project(intr, p, corrs[0].point).pixel;
      };
      const Vec2 fd = (pixel_at(h) - pixel_at(-h)) / (2.0 * h);
      jac_worst = std::max(jac_worst, (fd - Vec2(jac.col(dim))).cwiseAbs().maxCoeff());
    }
  }
  if (jac_worst > 1e-5) ok = false;

  d << refine_bad << "/100 refine misses, " << ransac_bad
    << "/100 outlier-trial misses, umeyama worst error " << fmt(umeyama_worst)
    << ", jacobian-vs-differences worst " << fmt(jac_worst);
  return {ok, d.str()};
}

// ---- criterion 8: minimum-volume enclosing ellipsoids ---------------------

Outcome criterion_enclosing_ellipsoid() {
  std::ostringstream d;
  bool ok = true;
  const double tol = 1e-6;

  std::vector<Vec3> cube;
  for (int i = 0; i < 8; ++i)
    cube.push_back(Vec3(i & 1 ? 1.0 : 0.0, i & 2 ? 1.0 : 0.0, i & 4 ? 1.0 : 0.0));
  const Ellipsoid ball = collide::min_volume_ellipsoid(cube, tol);
  const double target = std::sqrt(3.0) / 2.0;
  double radius_err = (ball.mu - Vec3::Constant(0.5)).norm();
  for (int i = 0; i < 3; ++i)
    radius_err = std::max(radius_err, std::abs(ball.semi_axes[i] - target));
  if (radius_err > 1e-4) {
    ok = false;
    d << "cube circumsphere off by " << fmt(radius_err) << "; ";
  }

  // Random clouds: every point inside, with the termination certificate
  // max Mahalanobis <= 1 + tol/3.
  rng::CounterRng rng(20240001ULL, "acceptance_mvee");
  double worst_mahal = 0.0;
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 4 + static_cast<int>(rng.uniform(0.0, 297.0));
    std::vector<Vec3> pts;
    for (int i = 0; i < n; ++i)
      pts.push_back(Vec3(rng.uniform(-3.0, 3.0), rng.uniform(-1.0, 5.0),
                         rng.uniform(0.0, 2.0)));
    const Ellipsoid e = collide::min_volume_ellipsoid(pts, tol);
    for (const Vec3& p : pts)
      worst_mahal = std::max(worst_mahal, e.mahalanobis2(p));
  }
  if (worst_mahal > 1.0 + tol / 3.0 + 1e-9) ok = false;

  d << "cube radius error " << fmt(radius_err) << ", cloud max Mahalanobis "
    << fmt(worst_mahal, 9) << " (certificate bound " << fmt(1.0 + tol / 3.0, 9)
    << ")";
  return {ok, d.str()};
}

// ---- criterion 9: soft performance targets --------------------------------

Outcome criterion_performance() {
  std::ostringstream d;

  // Plan throughput on a 100k-splat scene with the grid prebuilt.
  synthetic::ClutterParams cp;
  cp.count = 100000;
  const Scene sc = synthetic::clutter_scene(cp);
  const collide::SceneIndex index(sc);
  planner::PlanParams pp;  // radius 0.25, vmax 0.5, amax 1.0, 80^3 cells
  const Vec3 center = 0.5 * (sc.bounds_min + sc.bounds_max);
  const double rx = sc.bounds_max[0] - sc.bounds_min[0];
  const double ry = sc.bounds_max[1] - sc.bounds_min[1];
  const double radius = std::max(1.0, 0.5 * std::hypot(rx, ry));
  const Vec3 pad(1.0, 1.0, 2.0);
  const Vec3 lo = sc.bounds_min.cwiseMin(center - Vec3(radius, radius, 0.0)) - pad;
  const Vec3 hi = sc.bounds_max.cwiseMax(center + Vec3(radius, radius, 0.0)) + pad;
  const voxgrid::OccupancyGrid grid =
      planner::planning_grid(sc, pp.body, lo, hi, pp.resolution);

  std::vector<double> plan_times;
  int plan_failures = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const double ang = 0.3 + 2.0 * M_PI * trial / 10.0;
    const Vec3 offset(radius * std::cos(ang), radius * std::sin(ang), 0.0);
    const auto t0 = Clock::now();
    try {
      planner::plan_on_grid(sc, grid, center + offset, center - offset, pp,
                            &index);
      plan_times.push_back(seconds_since(t0));
    } catch (const Error&) {
      ++plan_failures;
    }
  }
  if (plan_times.empty())
    return {false, "all plans on the 100k scene failed"};
  const double plans_per_s = 1.0 / median(plan_times);

  // pnp_refine latency on 500 correspondences.
  const locgeo::CameraIntrinsics intr = posefix::vga_camera();
  rng::CounterRng rng(20240001ULL, "acceptance_perf");
  const locgeo::Pose truth = posefix::random_pose(rng);
  const auto corrs = posefix::make_corrs(
      intr, truth, posefix::frustum_points(rng, intr, truth, 500));
  std::vector<double> pnp_times;
  for (int rep = 0; rep < 21; ++rep) {
    const locgeo::Pose init =
        posefix::perturb(rng, truth, 5.0 * M_PI / 180.0, 0.05);
    const auto t0 = Clock::now();
    locgeo::pnp_refine(corrs, intr, init);
    pnp_times.push_back(seconds_since(t0));
  }
  const double pnp_ms = 1e3 * median(pnp_times);

  const bool soft = plans_per_s >= 2.0 && pnp_ms < 10.0 && plan_failures == 0;
  const bool hard = plans_per_s >= 2.0 / 3.0 && pnp_ms < 30.0;
  d << fmt(plans_per_s) << " plans/s on the 100k scene (" << plan_failures
    << " failures), pnp_refine median " << fmt(pnp_ms) << " ms on 500 points"
    << (soft ? "" : " [soft target missed, within 3x slack]");
  return {hard, d.str()};
}

// ---- criterion 10: bench determinism --------------------------------------

Outcome criterion_determinism() {
  const fs::path ply = clutter_fixture();
  const std::vector<std::string> base = {
      "bench",    "--scene", ply.string(), "--trials",       "10",
      "--samples", "50",     "--seed",     "123",            "--omit-timings"};
  const auto run_to = [&](const std::string& out) {
    std::vector<std::string> args = base;
    args.push_back("--out");
    args.push_back(out);
    return run_cli(args);
  };
  const fs::path a = work_dir() / "det_a.csv";
  const fs::path b = work_dir() / "det_b.csv";
  const auto ra = run_to(a.string());
  const auto rb = run_to(b.string());
  if (ra.exit_code != 0 || rb.exit_code != 0)
    return {false, "bench exited nonzero: " + ra.output.substr(0, 120)};
  const std::string ca = read_file(a), cb = read_file(b);
  std::ostringstream d;
  d << "two 10-trial runs with one seed produced "
    << (ca == cb ? "byte-identical" : "DIFFERING") << " CSVs (" << ca.size()
    << " bytes; timing columns zeroed; single-threaded pipeline)";
  return {ca == cb && !ca.empty(), d.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria =
      {{"collision verdicts match the distance oracle",
        criterion_collision_verdicts},
       {"bisection meets its convergence bound", criterion_bisection_rate},
       {"sphere pairs match the closed form", criterion_sphere_closed_form},
       {"hyperplanes separate inflated obstacles from segments",
        criterion_hyperplane_separation},
       {"benched trajectories are all verified safe",
        criterion_end_to_end_safety},
       {"splines are feasible, smooth, and optimal",
        criterion_spline_correctness},
       {"localization recovers poses, inliers, and alignments",
        criterion_localization},
       {"enclosing ellipsoids are tight and certified",
        criterion_enclosing_ellipsoid},
       {"planning and refinement meet the soft speed targets",
        criterion_performance},
       {"bench output is byte-reproducible", criterion_determinism}};

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("threw: ") + e.what()};
    }
    if (!out.pass) ++failures;
    std::cout << (out.pass ? "[PASS]" : "[FAIL]") << " criterion " << (i + 1)
              << ": " << criteria[i].first << " — " << out.detail << "\n"
              << std::flush;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << " of "
            << criteria.size() << " criteria passed\n";
  return failures;
}
