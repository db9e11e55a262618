#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "gsnav/collide.hpp"
#include "gsnav/error.hpp"
#include "gsnav/json_util.hpp"
#include "gsnav/math.hpp"
#include "gsnav/scene.hpp"

namespace gsnav::corridor {

using collide::IntersectionResult;
using collide::Segment;
using collide::SphereBody;
using scene::Ellipsoid;
using scene::Scene;

/// Halfspace in the internal convention: feasible set is a.dot(x) <= b.
struct Halfspace {
  Vec3 a = Vec3::UnitX();
  double b = 0.0;
};

/// Convex region described by stacked halfspaces, remembering the seed
/// segment it was grown around.
struct Polytope {
  std::vector<Halfspace> halfspaces;
  Segment seed_segment;

  /// Largest constraint violation at x (<= 0 means feasible).
  double max_violation(const Vec3& x) const {
    double worst = -std::numeric_limits<double>::infinity();
    for (const Halfspace& h : halfspaces)
      worst = std::max(worst, h.a.dot(x) - h.b);
    return worst;
  }
  bool contains(const Vec3& x, double slack = 0.0) const {
    return max_violation(x) <= slack;
  }
};

/// Ordered chain of overlapping polytopes covering a seed path, with the
/// hand-off point between each consecutive pair.
struct Corridor {
  std::vector<Polytope> polytopes;
  std::vector<Vec3> transition_points;  // size polytopes.size() - 1
  std::vector<int> transition_indices;  // seed waypoint index of each hand-off
  std::vector<double> covered_arc;      // seed arc length covered per polytope
  Vec3 start = Vec3::Zero();
  Vec3 goal = Vec3::Zero();
};

/// Deterministic right-handed orthonormal frame whose first column is u0.
/// The second axis comes from crossing with the world axis least aligned
/// with u0 (lowest index on ties), so equal inputs give equal frames.
inline Mat3 frame_from_axis(const Vec3& u0) {
  int pick = 0;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    const double align = std::abs(u0[i]);
    if (align < best) {
      best = align;
      pick = i;
    }
  }
  const Vec3 u1 = u0.cross(Vec3::Unit(pick)).normalized();
  const Vec3 u2 = u0.cross(u1);
  Mat3 f;
  f.col(0) = u0;
  f.col(1) = u1;
  f.col(2) = u2;
  return f;
}

/// Six-facet box oriented along the segment with margin r_s + kappa on every
/// side, where r_s = vmax^2 / (2 amax) is the stopping distance.  Zero-length
/// segments use `frame` (pass the previous segment's frame, or identity at the
/// path start).  Facet order: +axis, -axis, +side1, -side1, +side2, -side2.
inline Polytope segment_bbox(const Segment& seg, const SphereBody& body,
                             double vmax, double amax,
                             const Mat3& frame = Mat3::Identity()) {
  if (!(vmax > 0.0 && amax > 0.0))
    fail(ErrorCode::kDomain, "segment_bbox: vmax and amax must be positive");
  if (!(body.radius > 0.0))
    fail(ErrorCode::kDomain, "segment_bbox: body radius must be positive");
  const double margin = vmax * vmax / (2.0 * amax) + body.radius;
  const Vec3 delta = seg.delta();
  const double len = delta.norm();
  Mat3 axes = frame;
  if (len > 1e-12) axes = frame_from_axis(delta / len);
  Polytope box;
  box.seed_segment = seg;
  box.halfspaces.reserve(6);
  for (int i = 0; i < 3; ++i) {
    const Vec3 u = axes.col(i);
    const double lo = u.dot(seg.a);
    const double hi = lo + (i == 0 ? u.dot(delta) : 0.0);
    box.halfspaces.push_back({u, std::max(lo, hi) + margin});
    box.halfspaces.push_back({-u, -(std::min(lo, hi) - margin)});
  }
  return box;
}

/// True iff the ellipsoid reaches into the halfspace, i.e.
/// min over the ellipsoid of a.dot(x) <= b, with the closed-form minimum
/// a.dot(mu) - ||a^T rot diag(semi_axes)||.
inline bool ellipsoid_reaches_halfspace(const Ellipsoid& e, const Halfspace& h) {
  const Vec3 local = e.rot.transpose() * h.a;
  const double support = (local.array() * e.semi_axes.array()).matrix().norm();
  return h.a.dot(e.mu) - support <= h.b;
}

/// Indices of every scene ellipsoid that reaches all facet halfspaces of the
/// box — a superset of the ellipsoids actually intersecting the box.
inline std::vector<int> collision_set(const Scene& s, const Polytope& box) {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(s.ellipsoids.size()); ++i) {
    const Ellipsoid& e = s.ellipsoids[static_cast<std::size_t>(i)];
    bool reaches_all = true;
    for (const Halfspace& h : box.halfspaces)
      if (!ellipsoid_reaches_halfspace(e, h)) {
        reaches_all = false;
        break;
      }
    if (reaches_all) out.push_back(i);
  }
  return out;
}

/// Same result as collision_set but prefiltered through a spatial index: an
/// ellipsoid reaching all box facets has its center within max_semi_axis of
/// the box, so a ball query around the box center is a safe overestimate.
inline std::vector<int> collision_set_indexed(const Scene& s,
                                              const collide::SceneIndex& index,
                                              const Polytope& box) {
  const Segment& seg = box.seed_segment;
  const Vec3 center = 0.5 * (seg.a + seg.b);
  // Facet margin beyond the segment: distance from a facet plane back to the
  // nearest segment endpoint (all six share it by construction).
  double margin = 0.0;
  for (const Halfspace& h : box.halfspaces)
    margin = std::max(margin,
                      h.b - std::max(h.a.dot(seg.a), h.a.dot(seg.b)));
  // Reaching every facet puts the center inside the box expanded by its
  // loosest semi-axis per facet; that expansion moves the circumradius by at
  // most sqrt(3) times the semi-axis.
  const double half_len = 0.5 * seg.delta().norm();
  const double circum = std::sqrt((half_len + margin) * (half_len + margin) +
                                  2.0 * margin * margin);
  const double reach = circum + std::sqrt(3.0) * index.global_max_axis + 1e-9;
  std::vector<int> out;
  for (int i : index.tree.radius_query(center, reach)) {
    const Ellipsoid& e = s.ellipsoids[static_cast<std::size_t>(i)];
    bool reaches_all = true;
    for (const Halfspace& h : box.halfspaces)
      if (!ellipsoid_reaches_halfspace(e, h)) {
        reaches_all = false;
        break;
      }
    if (reaches_all) out.push_back(i);
  }
  return out;
}

/// Raised when a seed segment actually collides with (or passes too close to)
/// an obstacle, so no separating hyperplane exists; carries enough context for
/// the planner to mark the segment and re-seed.
class UnsafeSeedError : public Error {
 public:
  UnsafeSeedError(int segment_index, int ellipsoid_index, double k_star,
                  const Segment& seg)
      : Error(ErrorCode::kUnsafeSeed,
              "unsafe seed segment " + std::to_string(segment_index) +
                  ": ellipsoid " + std::to_string(ellipsoid_index) +
                  " too close (k_star = " + std::to_string(k_star) + ")"),
        segment_index(segment_index),
        ellipsoid_index(ellipsoid_index),
        k_star(k_star),
        segment(seg) {}

  int segment_index;
  int ellipsoid_index;
  double k_star;
  Segment segment;
};

namespace detail {

/// Supporting hyperplane from an already-computed intersection result:
/// with x* = seg.a + t* delta and M = inv(Sigma(s*)), the robot side is
/// (M Delta).x >= (1+eps) sqrt(K(s*)) + (M Delta).mu, stored negated.
inline Halfspace hyperplane_from_result(const Segment& seg, const SphereBody& body,
                                        const Ellipsoid& e,
                                        const IntersectionResult& res, double eps) {
  const double s = res.s_star;
  const double k2 = body.radius * body.radius;
  Vec3 diag;
  for (int i = 0; i < 3; ++i) {
    const double lam2 = e.semi_axes[i] * e.semi_axes[i];
    diag[i] = s * (1.0 - s) / ((1.0 - s) * k2 + s * lam2);
  }
  const Vec3 x_star = seg.a + res.t_star * seg.delta();
  const Vec3 delta_local = e.rot.transpose() * (x_star - e.mu);
  const Vec3 a = e.rot * (diag.array() * delta_local.array()).matrix();
  const double b = (1.0 + eps) * std::sqrt(res.k_star) + a.dot(e.mu);
  return {-a, -b};
}

}  // namespace detail

/// Supporting hyperplane separating the body-inflated ellipsoid from the
/// whole segment, with buffer eps.  The pair must test disjoint.
inline Halfspace support_hyperplane(const Segment& seg, const SphereBody& body,
                                    const Ellipsoid& e, int iters = 10,
                                    double eps = 1e-6) {
  const IntersectionResult res = collide::test_sphere_segment(e, body, seg, iters);
  if (!res.disjoint)
    fail(ErrorCode::kDomain, "support_hyperplane: pair is not disjoint (k_star = " +
                                 std::to_string(res.k_star) + ")");
  return detail::hyperplane_from_result(seg, body, e, res, eps);
}

namespace detail {

/// Greedy polytope construction from a precomputed collision set.
/// segment_index only labels errors.
inline Polytope build_polytope_core(const Segment& seg, const SphereBody& body,
                                    const Scene& s, const Polytope& box,
                                    const std::vector<int>& cset, int iters,
                                    double eps, int segment_index) {
  Polytope out;
  out.seed_segment = seg;
  out.halfspaces.reserve(box.halfspaces.size() + cset.size());
  for (const Halfspace& h : box.halfspaces)
    out.halfspaces.push_back({h.a, h.b - body.radius * h.a.norm()});

  // One intersection test per candidate; K only depends on the segment, so
  // results are reused across greedy rounds.
  // The hyperplane keeps the segment on its feasible side only when
  // sqrt(K) >= 1 + eps; anything at or below that margin means the seed
  // cannot be encapsulated and the caller must re-seed.
  const double safe_floor = (1.0 + eps) * (1.0 + eps) + 1e-9;
  std::vector<std::pair<int, IntersectionResult>> remaining;
  remaining.reserve(cset.size());
  for (int idx : cset) {
    const Ellipsoid& e = s.ellipsoids[static_cast<std::size_t>(idx)];
    const IntersectionResult res = collide::test_sphere_segment(e, body, seg, iters);
    if (!res.disjoint || res.k_star <= safe_floor)
      throw UnsafeSeedError(segment_index, idx, res.k_star, seg);
    remaining.emplace_back(idx, res);
  }

  while (!remaining.empty()) {
    std::size_t pick = 0;
    for (std::size_t i = 1; i < remaining.size(); ++i)
      if (remaining[i].second.k_star < remaining[pick].second.k_star) pick = i;
    const int chosen = remaining[pick].first;
    const Ellipsoid& e = s.ellipsoids[static_cast<std::size_t>(chosen)];
    const Halfspace h =
        hyperplane_from_result(seg, body, e, remaining[pick].second, eps);
    out.halfspaces.push_back(h);
    // Prune against the facet pushed out by the body radius: an ellipsoid that
    // cannot reach even the inflated feasible side can never touch the body
    // anywhere in the remaining region and is settled for good.
    const Halfspace inflated{h.a, h.b + body.radius * h.a.norm()};
    std::vector<std::pair<int, IntersectionResult>> kept;
    kept.reserve(remaining.size() - 1);
    bool chosen_pruned = false;
    for (const auto& entry : remaining) {
      const Ellipsoid& cand = s.ellipsoids[static_cast<std::size_t>(entry.first)];
      if (ellipsoid_reaches_halfspace(cand, inflated))
        kept.push_back(entry);
      else if (entry.first == chosen)
        chosen_pruned = true;
    }
    check(chosen_pruned, "build_polytope: chosen ellipsoid must prune itself");
    remaining.swap(kept);
  }
  return out;
}

}  // namespace detail

/// Deflate the box by the body radius, then greedily add supporting
/// hyperplanes for the collision set, pruning resolved ellipsoids, until the
/// set is empty.  The result keeps the body-inflated segment strictly inside.
inline Polytope build_polytope(const Segment& seg, const SphereBody& body,
                               const Scene& s, const Polytope& box,
                               int iters = 10, double eps = 1e-6) {
  return detail::build_polytope_core(seg, body, s, box, collision_set(s, box),
                                     iters, eps, -1);
}

struct CorridorParams {
  double vmax = 0.5;
  double amax = 1.0;
  int iters = 10;
  double eps = 1e-6;
};

/// Chain polytopes along the seed path: segments whose endpoints already fit
/// in the current polytope are skipped; each remaining segment grows its own
/// polytope.  Hand-off points are the earliest seed waypoints feasible in both
/// neighbors.  `index` (optional) accelerates collision-set queries.
inline Corridor build_corridor(const std::vector<Vec3>& seed, const Scene& s,
                               const SphereBody& body,
                               const CorridorParams& params = {},
                               const collide::SceneIndex* index = nullptr) {
  if (seed.empty()) fail(ErrorCode::kDomain, "build_corridor: empty seed path");
  std::vector<Vec3> pts = seed;
  if (pts.size() == 1) pts.push_back(pts.front());

  Corridor c;
  c.start = pts.front();
  c.goal = pts.back();
  Mat3 frame = Mat3::Identity();
  std::vector<int> first_segment;  // seed segment each polytope grew from
  for (int i = 0; i + 1 < static_cast<int>(pts.size()); ++i) {
    const Segment seg{pts[static_cast<std::size_t>(i)],
                      pts[static_cast<std::size_t>(i) + 1]};
    if (seg.delta().norm() > 1e-12) frame = frame_from_axis(seg.delta().normalized());
    if (!c.polytopes.empty() && c.polytopes.back().contains(seg.a) &&
        c.polytopes.back().contains(seg.b))
      continue;
    const Polytope box = segment_bbox(seg, body, params.vmax, params.amax, frame);
    const std::vector<int> cset =
        index ? collision_set_indexed(s, *index, box) : collision_set(s, box);
    c.polytopes.push_back(detail::build_polytope_core(
        seg, body, s, box, cset, params.iters, params.eps, i));
    first_segment.push_back(i);
  }
  check(!c.polytopes.empty(), "build_corridor: no polytope built");
  check(c.polytopes.front().contains(c.start, 1e-9),
        "build_corridor: first polytope must contain the start");
  check(c.polytopes.back().contains(c.goal, 1e-9),
        "build_corridor: last polytope must contain the goal");

  // Hand-off between consecutive polytopes: earliest seed waypoint feasible in
  // both, scanned in ascending order so hand-offs never move backwards.
  const int n = static_cast<int>(pts.size());
  int scan_from = 0;
  for (std::size_t j = 0; j + 1 < c.polytopes.size(); ++j) {
    int found = -1;
    for (int w = scan_from; w < n; ++w) {
      const Vec3& x = pts[static_cast<std::size_t>(w)];
      if (c.polytopes[j].contains(x) && c.polytopes[j + 1].contains(x)) {
        found = w;
        break;
      }
    }
    if (found < 0)
      fail(ErrorCode::kCorridorDisconnect,
           "build_corridor: polytopes " + std::to_string(j) + " and " +
               std::to_string(j + 1) + " share no feasible seed waypoint");
    c.transition_points.push_back(pts[static_cast<std::size_t>(found)]);
    c.transition_indices.push_back(found);
    scan_from = found;
  }

  // Seed arc length covered per polytope, split at the hand-off waypoints.
  std::vector<double> cum(static_cast<std::size_t>(n), 0.0);
  for (int i = 1; i < n; ++i)
    cum[static_cast<std::size_t>(i)] =
        cum[static_cast<std::size_t>(i) - 1] +
        (pts[static_cast<std::size_t>(i)] - pts[static_cast<std::size_t>(i) - 1])
            .norm();
  int prev = 0;
  for (std::size_t p = 0; p < c.polytopes.size(); ++p) {
    const int end =
        p + 1 < c.polytopes.size() ? c.transition_indices[p] : n - 1;
    c.covered_arc.push_back(cum[static_cast<std::size_t>(end)] -
                            cum[static_cast<std::size_t>(prev)]);
    prev = end;
  }
  return c;
}

// --- JSON serialization ---------------------------------------------------

inline Json polytope_to_json(const Polytope& p) {
  Json rows = Json::array();
  Json b = Json::array();
  for (const Halfspace& h : p.halfspaces) {
    rows.push_back(vec3_to_json(h.a));
    b.push_back(h.b);
  }
  return Json{{"A", rows},
              {"b", b},
              {"seed", Json::array({vec3_to_json(p.seed_segment.a),
                                    vec3_to_json(p.seed_segment.b)})}};
}

inline Polytope polytope_from_json(const Json& j) {
  Polytope p;
  const Json& rows = require_field(j, "A", "polytope");
  const Json& b = require_field(j, "b", "polytope");
  if (!rows.is_array() || !b.is_array() || rows.size() != b.size())
    fail(ErrorCode::kSchema, "polytope: A and b must be arrays of equal length");
  for (std::size_t i = 0; i < rows.size(); ++i)
    p.halfspaces.push_back({json_to_vec3(rows[i], "polytope A row"),
                            b[i].get<double>()});
  const Json& seed = require_field(j, "seed", "polytope");
  if (!seed.is_array() || seed.size() != 2)
    fail(ErrorCode::kSchema, "polytope: seed must hold two points");
  p.seed_segment.a = json_to_vec3(seed[0], "polytope seed");
  p.seed_segment.b = json_to_vec3(seed[1], "polytope seed");
  return p;
}

inline Json corridor_to_json(const Corridor& c) {
  Json polys = Json::array();
  for (const Polytope& p : c.polytopes) polys.push_back(polytope_to_json(p));
  Json transitions = Json::array();
  for (const Vec3& t : c.transition_points) transitions.push_back(vec3_to_json(t));
  Json arcs = Json::array();
  for (double a : c.covered_arc) arcs.push_back(a);
  return Json{{"polytopes", polys},
              {"transition_points", transitions},
              {"transition_indices", c.transition_indices},
              {"covered_arc", arcs},
              {"start", vec3_to_json(c.start)},
              {"goal", vec3_to_json(c.goal)}};
}

inline Corridor corridor_from_json(const Json& j) {
  Corridor c;
  for (const Json& p : require_field(j, "polytopes", "corridor"))
    c.polytopes.push_back(polytope_from_json(p));
  for (const Json& t : require_field(j, "transition_points", "corridor"))
    c.transition_points.push_back(json_to_vec3(t, "corridor transition"));
  if (j.contains("transition_indices"))
    c.transition_indices = j.at("transition_indices").get<std::vector<int>>();
  if (j.contains("covered_arc"))
    c.covered_arc = j.at("covered_arc").get<std::vector<double>>();
  if (j.contains("start")) c.start = json_to_vec3(j.at("start"), "corridor start");
  if (j.contains("goal")) c.goal = json_to_vec3(j.at("goal"), "corridor goal");
  if (c.polytopes.empty())
    fail(ErrorCode::kSchema, "corridor: needs at least one polytope");
  if (c.transition_points.size() + 1 != c.polytopes.size())
    fail(ErrorCode::kSchema,
         "corridor: transition count must be polytope count minus one");
  return c;
}

}  // namespace gsnav::corridor
