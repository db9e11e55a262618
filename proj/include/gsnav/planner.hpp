#pragma once

// End-to-end planning pipeline: occupancy rasterization, seed-path search,
// safe-corridor construction, and trajectory optimization in one call.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gsnav/collide.hpp"
#include "gsnav/corridor.hpp"
#include "gsnav/error.hpp"
#include "gsnav/json_util.hpp"
#include "gsnav/math.hpp"
#include "gsnav/scene.hpp"
#include "gsnav/spline.hpp"
#include "gsnav/voxgrid.hpp"

namespace gsnav::planner {

struct PlanParams {
  collide::SphereBody body{0.25};
  double vmax = 0.5;
  double amax = 1.0;
  Vec3i resolution = Vec3i(80, 80, 80);
  int iters = 10;     ///< bisection iterations for the exact collision tests
  double eps = 1e-6;  ///< hyperplane retraction margin
  spline::SplineParams spline{};
  int max_reseed = 8;          ///< re-route attempts after an unsafe seed segment
  bool allow_fallback = true;  ///< accept the polyline fallback if the QP fails
  double bounds_pad = 1.0;     ///< margin around scene/endpoints when auto-sizing
};

struct PlanStats {
  std::size_t seed_waypoints = 0;
  double seed_length = 0.0;
  std::size_t polytope_count = 0;
  std::size_t facet_count = 0;
  int reseed_count = 0;
  double t_grid = 0.0;  ///< seconds; zero when planning on a prebuilt grid
  double t_seed = 0.0;
  double t_corridor = 0.0;
  double t_qp = 0.0;
  double t_total = 0.0;
};

struct PlanResult {
  std::vector<Vec3> seed;
  corridor::Corridor corridor;
  spline::Trajectory trajectory;
  PlanStats stats;
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace detail

/// Occupancy grid prepared for seeding: obstacles are rasterized and then
/// inflated by the body radius plus half the cell diagonal.  Any point of a
/// free cell is within half a diagonal of that cell's center, so the extra
/// half diagonal guarantees every free-cell point keeps at least the body
/// radius of clearance from the rasterized obstacle regions.  Seed segments
/// threaded through free cells therefore start out collision-free against
/// everything the grid captured.
inline voxgrid::OccupancyGrid planning_grid(const scene::Scene& s,
                                            const collide::SphereBody& body,
                                            const Vec3& bounds_min,
                                            const Vec3& bounds_max,
                                            const Vec3i& resolution) {
  voxgrid::OccupancyGrid g =
      voxgrid::build_grid(s, bounds_min, bounds_max, resolution);
  const collide::SphereBody margin{body.radius + 0.5 * g.cell.norm()};
  return voxgrid::inflate(g, margin);
}

/// Plan on a prebuilt planning_grid().  The input grid is only copied if
/// re-seeding has to mark unsafe cells, so it stays reusable across calls.
/// An optional SceneIndex accelerates the corridor's obstacle queries.
inline PlanResult plan_on_grid(const scene::Scene& s,
                               const voxgrid::OccupancyGrid& grid,
                               const Vec3& start, const Vec3& goal,
                               const PlanParams& params = {},
                               const collide::SceneIndex* index = nullptr) {
  if (!(params.body.radius > 0.0) || !(params.vmax > 0.0) ||
      !(params.amax > 0.0))
    fail(ErrorCode::kDomain,
         "plan: body radius, vmax, and amax must be positive");
  if (params.max_reseed < 0)
    fail(ErrorCode::kDomain, "plan: max_reseed must be non-negative");

  const auto t_start = std::chrono::steady_clock::now();
  PlanResult out;
  PlanStats& st = out.stats;

  corridor::CorridorParams cp;
  cp.vmax = params.vmax;
  cp.amax = params.amax;
  cp.iters = params.iters;
  cp.eps = params.eps;

  std::optional<voxgrid::OccupancyGrid> patched;  // lazily copied work grid
  const voxgrid::OccupancyGrid* work = &grid;
  bool have_corridor = false;
  for (int attempt = 0; attempt <= params.max_reseed; ++attempt) {
    auto t0 = std::chrono::steady_clock::now();
    out.seed = voxgrid::shortest_path(*work, start, goal);
    out.seed = voxgrid::simplify_path(*work, out.seed);
    st.t_seed += detail::seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    try {
      out.corridor =
          corridor::build_corridor(out.seed, s, params.body, cp, index);
      st.t_corridor += detail::seconds_since(t0);
      have_corridor = true;
      break;
    } catch (const corridor::UnsafeSeedError& e) {
      st.t_corridor += detail::seconds_since(t0);
      st.reseed_count += 1;
      if (!patched) {
        patched = grid;
        work = &*patched;
      }
      // Mark the cells traversed by the unsafe segment so the next search
      // routes around them.  The cells holding the endpoints stay free to
      // keep the query well-posed.
      const Vec3i cs = work->cell_of(start);
      const Vec3i cg = work->cell_of(goal);
      auto same_cell = [](const Vec3i& a, const Vec3i& b) {
        return a[0] == b[0] && a[1] == b[1] && a[2] == b[2];
      };
      const Vec3 delta = e.segment.delta();
      const double step = std::max(1e-9, work->cell.minCoeff() / 4.0);
      const int steps =
          std::max(1, static_cast<int>(std::ceil(delta.norm() / step)));
      bool marked = false;
      for (int i = 0; i <= steps; ++i) {
        const Vec3 x =
            e.segment.a + (static_cast<double>(i) / steps) * delta;
        const Vec3i c = work->cell_of(x);
        if (!work->in_bounds(c) || same_cell(c, cs) || same_cell(c, cg))
          continue;
        const std::int64_t li = work->linear(c[0], c[1], c[2]);
        if (!work->occupied(li)) {
          patched->set_occupied(li);
          marked = true;
        }
      }
      if (!marked)
        fail(ErrorCode::kCorridorDisconnect,
             "plan: unsafe seed segment " + std::to_string(e.segment_index) +
                 " could not be routed around (it touches only protected "
                 "cells)");
    }
  }
  if (!have_corridor)
    fail(ErrorCode::kCorridorDisconnect,
         "plan: no safe corridor after " + std::to_string(st.reseed_count) +
             " re-seeding attempts");

  st.seed_waypoints = out.seed.size();
  for (std::size_t i = 0; i + 1 < out.seed.size(); ++i)
    st.seed_length += (out.seed[i + 1] - out.seed[i]).norm();
  st.polytope_count = out.corridor.polytopes.size();
  for (const auto& p : out.corridor.polytopes)
    st.facet_count += p.halfspaces.size();

  const auto t0 = std::chrono::steady_clock::now();
  spline::BodyParams bp;
  bp.kappa = params.body.radius;
  bp.vmax = params.vmax;
  bp.amax = params.amax;
  out.trajectory =
      spline::fit_trajectory(out.corridor, start, goal, bp, params.spline);
  st.t_qp = detail::seconds_since(t0);
  if (out.trajectory.fallback && !params.allow_fallback)
    fail(ErrorCode::kQpFailure,
         "plan: trajectory optimization fell back to the seed polyline and "
         "fallback is disabled");

  st.t_total = detail::seconds_since(t_start);
  return out;
}

/// Full pipeline with automatic grid sizing: the grid covers the scene bounds
/// and both endpoints with `bounds_pad` of margin on every side.
inline PlanResult plan(const scene::Scene& s, const Vec3& start,
                       const Vec3& goal, const PlanParams& params = {},
                       const collide::SceneIndex* index = nullptr) {
  const auto t_start = std::chrono::steady_clock::now();
  Vec3 lo = start.cwiseMin(goal);
  Vec3 hi = start.cwiseMax(goal);
  if (!s.ellipsoids.empty()) {
    lo = lo.cwiseMin(s.bounds_min);
    hi = hi.cwiseMax(s.bounds_max);
  }
  lo.array() -= params.bounds_pad;
  hi.array() += params.bounds_pad;
  const auto t0 = std::chrono::steady_clock::now();
  const voxgrid::OccupancyGrid grid =
      planning_grid(s, params.body, lo, hi, params.resolution);
  const double t_grid = detail::seconds_since(t0);
  PlanResult out = plan_on_grid(s, grid, start, goal, params, index);
  out.stats.t_grid = t_grid;
  out.stats.t_total = detail::seconds_since(t_start);
  return out;
}

inline Json stats_to_json(const PlanStats& st) {
  return Json{{"seed_waypoints", st.seed_waypoints},
              {"seed_length", st.seed_length},
              {"polytopes", st.polytope_count},
              {"facets", st.facet_count},
              {"reseed_count", st.reseed_count},
              {"t_grid", st.t_grid},
              {"t_seed", st.t_seed},
              {"t_corridor", st.t_corridor},
              {"t_qp", st.t_qp},
              {"t_total", st.t_total}};
}

}  // namespace gsnav::planner
