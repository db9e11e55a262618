// End-to-end planning walkthrough: generate a small cluttered scene, plan a
// safe trajectory across it, verify the result against the sampling oracle,
// and write the trajectory plus corridor to JSON files in the current
// directory.

#include <iostream>

#include "gsnav/gsnav.hpp"

using namespace gsnav;

int main() {
  synthetic::ClutterParams params;
  params.count = 2000;
  params.core_radius = 5.0;
  params.height = 4.0;
  const scene::Scene sc = synthetic::clutter_scene(params);
  std::cout << "scene: " << sc.ellipsoids.size() << " ellipsoids, bounds ["
            << sc.bounds_min.transpose() << "] .. [" << sc.bounds_max.transpose()
            << "]\n";

  const Vec3 start(-6.0, -6.0, 2.0);
  const Vec3 goal(6.0, 6.0, 2.0);
  planner::PlanParams pp;
  pp.resolution = Vec3i(48, 48, 24);
  const planner::PlanResult res = planner::plan(sc, start, goal, pp);

  std::cout << "seed: " << res.stats.seed_waypoints << " waypoints, length "
            << res.stats.seed_length << "\n"
            << "corridor: " << res.stats.polytope_count << " polytopes, "
            << res.stats.facet_count << " facets\n"
            << "trajectory: " << res.trajectory.pieces.size() << " pieces over "
            << res.trajectory.total_duration() << " s"
            << (res.trajectory.fallback ? " (polyline fallback)" : "") << "\n"
            << "timing: grid " << res.stats.t_grid << " s, seed "
            << res.stats.t_seed << " s, corridor " << res.stats.t_corridor
            << " s, qp " << res.stats.t_qp << " s\n";

  const oracle::ClearanceReport report =
      oracle::trajectory_clearance(res.trajectory, sc, pp.body, 200);
  std::cout << "oracle: min k* = " << report.min_k_star << " ("
            << report.violations.size() << " violations)\n";

  save_json(spline::trajectory_to_json(res.trajectory), "demo_trajectory.json");
  save_json(corridor::corridor_to_json(res.corridor), "demo_corridor.json");
  std::cout << "wrote demo_trajectory.json and demo_corridor.json\n";
  return report.violations.empty() ? 0 : 1;
}
