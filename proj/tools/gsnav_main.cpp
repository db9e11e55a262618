// Command-line frontend: plan / check / voxelize / bench / pnp / register /
// synth.  Every failure path maps to a documented exit code and all
// randomness flows from one --seed through named counter generators, so runs
// with identical flags produce identical outputs.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gsnav/gsnav.hpp"

namespace {

using namespace gsnav;

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::kBlockedEndpoint:
      return 2;
    case ErrorCode::kDisconnected:
      return 3;
    case ErrorCode::kUnsafeSeed:
    case ErrorCode::kCorridorDisconnect:
      return 4;
    case ErrorCode::kQpFailure:
      return 5;
    case ErrorCode::kIo:
      return 10;
    case ErrorCode::kSchema:
    case ErrorCode::kParse:
    case ErrorCode::kDomain:
      return 11;
    default:
      return 1;  // no consensus, internal invariant failures
  }
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, path + ": cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, path + ": cannot open for writing");
  out << text;
  if (!out) fail(ErrorCode::kIo, path + ": write failed");
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void emit_json(const Json& j, const std::string& out_path) {
  if (out_path.empty())
    std::cout << j.dump(2) << "\n";
  else
    save_json(j, out_path);
}

// ---- shared scene / planner flag blocks ----------------------------------

struct SceneFlags {
  std::string scene;
  double gamma = 0.2;
  double opacity_min = 0.1;
  bool linear_scales = false;
};

void add_scene_flags(CLI::App* sub, SceneFlags& f) {
  sub->add_option("--scene", f.scene, "Scene file (.ply splats or .json ellipsoids)")
      ->required();
  sub->add_option("--gamma", f.gamma,
                  "Confidence mass each ellipsoid encloses (PLY scenes)");
  sub->add_option("--opacity-min", f.opacity_min,
                  "Drop splats below this opacity (PLY scenes)");
  sub->add_flag("--linear-scales", f.linear_scales,
                "Scales/opacities in the PLY are already activated");
}

scene::Scene load_scene_any(const SceneFlags& f) {
  if (ends_with(f.scene, ".ply")) {
    scene::ToSceneOptions opt;
    opt.gamma = f.gamma;
    opt.opacity_min = f.opacity_min;
    opt.linear_scales = f.linear_scales;
    return scene::to_scene(ply::load_ply(f.scene), opt);
  }
  if (ends_with(f.scene, ".json")) return scene::load_scene_json(f.scene);
  fail(ErrorCode::kSchema,
       f.scene + ": unknown scene format (expected .ply or .json)");
}

struct PlanFlags {
  SceneFlags scene;
  std::vector<double> start;
  std::vector<double> goal;
  double radius = 0.25;
  double vmax = 0.5;
  double amax = 1.0;
  std::vector<int> resolution{80};
  int iters = 10;
  double eps = 1e-6;
  int degree = 6;
  int continuity = 2;
  double qp_tol = 1e-8;
  std::uint64_t seed = 0;
  int max_reseed = 8;
  bool no_qp_fallback = false;
  double pad = 1.0;
};

void add_plan_flags(CLI::App* sub, PlanFlags& f, bool endpoints) {
  add_scene_flags(sub, f.scene);
  if (endpoints) {
    sub->add_option("--start", f.start, "Start position x,y,z")
        ->delimiter(',')
        ->required();
    sub->add_option("--goal", f.goal, "Goal position x,y,z")
        ->delimiter(',')
        ->required();
  }
  sub->add_option("--radius", f.radius, "Robot body radius");
  sub->add_option("--vmax", f.vmax, "Velocity limit");
  sub->add_option("--amax", f.amax, "Acceleration limit");
  sub->add_option("--resolution", f.resolution,
                  "Grid cells per axis: N (cube) or Nx,Ny,Nz")
      ->delimiter(',');
  sub->add_option("--iters", f.iters, "Bisection iterations per collision test");
  sub->add_option("--eps", f.eps, "Safety buffer on separating hyperplanes");
  sub->add_option("--degree", f.degree, "Bezier degree per trajectory piece");
  sub->add_option("--continuity", f.continuity,
                  "Derivative continuity order at piece junctions");
  sub->add_option("--qp-tol", f.qp_tol, "Trajectory QP convergence tolerance");
  sub->add_option("--seed", f.seed, "Random seed");
  sub->add_option("--max-reseed", f.max_reseed,
                  "Re-route attempts after an unsafe seed segment");
  sub->add_flag("--no-qp-fallback", f.no_qp_fallback,
                "Fail (exit 5) instead of falling back to the seed polyline "
                "when the trajectory QP does not converge");
  sub->add_option("--pad", f.pad, "Grid margin around scene and endpoints");
}

planner::PlanParams to_plan_params(const PlanFlags& f) {
  planner::PlanParams p;
  p.body.radius = f.radius;
  p.vmax = f.vmax;
  p.amax = f.amax;
  if (f.resolution.size() == 1)
    p.resolution = Vec3i::Constant(f.resolution[0]);
  else if (f.resolution.size() == 3)
    p.resolution = Vec3i(f.resolution[0], f.resolution[1], f.resolution[2]);
  else
    fail(ErrorCode::kDomain, "--resolution: expected N or Nx,Ny,Nz");
  p.iters = f.iters;
  p.eps = f.eps;
  p.spline.degree = f.degree;
  p.spline.continuity_order = f.continuity;
  p.spline.qp_tol = f.qp_tol;
  p.max_reseed = f.max_reseed;
  p.allow_fallback = !f.no_qp_fallback;
  p.bounds_pad = f.pad;
  return p;
}

Vec3 to_vec3(const std::vector<double>& v, const std::string& what) {
  if (v.size() != 3) fail(ErrorCode::kDomain, what + ": expected x,y,z");
  return Vec3(v[0], v[1], v[2]);
}

// ---- plan -----------------------------------------------------------------

int cmd_plan(const PlanFlags& f, const std::string& out,
             const std::string& corridor_out, const std::string& stats_out,
             const std::string& format, int samples, bool omit_timings) {
  const scene::Scene sc = load_scene_any(f.scene);
  const planner::PlanParams pp = to_plan_params(f);
  const collide::SceneIndex index(sc);
  planner::PlanResult res =
      planner::plan(sc, to_vec3(f.start, "--start"), to_vec3(f.goal, "--goal"),
                    pp, &index);

  if (format == "json")
    save_json(spline::trajectory_to_json(res.trajectory), out);
  else if (format == "csv")
    write_text(out, spline::trajectory_to_csv(res.trajectory, samples));
  else
    fail(ErrorCode::kDomain, "--format: expected json or csv");
  if (!corridor_out.empty())
    save_json(corridor::corridor_to_json(res.corridor), corridor_out);

  planner::PlanStats st = res.stats;
  if (omit_timings)
    st.t_grid = st.t_seed = st.t_corridor = st.t_qp = st.t_total = 0.0;
  Json stats = planner::stats_to_json(st);
  stats["fallback"] = res.trajectory.fallback;
  if (stats_out.empty())
    std::cout << stats.dump(2) << "\n";
  else
    save_json(stats, stats_out);
  return 0;
}

// ---- check ----------------------------------------------------------------

int cmd_check(const SceneFlags& sf, const std::string& traj_path, double radius,
              int samples, const std::string& out) {
  const scene::Scene sc = load_scene_any(sf);
  const spline::Trajectory traj =
      spline::trajectory_from_json(load_json(traj_path));
  const oracle::ClearanceReport rep = oracle::trajectory_clearance(
      traj, sc, collide::SphereBody{radius}, samples);
  emit_json(oracle::clearance_report_to_json(rep), out);
  return rep.violations.empty() ? 0 : 1;
}

// ---- voxelize -------------------------------------------------------------

int cmd_voxelize(const SceneFlags& sf, const std::vector<int>& resolution,
                 double pad, double inflate_radius, const std::string& out) {
  const scene::Scene sc = load_scene_any(sf);
  Vec3i res;
  if (resolution.size() == 1)
    res = Vec3i::Constant(resolution[0]);
  else if (resolution.size() == 3)
    res = Vec3i(resolution[0], resolution[1], resolution[2]);
  else
    fail(ErrorCode::kDomain, "--resolution: expected N or Nx,Ny,Nz");
  const Vec3 lo = sc.bounds_min.array() - pad;
  const Vec3 hi = sc.bounds_max.array() + pad;
  voxgrid::OccupancyGrid g = voxgrid::build_grid(sc, lo, hi, res);
  if (inflate_radius > 0.0)
    g = voxgrid::inflate(g, collide::SphereBody{inflate_radius});
  voxgrid::save_grid(g, out);
  const Json summary{{"dims", {g.dims[0], g.dims[1], g.dims[2]}},
                     {"cell", vec3_to_json(g.cell)},
                     {"origin", vec3_to_json(g.origin)},
                     {"occupied", g.occupied_count()},
                     {"cells", g.cell_count()},
                     {"clipped_boxes", g.clipped_boxes}};
  std::cout << summary.dump(2) << "\n";
  return 0;
}

// ---- bench ----------------------------------------------------------------

int cmd_bench(const PlanFlags& f, int trials, int samples,
              const std::string& out, bool omit_timings) {
  if (trials < 1) fail(ErrorCode::kDomain, "--trials: must be >= 1");
  const scene::Scene sc = load_scene_any(f.scene);
  const planner::PlanParams pp = to_plan_params(f);
  const collide::SceneIndex index(sc);

  // Antipodal start/goal pairs on a circle at mid height.  The circle radius
  // is the circumradius of the scene's horizontal bounding rectangle (floored
  // at 1), which keeps every pair outside the cluttered footprint.
  const Vec3 center = 0.5 * (sc.bounds_min + sc.bounds_max);
  const double ex = sc.bounds_max[0] - sc.bounds_min[0];
  const double ey = sc.bounds_max[1] - sc.bounds_min[1];
  const double R = std::max(1.0, 0.5 * std::hypot(ex, ey));

  // One grid serves every trial; its bounds cover the whole circle.  The
  // one-time construction cost is reported in each row's t_grid column.
  const Vec3 pad(1.0, 1.0, 2.0);
  const Vec3 lo = sc.bounds_min.cwiseMin(center - Vec3(R, R, 0.0)) - pad;
  const Vec3 hi = sc.bounds_max.cwiseMax(center + Vec3(R, R, 0.0)) + pad;
  const auto t0 = std::chrono::steady_clock::now();
  const voxgrid::OccupancyGrid grid =
      planner::planning_grid(sc, pp.body, lo, hi, pp.resolution);
  const double t_grid =
      omit_timings ? 0.0 : planner::detail::seconds_since(t0);

  rng::CounterRng rng(f.seed, "bench");
  const double phase = rng.uniform(0.0, 2.0 * M_PI);

  std::ostringstream csv;
  csv << "trial,success,path_length,min_k_star,P,facets,t_grid,t_seed,"
         "t_corridor,t_qp,t_total\n";
  for (int tr = 0; tr < trials; ++tr) {
    const double ang = phase + 2.0 * M_PI * tr / trials;
    const Vec3 offset(R * std::cos(ang), R * std::sin(ang), 0.0);
    const Vec3 start = center + offset;
    const Vec3 goal = center - offset;
    int success = 0;
    double path_length = std::numeric_limits<double>::quiet_NaN();
    double min_k = std::numeric_limits<double>::quiet_NaN();
    std::size_t P = 0, facets = 0;
    planner::PlanStats st;
    try {
      planner::PlanResult res =
          planner::plan_on_grid(sc, grid, start, goal, pp, &index);
      st = res.stats;
      const oracle::ClearanceReport rep =
          oracle::trajectory_clearance(res.trajectory, sc, pp.body, samples);
      success = 1;
      path_length = spline::arc_length(res.trajectory, samples);
      min_k = rep.min_k_star;
      P = res.stats.polytope_count;
      facets = res.stats.facet_count;
    } catch (const Error& e) {
      std::cerr << "trial " << tr << " failed: " << e.what() << "\n";
    }
    if (omit_timings) st.t_seed = st.t_corridor = st.t_qp = st.t_total = 0.0;
    csv << tr << ',' << success << ',' << fmt17(path_length) << ','
        << fmt17(min_k) << ',' << P << ',' << facets << ',' << fmt17(t_grid)
        << ',' << fmt17(st.t_seed) << ',' << fmt17(st.t_corridor) << ','
        << fmt17(st.t_qp) << ',' << fmt17(st.t_total) << '\n';
  }
  if (out.empty())
    std::cout << csv.str();
  else
    write_text(out, csv.str());
  return 0;
}

// ---- pnp / register -------------------------------------------------------

std::vector<locgeo::Correspondence2D3D> load_corrs_2d3d(
    const std::string& path) {
  if (ends_with(path, ".csv"))
    return locgeo::corrs_2d3d_from_csv(read_text(path));
  return locgeo::corrs_2d3d_from_json(load_json(path));
}

std::vector<locgeo::Correspondence3D3D> load_corrs_3d3d(
    const std::string& path) {
  if (ends_with(path, ".csv"))
    return locgeo::corrs_3d3d_from_csv(read_text(path));
  return locgeo::corrs_3d3d_from_json(load_json(path));
}

int cmd_pnp(const std::string& corr_path, const std::string& intr_path,
            const std::string& init_path, double px_threshold, int iters,
            std::uint64_t seed, const std::string& out) {
  const auto corrs = load_corrs_2d3d(corr_path);
  const locgeo::CameraIntrinsics intr =
      locgeo::intrinsics_from_json(load_json(intr_path));
  const locgeo::Pose init = init_path.empty()
                                ? locgeo::Pose{}
                                : locgeo::pose_from_json(load_json(init_path));
  Json result;
  if (px_threshold > 0.0) {
    const locgeo::RansacResult r =
        locgeo::pnp_ransac(corrs, intr, init, px_threshold, iters, seed);
    result = locgeo::pose_to_json(r.pose);
    result["inlier_count"] = r.inlier_count;
    Json mask = Json::array();
    for (bool b : r.inliers) mask.push_back(b ? 1 : 0);
    result["inliers"] = mask;
  } else {
    result = locgeo::pose_to_json(locgeo::pnp_refine(corrs, intr, init));
  }
  emit_json(result, out);
  return 0;
}

int cmd_register(const std::string& corr_path, double dist_threshold,
                 double edge_ratio, int iters, std::uint64_t seed,
                 const std::string& out) {
  const auto corrs = load_corrs_3d3d(corr_path);
  Json result;
  if (dist_threshold > 0.0) {
    const locgeo::RansacResult r = locgeo::register_ransac(
        corrs, dist_threshold, edge_ratio, iters, seed);
    result = locgeo::pose_to_json(r.pose);
    result["inlier_count"] = r.inlier_count;
    Json mask = Json::array();
    for (bool b : r.inliers) mask.push_back(b ? 1 : 0);
    result["inliers"] = mask;
  } else {
    result = locgeo::pose_to_json(locgeo::umeyama(corrs));
  }
  emit_json(result, out);
  return 0;
}

// ---- synth ----------------------------------------------------------------

int cmd_synth(const synthetic::ClutterParams& p, const std::string& out) {
  const auto records = synthetic::clutter_records(p);
  if (ends_with(out, ".ply")) {
    ply::write_ply(records, out);
  } else if (ends_with(out, ".json")) {
    scene::ToSceneOptions opt;
    opt.gamma = p.gamma;
    scene::save_scene_json(scene::to_scene(records, opt), out);
  } else {
    fail(ErrorCode::kSchema, out + ": unknown output format (.ply or .json)");
  }
  const Json summary{{"count", records.size()}, {"out", out}};
  std::cout << summary.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safe navigation in ellipsoid-splat maps"};
  app.require_subcommand(1);

  // plan
  PlanFlags plan_flags;
  std::string plan_out = "trajectory.json";
  std::string plan_corridor_out = "corridor.json";
  std::string plan_stats_out;
  std::string plan_format = "json";
  int plan_samples = 200;
  bool plan_omit_timings = false;
  CLI::App* plan = app.add_subcommand(
      "plan", "Plan a safe trajectory between two points");
  plan->set_config("--config", "",
                   "Read key=value defaults from a file (flags win)");
  add_plan_flags(plan, plan_flags, true);
  plan->add_option("--out", plan_out, "Trajectory output path");
  plan->add_option("--corridor-out", plan_corridor_out,
                   "Corridor output path (empty to skip)");
  plan->add_option("--stats-out", plan_stats_out,
                   "Stats output path (default: stdout)");
  plan->add_option("--format", plan_format,
                   "Trajectory output format: json or csv");
  plan->add_option("--samples", plan_samples,
                   "Rows in the sampled csv output");
  plan->add_flag("--omit-timings", plan_omit_timings,
                 "Zero timing fields for byte-reproducible outputs");

  // check
  SceneFlags check_scene;
  std::string check_traj, check_out;
  double check_radius = 0.25;
  int check_samples = 100;
  CLI::App* check = app.add_subcommand(
      "check", "Verify a trajectory against a scene (exit 0 iff clear)");
  check->set_config("--config", "",
                    "Read key=value defaults from a file (flags win)");
  add_scene_flags(check, check_scene);
  check->add_option("--trajectory", check_traj, "Trajectory JSON to verify")
      ->required();
  check->add_option("--radius", check_radius, "Robot body radius");
  check->add_option("--samples", check_samples, "Samples per trajectory piece");
  check->add_option("--out", check_out, "Report output path (default: stdout)");

  // voxelize
  SceneFlags vox_scene;
  std::vector<int> vox_resolution{80};
  double vox_pad = 0.0, vox_inflate = 0.0;
  std::string vox_out = "grid.bin";
  CLI::App* vox = app.add_subcommand(
      "voxelize", "Rasterize a scene into a binary occupancy grid");
  vox->set_config("--config", "",
                  "Read key=value defaults from a file (flags win)");
  add_scene_flags(vox, vox_scene);
  vox->add_option("--resolution", vox_resolution,
                  "Grid cells per axis: N or Nx,Ny,Nz")
      ->delimiter(',');
  vox->add_option("--pad", vox_pad, "Margin around the scene bounds");
  vox->add_option("--inflate", vox_inflate,
                  "Also inflate obstacles by this radius (0 = off)");
  vox->add_option("--out", vox_out, "Grid output path");

  // bench
  PlanFlags bench_flags;
  int bench_trials = 100;
  int bench_samples = 100;
  std::string bench_out;
  bool bench_omit_timings = false;
  CLI::App* bench = app.add_subcommand(
      "bench", "Plan between antipodal circle points and verify each result");
  bench->set_config("--config", "",
                    "Read key=value defaults from a file (flags win)");
  add_plan_flags(bench, bench_flags, false);
  bench->add_option("--trials", bench_trials, "Number of start/goal pairs");
  bench->add_option("--samples", bench_samples,
                    "Verification samples per trajectory piece");
  bench->add_option("--out", bench_out, "CSV output path (default: stdout)");
  bench->add_flag("--omit-timings", bench_omit_timings,
                  "Zero timing columns for byte-reproducible outputs");

  // pnp
  std::string pnp_corrs, pnp_intr, pnp_init, pnp_out;
  double pnp_threshold = 0.0;
  int pnp_iters = 64;
  std::uint64_t pnp_seed = 0;
  CLI::App* pnp = app.add_subcommand(
      "pnp", "Camera pose from 2D-3D correspondences (refine or RANSAC)");
  pnp->add_option("--correspondences", pnp_corrs,
                  "u,v,X,Y,Z rows (.csv) or array of 5-number arrays (.json)")
      ->required();
  pnp->add_option("--intrinsics", pnp_intr,
                  "Pinhole intrinsics JSON {fx,fy,cx,cy,width,height}")
      ->required();
  pnp->add_option("--init", pnp_init, "Initial pose JSON (default: identity)");
  pnp->add_option("--px-threshold", pnp_threshold,
                  "RANSAC inlier threshold in pixels (0 = refine only)");
  pnp->add_option("--iters", pnp_iters, "RANSAC hypothesis count");
  pnp->add_option("--seed", pnp_seed, "Random seed");
  pnp->add_option("--out", pnp_out, "Pose output path (default: stdout)");

  // register
  std::string reg_corrs, reg_out;
  double reg_threshold = 0.0;
  double reg_edge_ratio = 0.1;
  int reg_iters = 256;
  std::uint64_t reg_seed = 0;
  CLI::App* reg = app.add_subcommand(
      "register", "Rigid alignment from 3D-3D correspondences");
  reg->add_option("--correspondences", reg_corrs,
                  "pX,pY,pZ,qX,qY,qZ rows (.csv) or array of 6-number arrays "
                  "(.json)")
      ->required();
  reg->add_option("--dist-threshold", reg_threshold,
                  "RANSAC inlier distance (0 = direct least-squares fit)");
  reg->add_option("--edge-ratio", reg_edge_ratio,
                  "Edge-length compatibility ratio for hypothesis filtering");
  reg->add_option("--iters", reg_iters, "RANSAC hypothesis count");
  reg->add_option("--seed", reg_seed, "Random seed");
  reg->add_option("--out", reg_out, "Pose output path (default: stdout)");

  // synth
  synthetic::ClutterParams synth_params;
  std::string synth_out = "scene.ply";
  CLI::App* synth = app.add_subcommand(
      "synth", "Generate the cluttered-cylinder fixture scene");
  synth->add_option("--count", synth_params.count, "Number of splats");
  synth->add_option("--core-radius", synth_params.core_radius,
                    "Radius of the cluttered cylinder");
  synth->add_option("--height", synth_params.height, "Height of the clutter");
  synth->add_option("--axis-min", synth_params.axis_min,
                    "Smallest ellipsoid semi-axis");
  synth->add_option("--axis-max", synth_params.axis_max,
                    "Largest ellipsoid semi-axis");
  synth->add_option("--gamma", synth_params.gamma,
                    "Confidence mass the sizes are calibrated for");
  synth->add_option("--seed", synth_params.seed, "Random seed");
  synth->add_option("--out", synth_out, "Scene output path (.ply or .json)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (plan->parsed())
      return cmd_plan(plan_flags, plan_out, plan_corridor_out, plan_stats_out,
                      plan_format, plan_samples, plan_omit_timings);
    if (check->parsed())
      return cmd_check(check_scene, check_traj, check_radius, check_samples,
                       check_out);
    if (vox->parsed())
      return cmd_voxelize(vox_scene, vox_resolution, vox_pad, vox_inflate,
                          vox_out);
    if (bench->parsed())
      return cmd_bench(bench_flags, bench_trials, bench_samples, bench_out,
                       bench_omit_timings);
    if (pnp->parsed())
      return cmd_pnp(pnp_corrs, pnp_intr, pnp_init, pnp_threshold, pnp_iters,
                     pnp_seed, pnp_out);
    if (reg->parsed())
      return cmd_register(reg_corrs, reg_threshold, reg_edge_ratio, reg_iters,
                          reg_seed, reg_out);
    if (synth->parsed()) return cmd_synth(synth_params, synth_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
