// Localization walkthrough on synthetic data: recover a camera pose from 2D-3D
// matches with an outlier-robust refinement, then align two point clouds with
// a RANSAC-wrapped closed-form fit.

#include <algorithm>
#include <cmath>
#include <iostream>

#include "gsnav/gsnav.hpp"

using namespace gsnav;

namespace {

double rotation_error_deg(const Mat3& a, const Mat3& b) {
  const double c =
      std::clamp(((a.transpose() * b).trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c) * 180.0 / M_PI;
}

}  // namespace

int main() {
  rng::CounterRng rng(42, "localize_demo");
  locgeo::CameraIntrinsics intr;
  intr.fx = 500.0;
  intr.fy = 505.0;
  intr.cx = 320.0;
  intr.cy = 240.0;
  intr.width = 640;
  intr.height = 480;

  // Ground-truth camera pose: a gentle tilt and offset.
  locgeo::Pose truth;
  truth.rot = so3_exp(Vec3(0.05, -0.2, 0.1));
  truth.trans = Vec3(0.3, -0.1, 0.2);

  // Points in front of the camera, observed through the truth pose; a third
  // of the pixels are corrupted to simulate bad matches.
  std::vector<locgeo::Correspondence2D3D> corrs;
  for (int i = 0; i < 90; ++i) {
    const Vec3 cam_point(rng.uniform(-1.5, 1.5), rng.uniform(-1.0, 1.0),
                         rng.uniform(2.0, 6.0));
    locgeo::Correspondence2D3D c;
    c.point = truth.rot.transpose() * (cam_point - truth.trans);
    c.pixel = locgeo::project(intr, truth, c.point).pixel;
    if (i >= 60) {
      const double ang = rng.uniform(0.0, 2.0 * M_PI);
      c.pixel += rng.uniform(30.0, 80.0) * Vec2(std::cos(ang), std::sin(ang));
    }
    corrs.push_back(c);
  }

  locgeo::Pose init;  // identity: far from the truth, close enough to converge
  const locgeo::RansacResult pnp =
      locgeo::pnp_ransac(corrs, intr, init, 2.0, 256, 7);
  std::cout << "pnp: " << pnp.inlier_count << "/" << corrs.size()
            << " inliers, rotation error "
            << rotation_error_deg(pnp.pose.rot, truth.rot)
            << " deg, translation error "
            << (pnp.pose.trans - truth.trans).norm() << "\n";

  // Cloud-to-cloud alignment: exact pairs plus a block of mismatches.
  locgeo::Pose map_from_cam;
  map_from_cam.rot = so3_exp(Vec3(0.4, 0.1, -0.3));
  map_from_cam.trans = Vec3(1.0, 2.0, -0.5);
  std::vector<locgeo::Correspondence3D3D> pairs;
  for (int i = 0; i < 60; ++i) {
    const Vec3 q(rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0),
                 rng.uniform(-3.0, 3.0));
    locgeo::Correspondence3D3D c;
    c.q = q;
    c.p = i < 45 ? Vec3(map_from_cam.rot * q + map_from_cam.trans)
                 : Vec3(rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0),
                        rng.uniform(-5.0, 5.0));
    pairs.push_back(c);
  }
  const locgeo::RansacResult reg = locgeo::register_ransac(pairs, 0.05, 0.1, 256, 7);
  std::cout << "register: " << reg.inlier_count << "/" << pairs.size()
            << " inliers, rotation error "
            << rotation_error_deg(reg.pose.rot, map_from_cam.rot)
            << " deg, translation error "
            << (reg.pose.trans - map_from_cam.trans).norm() << "\n";

  save_json(locgeo::pose_to_json(pnp.pose), "demo_camera_pose.json");
  std::cout << "wrote demo_camera_pose.json\n";
  return pnp.inlier_count >= 60 && reg.inlier_count >= 45 ? 0 : 1;
}
