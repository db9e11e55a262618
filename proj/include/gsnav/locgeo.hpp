#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "gsnav/error.hpp"
#include "gsnav/json_util.hpp"
#include "gsnav/math.hpp"
#include "gsnav/rng.hpp"

namespace gsnav::locgeo {

/// World-to-camera rigid transform: x_camera = rot * x_world + trans.
struct Pose {
  Mat3 rot = Mat3::Identity();
  Vec3 trans = Vec3::Zero();
};

struct CameraIntrinsics {
  double fx = 0.0, fy = 0.0;
  double cx = 0.0, cy = 0.0;
  int width = 0, height = 0;

  void validate() const {
    if (!(fx > 0.0 && fy > 0.0))
      fail(ErrorCode::kDomain, "intrinsics: focal lengths must be positive");
    if (width > 0 && height > 0 &&
        !(cx >= 0.0 && cx <= width && cy >= 0.0 && cy <= height))
      fail(ErrorCode::kDomain, "intrinsics: principal point outside image");
  }
};

struct Correspondence2D3D {
  Vec2 pixel = Vec2::Zero();
  Vec3 point = Vec3::Zero();
};

struct Correspondence3D3D {
  Vec3 p = Vec3::Zero();  // map cloud
  Vec3 q = Vec3::Zero();  // camera cloud
};

struct ProjectResult {
  Vec2 pixel = Vec2::Zero();
  bool behind = false;  // camera-frame depth <= 1e-9
};

inline ProjectResult project(const CameraIntrinsics& intr, const Pose& pose,
                             const Vec3& point) {
  const Vec3 xc = pose.rot * point + pose.trans;
  ProjectResult out;
  if (xc[2] <= 1e-9) {
    out.behind = true;
    return out;
  }
  out.pixel = Vec2(intr.fx * xc[0] / xc[2] + intr.cx,
                   intr.fy * xc[1] / xc[2] + intr.cy);
  return out;
}

/// Camera-frame point for a pixel at a given depth; inverse of project at the
/// identity pose.
inline Vec3 backproject(const CameraIntrinsics& intr, const Vec2& pixel,
                        double depth) {
  if (!(depth > 0.0)) fail(ErrorCode::kDomain, "backproject: depth must be positive");
  return Vec3((pixel[0] - intr.cx) / intr.fx * depth,
              (pixel[1] - intr.cy) / intr.fy * depth, depth);
}

namespace detail {

/// Total squared reprojection error; +inf when any point falls behind the
/// camera (such a pose can never be accepted).
inline double reprojection_error(const std::vector<Correspondence2D3D>& corrs,
                                 const CameraIntrinsics& intr, const Pose& pose) {
  double err = 0.0;
  for (const Correspondence2D3D& c : corrs) {
    const ProjectResult pr = project(intr, pose, c.point);
    if (pr.behind) return std::numeric_limits<double>::infinity();
    err += (c.pixel - pr.pixel).squaredNorm();
  }
  return err;
}

/// Residual (observed - projected) and its 2x6 Jacobian of the *projection*
/// in the tangent parameterization [omega, t], rotation perturbed on the left
/// (R <- Exp(omega) R).  Returns false when the point sits behind the camera.
inline bool reprojection_jacobian(const CameraIntrinsics& intr,
                                  const Pose& pose,
                                  const Correspondence2D3D& c, Vec2& residual,
                                  Eigen::Matrix<double, 2, 6>& jac) {
  const Vec3 xc = pose.rot * c.point + pose.trans;
  if (xc[2] <= 1e-9) return false;
  const double inv_z = 1.0 / xc[2];
  Eigen::Matrix<double, 2, 3> dpix;
  dpix << intr.fx * inv_z, 0.0, -intr.fx * xc[0] * inv_z * inv_z,
      0.0, intr.fy * inv_z, -intr.fy * xc[1] * inv_z * inv_z;
  Eigen::Matrix<double, 3, 6> dxc;
  dxc.leftCols<3>() = -skew(pose.rot * c.point);
  dxc.rightCols<3>() = Mat3::Identity();
  jac = dpix * dxc;
  residual = c.pixel - Vec2(intr.fx * xc[0] * inv_z + intr.cx,
                            intr.fy * xc[1] * inv_z + intr.cy);
  return true;
}

}  // namespace detail

/// Levenberg-Marquardt reprojection minimization with the rotation updated on
/// its tangent (left perturbation R <- Exp(w) R).  Stops on gradient norm <=
/// tol or max_iter.  Damping 1e-3, x10 on reject / /10 on accept.
inline Pose pnp_refine(const std::vector<Correspondence2D3D>& corrs,
                       const CameraIntrinsics& intr, const Pose& init,
                       int max_iter = 100, double tol = 1e-10) {
  intr.validate();
  if (corrs.size() < 4)
    fail(ErrorCode::kDomain, "pnp_refine: need at least 4 correspondences");
  Pose pose = init;
  pose.rot = project_rotation(pose.rot);
  double err = detail::reprojection_error(corrs, intr, pose);
  double damping = 1e-3;
  for (int iter = 0; iter < max_iter; ++iter) {
    // Accumulate normal equations over points in front of the camera.
    Eigen::Matrix<double, 6, 6> hess = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> grad = Eigen::Matrix<double, 6, 1>::Zero();
    int usable = 0;
    for (const Correspondence2D3D& c : corrs) {
      Vec2 residual;
      Eigen::Matrix<double, 2, 6> jac;
      if (!detail::reprojection_jacobian(intr, pose, c, residual, jac))
        continue;
      ++usable;
      hess += jac.transpose() * jac;
      grad += jac.transpose() * residual;
    }
    if (usable < 4)
      fail(ErrorCode::kDomain,
           "pnp_refine: degenerate configuration (fewer than 4 usable points)");
    if (grad.norm() <= tol) break;
    bool stepped = false;
    for (int attempt = 0; attempt < 25 && !stepped; ++attempt) {
      Eigen::Matrix<double, 6, 6> sys = hess;
      sys.diagonal().array() += damping;
      const Eigen::Matrix<double, 6, 1> delta = sys.ldlt().solve(grad);
      if (delta.allFinite()) {
        Pose cand;
        cand.rot = so3_exp(delta.head<3>()) * pose.rot;
        cand.trans = pose.trans + delta.tail<3>();
        const double cand_err = detail::reprojection_error(corrs, intr, cand);
        if (cand_err < err) {
          pose = cand;
          err = cand_err;
          damping = std::max(damping * 0.1, 1e-12);
          stepped = true;
          break;
        }
      }
      damping *= 10.0;
      if (damping > 1e12)
        fail(ErrorCode::kDomain,
             "pnp_refine: degenerate configuration (no damping recovery)");
    }
    if (!stepped) break;  // no improving step at any damping: local optimum
  }
  pose.rot = project_rotation(pose.rot);
  return pose;
}

struct RansacResult {
  Pose pose;
  std::vector<bool> inliers;
  int inlier_count = 0;
};

/// RANSAC over minimal 4-point sets: each hypothesis is refined from `init`
/// by pnp_refine; the hypothesis with the most reprojection inliers wins and
/// is re-refined on its full consensus set.  Deterministic for a fixed seed.
inline RansacResult pnp_ransac(const std::vector<Correspondence2D3D>& corrs,
                               const CameraIntrinsics& intr, const Pose& init,
                               double px_threshold, int iters, std::uint64_t seed) {
  intr.validate();
  if (corrs.size() < 4)
    fail(ErrorCode::kDomain, "pnp_ransac: need at least 4 correspondences");
  if (!(px_threshold > 0.0))
    fail(ErrorCode::kDomain, "pnp_ransac: pixel threshold must be positive");
  if (iters < 1) fail(ErrorCode::kDomain, "pnp_ransac: need iters >= 1");
  const int n = static_cast<int>(corrs.size());
  auto count_inliers = [&](const Pose& pose, std::vector<bool>* mask) {
    int count = 0;
    if (mask != nullptr) mask->assign(corrs.size(), false);
    for (std::size_t i = 0; i < corrs.size(); ++i) {
      const ProjectResult pr = project(intr, pose, corrs[i].point);
      if (pr.behind) continue;
      if ((pr.pixel - corrs[i].pixel).norm() <= px_threshold) {
        ++count;
        if (mask != nullptr) (*mask)[i] = true;
      }
    }
    return count;
  };

  int best_count = 0;
  Pose best_pose;
  for (int h = 0; h < iters; ++h) {
    rng::CounterRng gen(seed, "pnp_ransac", static_cast<std::uint64_t>(h));
    int pick[4];
    for (int k = 0; k < 4; ++k) {
      for (;;) {
        pick[k] = static_cast<int>(gen.uniform_index(static_cast<std::size_t>(n)));
        bool fresh = true;
        for (int j = 0; j < k; ++j) fresh = fresh && pick[j] != pick[k];
        if (fresh) break;
      }
    }
    std::vector<Correspondence2D3D> minimal = {
        corrs[static_cast<std::size_t>(pick[0])],
        corrs[static_cast<std::size_t>(pick[1])],
        corrs[static_cast<std::size_t>(pick[2])],
        corrs[static_cast<std::size_t>(pick[3])]};
    Pose hyp;
    try {
      hyp = pnp_refine(minimal, intr, init, 50, 1e-12);
    } catch (const Error&) {
      continue;  // degenerate minimal set
    }
    const int count = count_inliers(hyp, nullptr);
    if (count > best_count) {
      best_count = count;
      best_pose = hyp;
    }
  }
  if (best_count < 4)
    fail(ErrorCode::kNoConsensus, "pnp_ransac: no hypothesis reached 4 inliers");

  RansacResult out;
  std::vector<bool> mask;
  count_inliers(best_pose, &mask);
  std::vector<Correspondence2D3D> consensus;
  for (std::size_t i = 0; i < corrs.size(); ++i)
    if (mask[i]) consensus.push_back(corrs[i]);
  out.pose = pnp_refine(consensus, intr, best_pose, 100, 1e-12);
  out.inlier_count = count_inliers(out.pose, &out.inliers);
  return out;
}

/// Closed-form rigid alignment minimizing sum ||p - (R q + t)||^2 via SVD of
/// the centered cross-covariance, determinant-corrected to a proper rotation.
inline Pose umeyama(const std::vector<Correspondence3D3D>& corrs) {
  if (corrs.size() < 3)
    fail(ErrorCode::kDomain, "umeyama: need at least 3 correspondences");
  Vec3 p_bar = Vec3::Zero(), q_bar = Vec3::Zero();
  for (const Correspondence3D3D& c : corrs) {
    p_bar += c.p;
    q_bar += c.q;
  }
  p_bar /= static_cast<double>(corrs.size());
  q_bar /= static_cast<double>(corrs.size());
  Mat3 cross = Mat3::Zero();
  for (const Correspondence3D3D& c : corrs)
    cross += (c.p - p_bar) * (c.q - q_bar).transpose();
  Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (sv[1] <= 1e-12 * std::max(sv[0], 1e-300))
    fail(ErrorCode::kDomain, "umeyama: degenerate (collinear) configuration");
  Mat3 fix = Mat3::Identity();
  fix(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0
                  ? -1.0
                  : 1.0;
  Pose pose;
  pose.rot = svd.matrixU() * fix * svd.matrixV().transpose();
  pose.trans = p_bar - pose.rot * q_bar;
  return pose;
}

/// RANSAC rigid registration from putative 3D-3D pairs: 3-point hypotheses
/// prefiltered by pairwise edge-length compatibility, consensus by aligned
/// distance.  Deterministic for a fixed seed.
inline RansacResult register_ransac(const std::vector<Correspondence3D3D>& putative,
                                    double dist_threshold, double edge_ratio,
                                    int iters, std::uint64_t seed) {
  if (putative.size() < 3)
    fail(ErrorCode::kDomain, "register_ransac: need at least 3 pairs");
  if (!(dist_threshold > 0.0))
    fail(ErrorCode::kDomain, "register_ransac: distance threshold must be positive");
  if (!(edge_ratio > 0.0))
    fail(ErrorCode::kDomain, "register_ransac: edge ratio must be positive");
  if (iters < 1) fail(ErrorCode::kDomain, "register_ransac: need iters >= 1");
  const int n = static_cast<int>(putative.size());
  auto count_inliers = [&](const Pose& pose, std::vector<bool>* mask) {
    int count = 0;
    if (mask != nullptr) mask->assign(putative.size(), false);
    for (std::size_t i = 0; i < putative.size(); ++i) {
      const double d =
          (putative[i].p - (pose.rot * putative[i].q + pose.trans)).norm();
      if (d <= dist_threshold) {
        ++count;
        if (mask != nullptr) (*mask)[i] = true;
      }
    }
    return count;
  };
  auto edges_compatible = [&](int i, int j) {
    const double dp = (putative[static_cast<std::size_t>(i)].p -
                       putative[static_cast<std::size_t>(j)].p)
                          .norm();
    const double dq = (putative[static_cast<std::size_t>(i)].q -
                       putative[static_cast<std::size_t>(j)].q)
                          .norm();
    return std::abs(dp - dq) <= edge_ratio * std::max(dp, dq);
  };

  int best_count = 0;
  Pose best_pose;
  for (int h = 0; h < iters; ++h) {
    rng::CounterRng gen(seed, "register_ransac", static_cast<std::uint64_t>(h));
    int pick[3];
    for (int k = 0; k < 3; ++k) {
      for (;;) {
        pick[k] = static_cast<int>(gen.uniform_index(static_cast<std::size_t>(n)));
        bool fresh = true;
        for (int j = 0; j < k; ++j) fresh = fresh && pick[j] != pick[k];
        if (fresh) break;
      }
    }
    if (!edges_compatible(pick[0], pick[1]) || !edges_compatible(pick[0], pick[2]) ||
        !edges_compatible(pick[1], pick[2]))
      continue;
    std::vector<Correspondence3D3D> minimal = {
        putative[static_cast<std::size_t>(pick[0])],
        putative[static_cast<std::size_t>(pick[1])],
        putative[static_cast<std::size_t>(pick[2])]};
    Pose hyp;
    try {
      hyp = umeyama(minimal);
    } catch (const Error&) {
      continue;
    }
    const int count = count_inliers(hyp, nullptr);
    if (count > best_count) {
      best_count = count;
      best_pose = hyp;
    }
  }
  if (best_count < 3)
    fail(ErrorCode::kNoConsensus, "register_ransac: no hypothesis reached 3 inliers");

  RansacResult out;
  std::vector<bool> mask;
  count_inliers(best_pose, &mask);
  std::vector<Correspondence3D3D> consensus;
  for (std::size_t i = 0; i < putative.size(); ++i)
    if (mask[i]) consensus.push_back(putative[i]);
  out.pose = umeyama(consensus);
  out.inlier_count = count_inliers(out.pose, &out.inliers);
  return out;
}

// --- serialization / loaders ---------------------------------------------

inline Json pose_to_json(const Pose& pose) {
  Json rows = Json::array();
  for (int i = 0; i < 3; ++i)
    rows.push_back(Json::array(
        {pose.rot(i, 0), pose.rot(i, 1), pose.rot(i, 2)}));
  return Json{{"rotation", rows},
              {"translation", vec3_to_json(pose.trans)},
              {"quaternion_wxyz",
               [&] {
                 const Vec4 q = rot_to_quat(pose.rot);
                 return Json::array({q[0], q[1], q[2], q[3]});
               }()}};
}

/// Inverse of pose_to_json.  Accepts either "quaternion_wxyz" or a 3x3
/// "rotation" row array (quaternion wins when both are present), plus
/// "translation".
inline Pose pose_from_json(const Json& j) {
  Pose pose;
  if (j.contains("quaternion_wxyz")) {
    const Json& q = j["quaternion_wxyz"];
    if (!q.is_array() || q.size() != 4)
      fail(ErrorCode::kSchema, "pose.quaternion_wxyz: expected [w, x, y, z]");
    pose.rot = quat_to_rot(Vec4(q[0].get<double>(), q[1].get<double>(),
                                q[2].get<double>(), q[3].get<double>()));
  } else if (j.contains("rotation")) {
    const Json& r = j["rotation"];
    if (!r.is_array() || r.size() != 3)
      fail(ErrorCode::kSchema, "pose.rotation: expected 3 rows of 3");
    for (int i = 0; i < 3; ++i) {
      if (!r[i].is_array() || r[i].size() != 3)
        fail(ErrorCode::kSchema, "pose.rotation: expected 3 rows of 3");
      for (int k = 0; k < 3; ++k) pose.rot(i, k) = r[i][k].get<double>();
    }
    pose.rot = project_rotation(pose.rot);
  } else {
    fail(ErrorCode::kSchema, "pose: need quaternion_wxyz or rotation");
  }
  pose.trans =
      json_to_vec3(require_field(j, "translation", "pose"), "pose.translation");
  return pose;
}

inline CameraIntrinsics intrinsics_from_json(const Json& j) {
  CameraIntrinsics intr;
  intr.fx = require_field(j, "fx", "intrinsics").get<double>();
  intr.fy = require_field(j, "fy", "intrinsics").get<double>();
  intr.cx = require_field(j, "cx", "intrinsics").get<double>();
  intr.cy = require_field(j, "cy", "intrinsics").get<double>();
  intr.width = j.value("width", 0);
  intr.height = j.value("height", 0);
  intr.validate();
  return intr;
}

namespace detail {

/// Parse numeric CSV/JSON correspondence rows of a fixed width.
inline std::vector<std::vector<double>> numeric_rows(const std::string& text,
                                                     std::size_t width,
                                                     const std::string& what) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::string cell;
    std::istringstream ls(line);
    bool numeric = true;
    while (std::getline(ls, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used])))
          ++used;
        if (used != cell.size()) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
        break;
      }
    }
    if (!numeric && lineno == 1 && rows.empty()) continue;  // header row
    if (!numeric)
      fail(ErrorCode::kParse,
           what + ": non-numeric value at line " + std::to_string(lineno));
    if (row.size() != width)
      fail(ErrorCode::kSchema, what + ": expected " + std::to_string(width) +
                                   " columns, got " + std::to_string(row.size()) +
                                   " at line " + std::to_string(lineno));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace detail

/// CSV rows u,v,X,Y,Z (one optional header line).
inline std::vector<Correspondence2D3D> corrs_2d3d_from_csv(const std::string& text) {
  std::vector<Correspondence2D3D> out;
  for (const auto& row : detail::numeric_rows(text, 5, "2d-3d correspondences"))
    out.push_back({Vec2(row[0], row[1]), Vec3(row[2], row[3], row[4])});
  return out;
}

/// CSV rows pX,pY,pZ,qX,qY,qZ (one optional header line).
inline std::vector<Correspondence3D3D> corrs_3d3d_from_csv(const std::string& text) {
  std::vector<Correspondence3D3D> out;
  for (const auto& row : detail::numeric_rows(text, 6, "3d-3d correspondences"))
    out.push_back({Vec3(row[0], row[1], row[2]), Vec3(row[3], row[4], row[5])});
  return out;
}

/// JSON array of [u,v,X,Y,Z] rows.
inline std::vector<Correspondence2D3D> corrs_2d3d_from_json(const Json& j) {
  std::vector<Correspondence2D3D> out;
  if (!j.is_array())
    fail(ErrorCode::kSchema, "2d-3d correspondences: expected an array");
  for (const Json& row : j) {
    if (!row.is_array() || row.size() != 5)
      fail(ErrorCode::kSchema, "2d-3d correspondences: rows must hold 5 numbers");
    out.push_back({Vec2(row[0].get<double>(), row[1].get<double>()),
                   Vec3(row[2].get<double>(), row[3].get<double>(),
                        row[4].get<double>())});
  }
  return out;
}

/// JSON array of [pX,pY,pZ,qX,qY,qZ] rows.
inline std::vector<Correspondence3D3D> corrs_3d3d_from_json(const Json& j) {
  std::vector<Correspondence3D3D> out;
  if (!j.is_array())
    fail(ErrorCode::kSchema, "3d-3d correspondences: expected an array");
  for (const Json& row : j) {
    if (!row.is_array() || row.size() != 6)
      fail(ErrorCode::kSchema, "3d-3d correspondences: rows must hold 6 numbers");
    out.push_back({Vec3(row[0].get<double>(), row[1].get<double>(),
                        row[2].get<double>()),
                   Vec3(row[3].get<double>(), row[4].get<double>(),
                        row[5].get<double>())});
  }
  return out;
}

}  // namespace gsnav::locgeo
