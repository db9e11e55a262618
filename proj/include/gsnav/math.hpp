#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>

namespace gsnav {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec3i = Eigen::Vector3i;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat34 = Eigen::Matrix<double, 3, 4>;
using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;

/// Rotation matrix from a (w, x, y, z) quaternion; normalizes first so
/// serialized fixtures may carry unnormalized values.
inline Mat3 quat_to_rot(const Vec4& wxyz) {
  Eigen::Quaterniond q(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
  return q.normalized().toRotationMatrix();
}

inline Vec4 rot_to_quat(const Mat3& rot) {
  Eigen::Quaterniond q(rot);
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  return Vec4(q.w(), q.x(), q.y(), q.z());
}

/// Skew-symmetric cross-product matrix: skew(a) * b == a.cross(b).
inline Mat3 skew(const Vec3& a) {
  Mat3 s;
  s << 0.0, -a.z(), a.y(), a.z(), 0.0, -a.x(), -a.y(), a.x(), 0.0;
  return s;
}

/// Rodrigues exponential map so(3) -> SO(3).
inline Mat3 so3_exp(const Vec3& w) {
  const double th = w.norm();
  if (th < 1e-12) {
    const Mat3 k = skew(w);
    return Mat3::Identity() + k + 0.5 * k * k;
  }
  const Mat3 k = skew(w / th);
  return Mat3::Identity() + std::sin(th) * k + (1.0 - std::cos(th)) * k * k;
}

/// Nearest rotation matrix in Frobenius norm (SVD projection with det fix).
inline Mat3 project_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Mat3 flip = Mat3::Identity();
    flip(2, 2) = -1.0;
    r = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  return r;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double clamp01(double t) { return t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t); }

}  // namespace gsnav
