#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <stdexcept>
#include <string>

namespace tdsim {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// Base class for all toolkit errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad scenario/graph/input structure: caught before any numerics run.
struct ValidationError : Error {
  using Error::Error;
};

/// Failure during evaluation (non-finite values, singularities, range errors).
struct NumericError : Error {
  using Error::Error;
};

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

/// Rotation vector (axis * angle) of q, the log map. Small-angle safe.
inline Vec3 rotation_vector(const Quat& q) {
  Quat qn = q.normalized();
  if (qn.w() < 0) qn.coeffs() = -qn.coeffs();
  const Vec3 im(qn.x(), qn.y(), qn.z());
  const double s = im.norm();
  if (s < 1e-12) return 2.0 * im;
  return (2.0 * std::atan2(s, qn.w()) / s) * im;
}

inline Quat quat_from_rotation_vector(const Vec3& phi) {
  const double a = phi.norm();
  if (a < 1e-12) return Quat(1.0, 0.5 * phi.x(), 0.5 * phi.y(), 0.5 * phi.z()).normalized();
  return Quat(Eigen::AngleAxisd(a, phi / a));
}

}  // namespace tdsim
