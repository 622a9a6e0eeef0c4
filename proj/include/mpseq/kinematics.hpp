#ifndef MPSEQ_KINEMATICS_HPP_
#define MPSEQ_KINEMATICS_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mpseq {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kMm = 1e-3;
inline constexpr double kDeg = kPi / 180.0;

// Default rotation weight for pose metrics, m/rad (1 deg ~ 1.7 mm).
inline constexpr double kDefaultRotWeight = 0.1;

// Rigid transform; rotation stored as a canonical rotation vector (|r| <= pi).
struct Pose {
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  Eigen::Vector3d rotation = Eigen::Vector3d::Zero();

  static Pose identity() { return {}; }
  static Pose from_vector(const Vector6d& v) {
    return {v.head<3>(), v.tail<3>()};
  }
  Vector6d vector() const {
    Vector6d v;
    v << translation, rotation;
    return v;
  }
  bool operator==(const Pose&) const = default;
};

struct Twist {
  Eigen::Vector3d linear = Eigen::Vector3d::Zero();
  Eigen::Vector3d angular = Eigen::Vector3d::Zero();

  static Twist from_vector(const Vector6d& v) { return {v.head<3>(), v.tail<3>()}; }
  Vector6d vector() const {
    Vector6d v;
    v << linear, angular;
    return v;
  }
  bool is_finite() const { return linear.allFinite() && angular.allFinite(); }
};

struct Wrench {
  Eigen::Vector3d force = Eigen::Vector3d::Zero();
  Eigen::Vector3d torque = Eigen::Vector3d::Zero();

  static Wrench from_vector(const Vector6d& v) { return {v.head<3>(), v.tail<3>()}; }
  Vector6d vector() const {
    Vector6d v;
    v << force, torque;
    return v;
  }
  bool is_finite() const { return force.allFinite() && torque.allFinite(); }
  Wrench operator-() const { return {-force, -torque}; }
};

inline Eigen::Matrix3d rotation_matrix(const Eigen::Vector3d& rv) {
  const double angle = rv.norm();
  if (angle == 0.0) return Eigen::Matrix3d::Identity();
  return Eigen::AngleAxisd(angle, rv / angle).toRotationMatrix();
}

// Logarithm of a rotation matrix, returned with angle in [0, pi].
inline Eigen::Vector3d rotation_vector(const Eigen::Matrix3d& r) {
  const Eigen::AngleAxisd aa(r);
  double angle = aa.angle();
  Eigen::Vector3d axis = aa.axis();
  if (angle > kPi) {
    angle = 2.0 * kPi - angle;
    axis = -axis;
  }
  if (angle == 0.0) return Eigen::Vector3d::Zero();
  return axis * angle;
}

// Maps any rotation vector onto its canonical representative.
inline Eigen::Vector3d canonical_rotation(const Eigen::Vector3d& rv) {
  if (rv.norm() <= kPi) return rv;
  return rotation_vector(rotation_matrix(rv));
}

inline Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

inline Pose compose(const Pose& a, const Pose& b) {
  Pose out;
  if (b.rotation.isZero(0.0) && b.translation.isZero(0.0)) return a;
  const Eigen::Matrix3d ra = rotation_matrix(a.rotation);
  out.translation = a.translation + ra * b.translation;
  if (b.rotation.isZero(0.0)) {
    out.rotation = a.rotation;
  } else if (a.rotation.isZero(0.0)) {
    out.rotation = canonical_rotation(b.rotation);
  } else {
    out.rotation = rotation_vector(ra * rotation_matrix(b.rotation));
  }
  return out;
}

inline Pose inverse(const Pose& p) {
  const Eigen::Matrix3d rt = rotation_matrix(p.rotation).transpose();
  return {-(rt * p.translation), -p.rotation};
}

// Relative rotation angle between two orientations, radians in [0, pi].
inline double rotation_angle_between(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const Eigen::Matrix3d rel = rotation_matrix(a).transpose() * rotation_matrix(b);
  const double c = std::clamp((rel.trace() - 1.0) * 0.5, -1.0, 1.0);
  // acos loses precision near 0; fall back to the skew part there.
  if (c > 0.99) {
    const Eigen::Vector3d s(rel(2, 1) - rel(1, 2), rel(0, 2) - rel(2, 0), rel(1, 0) - rel(0, 1));
    return std::atan2(0.5 * s.norm(), c);
  }
  return std::acos(c);
}

/// Weighted pose metric sqrt(|dt|^2 + (w_rot * theta)^2); result in meters.
inline double pose_distance(const Pose& a, const Pose& b, double w_rot = kDefaultRotWeight) {
  const double dt2 = (a.translation - b.translation).squaredNorm();
  const double th = rotation_angle_between(a.rotation, b.rotation);
  return std::sqrt(dt2 + w_rot * w_rot * th * th);
}

/// Advances a pose by a world-frame twist held for dt. The rotation pivots
/// about the pose origin, so the translation only sees the linear part.
inline Pose integrate(const Pose& p, const Twist& v, double dt) {
  Pose out;
  out.translation = p.translation + v.linear * dt;
  const Eigen::Vector3d dr = v.angular * dt;
  if (dr.isZero(0.0)) {
    out.rotation = p.rotation;
  } else {
    out.rotation = rotation_vector(rotation_matrix(dr) * rotation_matrix(p.rotation));
  }
  return out;
}

}  // namespace mpseq

#endif  // MPSEQ_KINEMATICS_HPP_
