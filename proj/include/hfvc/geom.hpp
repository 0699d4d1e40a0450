#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace hfvc {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;
using Quat = Eigen::Quaterniond;

namespace geom {

inline Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return s;
}

/// Rigid pose as a unit quaternion plus a translation in meters.
/// File serialization order is (qw, qx, qy, qz, tx, ty, tz) everywhere.
struct RigidTransform {
  Quat rotation{1.0, 0.0, 0.0, 0.0};
  Vec3 translation{Vec3::Zero()};

  static RigidTransform identity() { return {}; }

  static RigidTransform from_translation(const Vec3& t) {
    return {Quat::Identity(), t};
  }

  static RigidTransform from_rotation(const Quat& q) {
    return {q.normalized(), Vec3::Zero()};
  }

  static RigidTransform from_axis_angle(const Vec3& axis, double angle,
                                        const Vec3& t = Vec3::Zero()) {
    return {Quat(Eigen::AngleAxisd(angle, axis.normalized())), t};
  }

  Vec3 operator*(const Vec3& p) const { return rotation * p + translation; }

  RigidTransform operator*(const RigidTransform& o) const {
    return {(rotation * o.rotation).normalized(),
            rotation * o.translation + translation};
  }

  RigidTransform inverse() const {
    const Quat qi = rotation.conjugate();
    return {qi, qi * (-translation)};
  }

  Mat3 rotation_matrix() const { return rotation.toRotationMatrix(); }
};

/// 6-D rigid-body velocity, stacked [linear; angular], expressed in the
/// owning body's frame.
struct BodyTwist {
  Vec3 linear{Vec3::Zero()};
  Vec3 angular{Vec3::Zero()};

  static BodyTwist zero() { return {}; }

  static BodyTwist from_stacked(const Vec6& v) {
    return {v.head<3>(), v.tail<3>()};
  }

  Vec6 stacked() const {
    Vec6 v;
    v << linear, angular;
    return v;
  }

  double norm() const { return stacked().norm(); }

  BodyTwist scaled(double k) const { return {k * linear, k * angular}; }
};

/// Translation/rotation split of the gap between two poses.
struct PoseDistance {
  double d = 0.0;      // meters
  double theta = 0.0;  // radians, geodesic, in [0, pi]
};

inline double rotation_angle(const Quat& a, const Quat& b) {
  Quat rel = a.conjugate() * b;
  rel.normalize();
  // 2*atan2 keeps precision near both 0 and pi.
  return 2.0 * std::atan2(rel.vec().norm(), std::abs(rel.w()));
}

inline PoseDistance pose_distance(const RigidTransform& a,
                                  const RigidTransform& b) {
  return {(a.translation - b.translation).norm(),
          rotation_angle(a.rotation, b.rotation)};
}

/// Constant-speed blend between two poses. Translation is linear, rotation
/// follows the shortest arc (the quaternion sign is resolved by slerp).
inline RigidTransform interpolate_pose(const RigidTransform& start,
                                       const RigidTransform& goal, double s) {
  if (!(s >= 0.0 && s <= 1.0)) {
    throw std::invalid_argument("interpolate_pose: s must lie in [0,1]");
  }
  RigidTransform out;
  out.rotation = start.rotation.slerp(s, goal.rotation).normalized();
  out.translation = (1.0 - s) * start.translation + s * goal.translation;
  return out;
}

/// Mean displacement of a point set carried by two poses. The point set is
/// caller-supplied (primitive vertices in this codebase).
inline double add_metric(std::span<const Vec3> points, const RigidTransform& pose_a,
                         const RigidTransform& pose_b) {
  if (points.empty()) {
    throw std::invalid_argument("add_metric: empty point set");
  }
  double acc = 0.0;
  for (const Vec3& p : points) {
    acc += (pose_a * p - pose_b * p).norm();
  }
  return acc / static_cast<double>(points.size());
}

inline Vec3 project_onto_plane(const Vec3& v, const Vec3& plane_normal) {
  if (std::abs(plane_normal.norm() - 1.0) > 1e-9) {
    throw std::invalid_argument("project_onto_plane: normal must be unit length");
  }
  return v - v.dot(plane_normal) * plane_normal;
}

/// exp: body twist -> relative transform. Rodrigues for the rotation, the
/// closed-form V matrix for the translation coupling.
inline RigidTransform se3_exp(const BodyTwist& xi) {
  const Vec3& w = xi.angular;
  const Vec3& v = xi.linear;
  const double th = w.norm();
  RigidTransform out;
  if (th < 1e-12) {
    out.rotation = Quat::Identity();
    out.translation = v + 0.5 * w.cross(v);
    return out;
  }
  out.rotation = Quat(Eigen::AngleAxisd(th, w / th));
  const Mat3 wx = skew(w);
  const Mat3 V = Mat3::Identity() + ((1.0 - std::cos(th)) / (th * th)) * wx +
                 ((th - std::sin(th)) / (th * th * th)) * wx * wx;
  out.translation = V * v;
  return out;
}

/// log: relative transform -> body twist, inverse of se3_exp.
inline BodyTwist se3_log(const RigidTransform& t) {
  Quat q = t.rotation.normalized();
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  const double th = 2.0 * std::atan2(q.vec().norm(), q.w());
  BodyTwist xi;
  if (th < 1e-12) {
    xi.angular = 2.0 * q.vec();
    xi.linear = t.translation - 0.5 * xi.angular.cross(t.translation);
    return xi;
  }
  xi.angular = (th / q.vec().norm()) * q.vec();
  const Mat3 wx = skew(xi.angular);
  double a;
  if (th > M_PI - 1e-6) {
    a = (1.0 / (th * th)) * (1.0 - (th * std::sin(th)) / (2.0 * (1.0 - std::cos(th))));
  } else {
    a = (1.0 / (th * th)) - (1.0 + std::cos(th)) / (2.0 * th * std::sin(th));
  }
  const Mat3 Vinv = Mat3::Identity() - 0.5 * wx + a * wx * wx;
  xi.linear = Vinv * t.translation;
  return xi;
}

/// Body twist taking `from` to `to` in one unit of time.
inline BodyTwist relative_twist(const RigidTransform& from,
                                const RigidTransform& to) {
  return se3_log(from.inverse() * to);
}

/// Integrate a body twist over dt: T <- T * exp(dt * xi).
inline RigidTransform integrate_pose(const RigidTransform& pose,
                                     const BodyTwist& xi, double dt) {
  return pose * se3_exp(xi.scaled(dt));
}

/// Rotation-vector (axis * angle) form of a relative rotation.
inline Vec3 rotation_vector(const Quat& q_in) {
  Quat q = q_in.normalized();
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  const double vn = q.vec().norm();
  if (vn < 1e-12) return 2.0 * q.vec();
  const double th = 2.0 * std::atan2(vn, q.w());
  return (th / vn) * q.vec();
}

/// Deterministic orthonormal complement of a unit vector; returns (t1, t2)
/// with t1 x t2 = n. For n = +z this yields t1 = +x, t2 = +y.
inline std::pair<Vec3, Vec3> tangent_basis(const Vec3& n) {
  Vec3 ref = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  Vec3 t1 = (ref - ref.dot(n) * n).normalized();
  Vec3 t2 = n.cross(t1);
  return {t1, t2};
}

}  // namespace geom
}  // namespace hfvc
