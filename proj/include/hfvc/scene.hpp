#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "hfvc/errors.hpp"
#include "hfvc/geom.hpp"

namespace hfvc::scene {

using geom::RigidTransform;

enum class PrimitiveKind { Cuboid, Cylinder };

/// Manipulable rigid body. Cuboid dims are full extents (w, d, h); a
/// cylinder stores (r, r, h) with its axis along local z. Inertia comes
/// from uniform density about the body origin at the centroid.
struct ObjectPrimitive {
  PrimitiveKind kind = PrimitiveKind::Cuboid;
  Vec3 dims{0.1, 0.1, 0.1};
  double mass = 0.1;  // kg
  double mu = 0.5;

  static ObjectPrimitive cuboid(const Vec3& dims, double mass, double mu) {
    return {PrimitiveKind::Cuboid, dims, mass, mu};
  }

  static ObjectPrimitive cylinder(double radius, double height, double mass, double mu) {
    return {PrimitiveKind::Cylinder, Vec3(radius, radius, height), mass, mu};
  }

  double radius() const { return dims.x(); }
  double height() const { return dims.z(); }

  void validate() const {
    if (!(dims.minCoeff() > 0.0)) throw std::invalid_argument("primitive dims must be positive");
    if (!(mass > 0.0)) throw std::invalid_argument("primitive mass must be positive");
    if (!(mu >= 0.0)) throw std::invalid_argument("primitive mu must be nonnegative");
  }

  Mat3 inertia() const {
    Mat3 in = Mat3::Zero();
    if (kind == PrimitiveKind::Cuboid) {
      const double w = dims.x(), d = dims.y(), h = dims.z();
      in(0, 0) = mass / 12.0 * (d * d + h * h);
      in(1, 1) = mass / 12.0 * (w * w + h * h);
      in(2, 2) = mass / 12.0 * (w * w + d * d);
    } else {
      const double r = radius(), h = height();
      in(0, 0) = in(1, 1) = mass / 12.0 * (3.0 * r * r + h * h);
      in(2, 2) = 0.5 * mass * r * r;
    }
    return in;
  }

  /// Contact/ADD vertices in the body frame. Cuboids use the 8 corners;
  /// cylinders are discretized to 16 rim vertices per cap.
  std::vector<Vec3> vertices() const {
    std::vector<Vec3> out;
    if (kind == PrimitiveKind::Cuboid) {
      const Vec3 e = 0.5 * dims;
      for (int sx : {-1, 1})
        for (int sy : {-1, 1})
          for (int sz : {-1, 1}) out.emplace_back(sx * e.x(), sy * e.y(), sz * e.z());
    } else {
      constexpr int kRim = 16;
      for (int sz : {-1, 1}) {
        for (int i = 0; i < kRim; ++i) {
          const double a = 2.0 * M_PI * i / kRim;
          out.emplace_back(radius() * std::cos(a), radius() * std::sin(a),
                           sz * 0.5 * height());
        }
      }
    }
    return out;
  }

  Vec3 half_extents() const {
    if (kind == PrimitiveKind::Cuboid) return 0.5 * dims;
    return Vec3(radius(), radius(), 0.5 * height());
  }

  double bounding_diagonal() const { return 2.0 * half_extents().norm(); }
};

/// One face of the shelf interior, in world coordinates. The normal points
/// into the interior (and therefore into any object resting on the face).
struct Plane {
  int id = 0;
  std::string name;
  Vec3 point{Vec3::Zero()};
  Vec3 inward_normal{Vec3::UnitZ()};

  double signed_distance(const Vec3& p) const {
    return inward_normal.dot(p - point);
  }
};

/// Rectangular shelf. Local frame: origin at the center of the floor, x
/// across the width, y into the depth (the opening faces -y), z up.
struct ShelfEnv {
  Vec3 interior{0.4, 0.3, 0.25};  // width, depth, height
  RigidTransform pose;
  bool has_ceiling = true;

  std::vector<Plane> planes() const {
    const Mat3 r = pose.rotation_matrix();
    const Vec3 x = r.col(0), y = r.col(1), z = r.col(2);
    const Vec3 o = pose.translation;
    std::vector<Plane> out;
    out.push_back({0, "floor", o, z});
    out.push_back({1, "left", o - 0.5 * interior.x() * x, x});
    out.push_back({2, "right", o + 0.5 * interior.x() * x, -x});
    out.push_back({3, "back", o + 0.5 * interior.y() * y, -y});
    if (has_ceiling) out.push_back({4, "ceiling", o + interior.z() * z, -z});
    return out;
  }

  /// Direction from the interior toward the opening.
  Vec3 opening_direction() const { return -pose.rotation_matrix().col(1); }

  Vec3 interior_center() const {
    return pose * Vec3(0.0, 0.0, 0.5 * interior.z());
  }

  bool inside(const Vec3& p, double margin = 0.0) const {
    for (const auto& pl : planes()) {
      if (pl.signed_distance(p) < margin) return false;
    }
    return true;
  }
};

}  // namespace hfvc::scene
