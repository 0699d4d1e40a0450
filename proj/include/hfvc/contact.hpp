#pragma once

#include <algorithm>
#include <optional>
#include <vector>

#include "hfvc/errors.hpp"
#include "hfvc/geom.hpp"
#include "hfvc/scene.hpp"

namespace hfvc::contact {

using geom::BodyTwist;
using geom::RigidTransform;
using scene::ObjectPrimitive;
using scene::Plane;
using scene::ShelfEnv;

enum class ContactOwner { Environment, Robot };
enum class ContactMode { Unset, Sticking, Sliding, Separating };

inline constexpr double kDetectTol = 1e-3;   // m, vertex-on-plane band
inline constexpr double kModeTol = 2e-3;     // m, displacement split between modes

struct Contact {
  Vec3 position{Vec3::Zero()};       // world
  Vec3 normal{Vec3::UnitZ()};        // unit, pointing into the object
  double mu = 0.5;
  ContactOwner owner = ContactOwner::Environment;
  ContactMode mode = ContactMode::Unset;
  Vec3 point_in_object{Vec3::Zero()};  // body-frame anchor, fixed per skill
  Vec3 slip_direction{Vec3::Zero()};   // world tangential motion (sliding only)
  int plane_id = -1;
  int vertex_id = -1;
};

/// Velocity equality rows over the stacked object/hand body twists,
/// N [xi_o; xi_h] = 0 with 12 columns. Row labels track the owning contact.
struct VelocityConstraint {
  MatX n{MatX::Zero(0, 12)};
  std::vector<int> row_contact;  // index into the source contact list
};

struct FrictionPyramid {
  std::vector<Vec3> generators;
  Vec3 normal{Vec3::UnitZ()};
  double mu = 0.0;
};

/// One contact per object vertex within tol of an environment plane.
/// Ordering is deterministic: by (plane id, vertex id).
inline std::vector<Contact> detect_contacts(const RigidTransform& object_pose,
                                            const ObjectPrimitive& primitive,
                                            const ShelfEnv& env, double tol = kDetectTol) {
  if (!(tol > 0.0)) throw std::invalid_argument("detect_contacts: tol must be positive");

  const Vec3 center = object_pose.translation;
  const Vec3 shelf_center = env.interior_center();
  const double reach = 0.5 * (Vec3(env.interior.x(), env.interior.y(), env.interior.z()).norm()) +
                       primitive.bounding_diagonal();
  if ((center - shelf_center).norm() > reach) {
    throw DegenerateSceneError("detect_contacts: object far outside the shelf interior");
  }

  auto planes = env.planes();
  std::sort(planes.begin(), planes.end(),
            [](const Plane& a, const Plane& b) { return a.id < b.id; });
  const auto verts = primitive.vertices();

  std::vector<Contact> out;
  for (const auto& plane : planes) {
    for (size_t vi = 0; vi < verts.size(); ++vi) {
      const Vec3 p = object_pose * verts[vi];
      if (std::abs(plane.signed_distance(p)) <= tol) {
        Contact c;
        c.position = p;
        c.normal = plane.inward_normal;
        c.mu = primitive.mu;
        c.owner = ContactOwner::Environment;
        c.point_in_object = verts[vi];
        c.plane_id = plane.id;
        c.vertex_id = static_cast<int>(vi);
        out.push_back(c);
      }
    }
  }
  return out;
}

/// Classify each environment contact by what the start->goal displacement
/// does to it: leaves the plane -> separating, moves along it -> sliding,
/// otherwise sticking. Robot contacts are always sticking.
inline std::vector<Contact> derive_contact_modes(std::vector<Contact> contacts,
                                                 const RigidTransform& start,
                                                 const RigidTransform& goal,
                                                 double tol = kModeTol) {
  const RigidTransform delta = goal * start.inverse();
  for (auto& c : contacts) {
    if (c.owner == ContactOwner::Robot) {
      c.mode = ContactMode::Sticking;
      continue;
    }
    const Vec3 p_goal = delta * c.position;
    const Vec3 motion = p_goal - c.position;
    const double normal_gain = motion.dot(c.normal);
    if (normal_gain > tol) {
      c.mode = ContactMode::Separating;
      c.slip_direction = Vec3::Zero();
      continue;
    }
    const Vec3 tangential = motion - normal_gain * c.normal;
    if (tangential.norm() > tol) {
      c.mode = ContactMode::Sliding;
      c.slip_direction = tangential.normalized();
    } else {
      c.mode = ContactMode::Sticking;
      c.slip_direction = Vec3::Zero();
    }
  }
  return contacts;
}

/// World velocity of a body-frame point as a linear map of the body twist.
inline Eigen::Matrix<double, 3, 6> point_velocity_map(const RigidTransform& pose,
                                                      const Vec3& point_in_body) {
  Eigen::Matrix<double, 3, 6> g;
  g.leftCols<3>() = Mat3::Identity();
  g.rightCols<3>() = -geom::skew(point_in_body);
  return pose.rotation_matrix() * g;
}

inline VelocityConstraint build_velocity_constraint(const std::vector<Contact>& contacts,
                                                    const RigidTransform& object_pose,
                                                    const RigidTransform& ee_pose) {
  int rows = 0;
  for (const auto& c : contacts) {
    if (c.mode == ContactMode::Unset) {
      throw ContractViolation("build_velocity_constraint: contact mode unset");
    }
    if (c.owner == ContactOwner::Robot) rows += 3;
    else if (c.mode == ContactMode::Sticking) rows += 3;
    else if (c.mode == ContactMode::Sliding) rows += 1;
  }

  VelocityConstraint vc;
  vc.n = MatX::Zero(rows, 12);
  vc.row_contact.resize(rows);
  int r = 0;
  for (size_t ci = 0; ci < contacts.size(); ++ci) {
    const auto& c = contacts[ci];
    const Vec3 r_obj = object_pose.inverse() * c.position;
    const auto g_obj = point_velocity_map(object_pose, r_obj);
    if (c.owner == ContactOwner::Robot) {
      const Vec3 r_hand = ee_pose.inverse() * c.position;
      const auto g_hand = point_velocity_map(ee_pose, r_hand);
      vc.n.block<3, 6>(r, 0) = g_obj;
      vc.n.block<3, 6>(r, 6) = -g_hand;
      vc.row_contact[r] = vc.row_contact[r + 1] = vc.row_contact[r + 2] = static_cast<int>(ci);
      r += 3;
    } else if (c.mode == ContactMode::Sticking) {
      vc.n.block<3, 6>(r, 0) = g_obj;
      vc.row_contact[r] = vc.row_contact[r + 1] = vc.row_contact[r + 2] = static_cast<int>(ci);
      r += 3;
    } else if (c.mode == ContactMode::Sliding) {
      vc.n.block<1, 6>(r, 0) = c.normal.transpose() * g_obj;
      vc.row_contact[r] = static_cast<int>(ci);
      r += 1;
    }
  }
  return vc;
}

/// k generators evenly spaced around the normal, each tilted by atan(mu);
/// their nonnegative span is the inscribed pyramid of the Coulomb cone.
inline FrictionPyramid friction_pyramid(const Vec3& normal, double mu, int k = 4) {
  if (k < 3) throw std::invalid_argument("friction_pyramid: need at least 3 facets");
  if (!(mu >= 0.0)) throw std::invalid_argument("friction_pyramid: mu must be nonnegative");
  FrictionPyramid fp;
  fp.normal = normal.normalized();
  fp.mu = mu;
  const auto [t1, t2] = geom::tangent_basis(fp.normal);
  fp.generators.reserve(k);
  for (int i = 0; i < k; ++i) {
    const double a = 2.0 * M_PI * i / k;
    const Vec3 g = fp.normal + mu * (std::cos(a) * t1 + std::sin(a) * t2);
    fp.generators.push_back(g.normalized());
  }
  return fp;
}

}  // namespace hfvc::contact
