#pragma once

#include "hfvc/contact.hpp"
#include "hfvc/scene.hpp"
#include "hfvc/synth.hpp"

namespace fixtures {

using namespace hfvc;
using contact::Contact;
using contact::ContactMode;
using contact::ContactOwner;
using geom::RigidTransform;
using scene::ObjectPrimitive;
using scene::ShelfEnv;

inline ShelfEnv shelf(const Vec3& interior = Vec3(0.4, 0.3, 0.25), bool ceiling = true) {
  ShelfEnv env;
  env.interior = interior;
  env.has_ceiling = ceiling;
  return env;
}

inline ObjectPrimitive cube(double side = 0.1, double mass = 0.1, double mu = 0.5) {
  return ObjectPrimitive::cuboid(Vec3(side, side, side), mass, mu);
}

inline RigidTransform resting(const ObjectPrimitive& prim, double x = 0.0, double y = 0.0) {
  return RigidTransform::from_translation(Vec3(x, y, prim.half_extents().z()));
}

/// Synthesis state for a skill that starts at `start` and aims at `subgoal`,
/// with the hand at a surface point given in the object frame. The contact
/// normal is the inward surface normal at that point.
inline synth::SynthesisState make_state(const ObjectPrimitive& prim, const ShelfEnv& env,
                                        const RigidTransform& start,
                                        const RigidTransform& subgoal,
                                        const Vec3& contact_in_object,
                                        const Vec3& inward_normal_in_object) {
  synth::SynthesisState st;
  st.pose_estimate = start;
  st.subgoal = subgoal;
  st.object = prim;
  st.env_contacts = contact::derive_contact_modes(
      contact::detect_contacts(start, prim, env), start, subgoal);

  st.robot_contact.owner = ContactOwner::Robot;
  st.robot_contact.mode = ContactMode::Sticking;
  st.robot_contact.point_in_object = contact_in_object;
  st.robot_contact.mu = st.hand_mu;
  st.robot_normal_in_object = inward_normal_in_object.normalized();
  st.robot_contact.position = start * contact_in_object;
  st.robot_contact.normal = (start.rotation * st.robot_normal_in_object).normalized();

  st.ee_pose = RigidTransform::from_translation(st.robot_contact.position);
  return st;
}

/// Hand on top, slide along +x by one body length.
inline synth::SynthesisState slide_state(double mass = 0.1, double mu = 0.5) {
  const auto prim = cube(0.1, mass, mu);
  const auto env = shelf();
  const auto start = resting(prim);
  const auto goal = RigidTransform::from_translation(Vec3(0.1, 0, 0)) * start;
  return make_state(prim, env, start, goal, Vec3(0, 0, 0.05), Vec3(0, 0, -1));
}

/// Hand on the -x face, push along +x (normal parallel to motion).
inline synth::SynthesisState push_state() {
  const auto prim = cube();
  const auto env = shelf();
  const auto start = resting(prim);
  const auto goal = RigidTransform::from_translation(Vec3(0.08, 0, 0)) * start;
  return make_state(prim, env, start, goal, Vec3(-0.05, 0, 0), Vec3(1, 0, 0));
}

}  // namespace fixtures
