#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hfvc/geom.hpp"
#include "hfvc/scene.hpp"
#include "hfvc/synth.hpp"

namespace hfvc {

namespace scene {

/// Sticking hand-object coupling, anchored in the object frame.
struct HandAttachment {
  Vec3 point_in_object{Vec3::Zero()};
  Vec3 normal_in_object{Vec3::UnitZ()};  // inward (into the object)
};

/// Full simulator state. The attachment and fall velocity are stepping
/// state: the coupling persists until released or broken, and an unsupported
/// object carries its ballistic velocity between sub-steps.
struct SceneState {
  ShelfEnv env;
  ObjectPrimitive object;
  geom::RigidTransform object_pose;
  geom::RigidTransform ee_pose;
  double time = 0.0;
  std::optional<HandAttachment> hand;
  Vec3 fall_velocity{Vec3::Zero()};
};

/// Inward surface normal of the primitive at a body-frame surface point.
inline Vec3 surface_inward_normal(const ObjectPrimitive& prim, const Vec3& p) {
  if (prim.kind == PrimitiveKind::Cuboid) {
    const Vec3 he = prim.half_extents();
    int axis = 0;
    double best = std::abs(std::abs(p.x()) - he.x());
    for (int i = 1; i < 3; ++i) {
      const double gap = std::abs(std::abs(p(i)) - he(i));
      if (gap < best) {
        best = gap;
        axis = i;
      }
    }
    Vec3 n = Vec3::Zero();
    n(axis) = p(axis) >= 0.0 ? -1.0 : 1.0;
    return n;
  }
  const double cap_gap = std::abs(std::abs(p.z()) - 0.5 * prim.height());
  const double side_gap = std::abs(Vec3(p.x(), p.y(), 0.0).norm() - prim.radius());
  if (cap_gap <= side_gap) {
    return Vec3(0.0, 0.0, p.z() >= 0.0 ? -1.0 : 1.0);
  }
  const Vec3 radial(p.x(), p.y(), 0.0);
  return radial.norm() > 1e-12 ? Vec3(-radial.normalized()) : Vec3(0, 0, -1);
}

}  // namespace scene

namespace skills {

enum class SkillKind { Hfvc, PickPlace };

/// One executable action: either an HFVC motion toward a subgoal through a
/// given robot-object contact point, or a pick-and-place via a grasp.
struct SkillParameter {
  SkillKind kind = SkillKind::Hfvc;
  geom::RigidTransform initial_pose;
  geom::RigidTransform subgoal_pose;
  Vec3 contact_point{Vec3::Zero()};       // object frame, hfvc only
  geom::RigidTransform grasp_pose;        // pick-place only
};

enum class FailureReason {
  None,
  MovedTooLittle,
  TooFarFromSubgoal,
  PostReleaseMotion,
  ApproachInfeasible,
  ContactResolution,
  SubgoalInCollision,
};

inline const char* to_string(FailureReason r) {
  switch (r) {
    case FailureReason::None: return "none";
    case FailureReason::MovedTooLittle: return "moved-too-little";
    case FailureReason::TooFarFromSubgoal: return "too-far-from-subgoal";
    case FailureReason::PostReleaseMotion: return "post-release-motion";
    case FailureReason::ApproachInfeasible: return "approach-infeasible";
    case FailureReason::ContactResolution: return "contact-resolution";
    default: return "subgoal-in-collision";
  }
}

struct SuccessLabel {
  bool success = false;
  FailureReason reason = FailureReason::None;
};

// Success thresholds.
inline constexpr double kMinMoveDistance = 0.015;                 // m
inline constexpr double kMinMoveAngle = 20.0 * M_PI / 180.0;
inline constexpr double kSubgoalDistanceTol = 0.07;               // m
inline constexpr double kSubgoalAngleTol = 60.0 * M_PI / 180.0;
inline constexpr double kSettleDistanceTol = 0.005;               // m
inline constexpr double kSettleAngleTol = 2.0 * M_PI / 180.0;

// End-effector approach body used for collision filtering: a sphere at the
// contact point swept along the approach direction.
inline constexpr double kEeRadius = 0.03;       // m
inline constexpr double kEeApproachLength = 0.05;  // m

/// Whether the swept ee approach body at a world contact point collides with
/// the environment. The approach comes from outside the object along the
/// inward contact normal.
inline bool ee_approach_collides(const Vec3& contact_world, const Vec3& inward_normal_world,
                                 const scene::ShelfEnv& env) {
  const Vec3 outside = contact_world - kEeApproachLength * inward_normal_world;
  for (const auto& plane : env.planes()) {
    const double da = plane.signed_distance(outside);
    const double db = plane.signed_distance(contact_world);
    if (std::min(da, db) < kEeRadius) return true;
  }
  return false;
}

}  // namespace skills

namespace sim {

struct TraceRow {
  double t = 0.0;
  geom::RigidTransform estimated_pose;
  geom::RigidTransform true_pose;
  synth::HfvcCommand command;
  double s_param = 0.0;
  bool mode_infeasible = false;
  bool hand_broken = false;
  bool terminated = false;
};

/// One labeled skill execution: the unit of the precondition dataset.
struct ExecutionRecord {
  scene::SceneState initial_scene;
  skills::SkillParameter param;
  std::vector<TraceRow> trace;
  geom::RigidTransform reached_pose;
  geom::PoseDistance post_release_motion;
  skills::SuccessLabel label;

  double duration = 0.0;
  int steps = 0;
  bool approach_infeasible = false;
  bool subgoal_in_collision = false;
  bool contact_resolution_failed = false;
  Vec3 scale{1.0, 1.0, 1.0};  // datagen metadata
  uint64_t seed = 0;
};

}  // namespace sim

namespace skills {

/// The success definition over a finished record: the object moved, landed
/// near the subgoal, and stayed put after release. Pure in the record.
inline SuccessLabel label_execution(const sim::ExecutionRecord& record) {
  if (record.approach_infeasible) return {false, FailureReason::ApproachInfeasible};
  if (record.subgoal_in_collision) return {false, FailureReason::SubgoalInCollision};
  if (record.contact_resolution_failed) return {false, FailureReason::ContactResolution};

  const auto moved =
      geom::pose_distance(record.initial_scene.object_pose, record.reached_pose);
  if (!(moved.d > kMinMoveDistance || moved.theta > kMinMoveAngle)) {
    return {false, FailureReason::MovedTooLittle};
  }
  const auto gap = geom::pose_distance(record.reached_pose, record.param.subgoal_pose);
  if (!(gap.d <= kSubgoalDistanceTol && gap.theta <= kSubgoalAngleTol)) {
    return {false, FailureReason::TooFarFromSubgoal};
  }
  if (!(record.post_release_motion.d <= kSettleDistanceTol &&
        record.post_release_motion.theta <= kSettleAngleTol)) {
    return {false, FailureReason::PostReleaseMotion};
  }
  return {true, FailureReason::None};
}

}  // namespace skills
}  // namespace hfvc
