#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "hfvc/contact.hpp"
#include "hfvc/errors.hpp"
#include "hfvc/geom.hpp"
#include "hfvc/qp.hpp"
#include "hfvc/scene.hpp"

namespace hfvc::synth {

using contact::Contact;
using contact::ContactMode;
using contact::ContactOwner;
using geom::BodyTwist;
using geom::RigidTransform;
using scene::ObjectPrimitive;

inline constexpr double kGravity = 9.81;
inline constexpr double kMaxLinearSpeed = 0.15;   // m/s
inline constexpr double kMaxAngularSpeed = 1.0;   // rad/s
inline constexpr double kForceAxisParallelTol = 10.0 * M_PI / 180.0;
inline constexpr double kPreloadNewtons = 2.0;    // desired normal force per env contact
inline constexpr double kAccelConeHalfAngle = 10.0 * M_PI / 180.0;
inline constexpr int kPyramidFacets = 4;

/// Hybrid decomposition of the 6-D hand task space. Rows of `axes` are the
/// control axes in the hand body frame, force rows first (n_force is 0 or 1).
struct HfvcCommand {
  Mat6 axes = Mat6::Identity();
  int n_force = 0;
  double force_magnitude = 0.0;  // N along the force axis
  VecX velocity_magnitudes;      // one per velocity axis, same row order
  bool projection_bypassed = false;

  BodyTwist hand_velocity() const {
    Vec6 v = Vec6::Zero();
    for (int k = 0; k < 6 - n_force; ++k) {
      v += velocity_magnitudes(k) * axes.row(n_force + k).transpose();
    }
    return BodyTwist::from_stacked(v);
  }

  Vec6 force_axis() const {
    return n_force == 1 ? Vec6(axes.row(0).transpose()) : Vec6(Vec6::Zero());
  }
};

/// Everything the per-step synthesis needs. Environment contacts keep the
/// world anchors captured at skill start; their object-frame locations are
/// recomputed from the current pose estimate each step. The robot contact is
/// anchored in the object frame instead (it sticks to the object).
struct SynthesisState {
  RigidTransform pose_estimate;
  RigidTransform subgoal;
  RigidTransform ee_pose;
  std::vector<Contact> env_contacts;
  Contact robot_contact;
  Vec3 robot_normal_in_object{Vec3::UnitZ()};
  ObjectPrimitive object;
  double hand_mu = 0.8;

  Contact current_robot_contact() const {
    Contact c = robot_contact;
    c.owner = ContactOwner::Robot;
    c.mode = ContactMode::Sticking;
    c.position = pose_estimate * c.point_in_object;
    c.normal = (pose_estimate.rotation * robot_normal_in_object).normalized();
    return c;
  }

  std::vector<Contact> all_contacts() const {
    std::vector<Contact> out = env_contacts;
    out.push_back(current_robot_contact());
    return out;
  }
};

/// Straight-line reference paths for one skill execution, one for the object
/// and one for the end-effector. The ee endpoints are the object endpoints
/// composed with the fixed object-frame contact transform, so the two paths
/// agree at s = 0 and s = 1 by construction.
struct InterpolatedTrajectories {
  RigidTransform object_start;
  RigidTransform object_subgoal;
  RigidTransform ee_start;
  RigidTransform ee_end;

  struct Plane {
    Vec3 point{Vec3::Zero()};
    Vec3 normal{Vec3::UnitZ()};
  };
  std::optional<Plane> projection_plane;

  static InterpolatedTrajectories make(const RigidTransform& object_start,
                                       const RigidTransform& object_subgoal,
                                       const RigidTransform& ee_start) {
    InterpolatedTrajectories t;
    t.object_start = object_start;
    t.object_subgoal = object_subgoal;
    t.ee_start = ee_start;
    const RigidTransform contact_tf = object_start.inverse() * ee_start;
    t.ee_end = object_subgoal * contact_tf;
    return t;
  }

  RigidTransform object_pose_at(double s) const {
    return geom::interpolate_pose(object_start, object_subgoal, s);
  }

  RigidTransform ee_pose_at(double s) const {
    const RigidTransform contact_tf = object_start.inverse() * ee_start;
    return object_pose_at(s) * contact_tf;
  }
};

/// Eq-style velocity stage: minimize ||v_o_des - v_o||^2 over the stacked
/// object/hand twists subject to the contact-mode equality rows. The reduced
/// least-squares problem is solved to its minimum-norm optimum, which keeps
/// the hand twist unique when it is underdetermined.
inline std::pair<BodyTwist, BodyTwist> solve_hand_velocity(const SynthesisState& state,
                                                           const BodyTwist& v_o_des) {
  const auto vc = contact::build_velocity_constraint(state.all_contacts(),
                                                     state.pose_estimate, state.ee_pose);
  MatX f = MatX::Zero(6, 12);
  f.leftCols(6).setIdentity();
  double kkt = 0.0;
  const VecX x = qp::equality_constrained_lsq(f, v_o_des.stacked(), vc.n,
                                              VecX::Zero(vc.n.rows()), &kkt);
  const double scale = std::max(1.0, v_o_des.stacked().lpNorm<Eigen::Infinity>());
  if (kkt > 1e-6 * scale) {
    throw SolverError("solve_hand_velocity: KKT residual " + std::to_string(kkt));
  }
  if (vc.n.rows() > 0) {
    const double feas = (vc.n * x).lpNorm<Eigen::Infinity>();
    if (feas > 1e-8 * std::max(1.0, x.lpNorm<Eigen::Infinity>())) {
      throw SolverError("solve_hand_velocity: constraint residual " + std::to_string(feas));
    }
  }
  return {BodyTwist::from_stacked(x.head<6>()), BodyTwist::from_stacked(x.tail<6>())};
}

/// Uniform scaling that caps the hand speed while preserving direction.
inline BodyTwist clamp_hand_velocity(const BodyTwist& v_h,
                                     double max_linear = kMaxLinearSpeed,
                                     double max_angular = kMaxAngularSpeed) {
  double scale = 1.0;
  if (v_h.linear.norm() > max_linear) scale = std::min(scale, max_linear / v_h.linear.norm());
  if (v_h.angular.norm() > max_angular) scale = std::min(scale, max_angular / v_h.angular.norm());
  return v_h.scaled(scale);
}

/// Force-axis choice: the direction closest to the robot-object contact
/// normal within the plane orthogonal to the hand linear velocity. Normal
/// and velocity within the angular tolerance of parallel means pure velocity
/// control (pushing).
inline std::pair<int, Vec6> compute_force_direction(const Contact& robot_contact,
                                                    const BodyTwist& v_h,
                                                    const RigidTransform& ee_pose) {
  if (robot_contact.normal.norm() < 1e-9) {
    throw std::invalid_argument("compute_force_direction: zero contact normal");
  }
  const Vec3 n_body = (ee_pose.rotation.conjugate() * robot_contact.normal).normalized();
  Vec6 axis = Vec6::Zero();
  if (v_h.linear.norm() < 1e-9) {
    axis.head<3>() = n_body;
    return {1, axis};
  }
  const Vec3 v_hat = v_h.linear.normalized();
  const Vec3 residual = n_body - n_body.dot(v_hat) * v_hat;
  if (residual.norm() < std::sin(kForceAxisParallelTol)) {
    return {0, Vec6::Zero()};
  }
  axis.head<3>() = residual.normalized();
  return {1, axis};
}

/// Orthonormal 6x6 decomposition with the force axis (if any) as row 0,
/// its linear-plane completion as rows 1-2, and the angular identity block
/// as rows 3-5.
inline Mat6 build_axes(int n_force, const Vec6& force_axis) {
  if (n_force == 0) return Mat6::Identity();
  const Vec3 f = force_axis.head<3>().normalized();
  const auto [t1, t2] = geom::tangent_basis(f);
  Mat6 t = Mat6::Zero();
  t.block<1, 3>(0, 0) = f.transpose();
  t.block<1, 3>(1, 0) = t1.transpose();
  t.block<1, 3>(2, 0) = t2.transpose();
  t.block<3, 3>(3, 3).setIdentity();
  return t;
}

struct ForceSolution {
  double eta_f = 0.0;
  Vec6 eta = Vec6::Zero();            // hand actuation in the T axes
  std::vector<Vec3> contact_forces;   // world, per non-separating env contact
  Vec3 hand_force{Vec3::Zero()};      // world, hand on object
  Vec6 acceleration = Vec6::Zero();   // body frame
  double balance_residual = 0.0;
  double kkt_residual = 0.0;
};

namespace detail {

// Wrench in the object body frame per unit world force at a world point.
inline Eigen::Matrix<double, 6, 3> wrench_map(const RigidTransform& object_pose,
                                              const Vec3& world_point) {
  const Mat3 rt = object_pose.rotation_matrix().transpose();
  const Vec3 r = rt * (world_point - object_pose.translation);
  Eigen::Matrix<double, 6, 3> w;
  w.topRows<3>() = rt;
  w.bottomRows<3>() = geom::skew(r) * rt;
  return w;
}

// Generators of the polyhedral acceleration cone about the twist direction.
inline std::vector<Vec6> accel_cone_generators(const Vec6& v_o) {
  std::vector<Vec6> gens;
  const double nv = v_o.norm();
  if (nv < 1e-9) return gens;
  const Vec6 axis = v_o / nv;
  // Two orthonormal complements via Householder-style completion.
  Eigen::FullPivHouseholderQR<Eigen::Matrix<double, 6, 1>> qr(axis);
  const Mat6 q = qr.matrixQ();
  const double ca = std::cos(kAccelConeHalfAngle);
  const double sa = std::sin(kAccelConeHalfAngle);
  for (int k = 1; k <= 2; ++k) {
    const Vec6 u = q.col(k);
    gens.push_back(ca * axis + sa * u);
    gens.push_back(ca * axis - sa * u);
  }
  return gens;
}

}  // namespace detail

/// Force stage: minimize ||lambda - lambda_des||^2 over generator multipliers
/// subject to quasi-dynamic balance on the object, with the acceleration
/// confined to a narrow cone about the solved object twist. The hand
/// actuation eta = T * (hand contact wrench) falls out of the solution; its
/// force-axis entry is the commanded magnitude.
inline ForceSolution solve_force_magnitude(const SynthesisState& state, const Mat6& axes,
                                           const BodyTwist& v_o) {
  struct Block {
    std::vector<Vec3> gens;
    Vec3 des{Vec3::Zero()};
    Vec3 world_point{Vec3::Zero()};
    bool is_hand = false;
  };
  std::vector<Block> blocks;

  for (const auto& c : state.env_contacts) {
    if (c.mode == ContactMode::Separating) continue;
    Block b;
    b.world_point = c.position;
    b.des = kPreloadNewtons * c.normal;
    if (c.mode == ContactMode::Sliding) {
      b.gens.push_back((c.normal - c.mu * c.slip_direction).normalized());
    } else {
      for (const auto& g : contact::friction_pyramid(c.normal, c.mu, kPyramidFacets).generators) {
        b.gens.push_back(g);
      }
    }
    blocks.push_back(std::move(b));
  }
  const Contact hand = state.current_robot_contact();
  {
    Block b;
    b.world_point = hand.position;
    b.is_hand = true;
    for (const auto& g : contact::friction_pyramid(hand.normal, state.hand_mu, kPyramidFacets).generators) {
      b.gens.push_back(g);
    }
    blocks.push_back(std::move(b));
  }

  int n_alpha = 0;
  for (const auto& b : blocks) n_alpha += static_cast<int>(b.gens.size());
  const auto accel_gens = detail::accel_cone_generators(v_o.stacked());
  const int n = n_alpha + static_cast<int>(accel_gens.size());

  // Stacked force map lambda = G alpha and the balance rows.
  MatX gmap = MatX::Zero(3 * static_cast<int>(blocks.size()), n_alpha);
  VecX lambda_des = VecX::Zero(3 * static_cast<int>(blocks.size()));
  MatX a_eq = MatX::Zero(6, n);
  int col = 0;
  for (size_t bi = 0; bi < blocks.size(); ++bi) {
    const auto& b = blocks[bi];
    lambda_des.segment<3>(3 * bi) = b.des;
    const auto w = detail::wrench_map(state.pose_estimate, b.world_point);
    for (const auto& g : b.gens) {
      gmap.block<3, 1>(3 * bi, col) = g;
      a_eq.block<6, 1>(0, col) = w * g;
      ++col;
    }
  }
  Mat6 m_o = Mat6::Zero();
  m_o.topLeftCorner<3, 3>() = state.object.mass * Mat3::Identity();
  m_o.bottomRightCorner<3, 3>() = state.object.inertia();
  for (size_t k = 0; k < accel_gens.size(); ++k) {
    a_eq.col(n_alpha + static_cast<int>(k)) = -(m_o * accel_gens[k]);
  }
  const Mat3 rt = state.pose_estimate.rotation_matrix().transpose();
  Vec6 b_eq = Vec6::Zero();
  b_eq.head<3>() = rt * Vec3(0.0, 0.0, state.object.mass * kGravity);

  MatX h = MatX::Zero(n, n);
  h.topLeftCorner(n_alpha, n_alpha) = gmap.transpose() * gmap;
  const double reg = 1e-10 * std::max(1.0, h.lpNorm<Eigen::Infinity>());
  h.diagonal().array() += reg;
  VecX c = VecX::Zero(n);
  c.head(n_alpha) = -gmap.transpose() * lambda_des;

  const auto res = qp::solve_eq_bound_qp(h, c, a_eq, b_eq, std::vector<bool>(n, true));
  if (res.status == qp::QpStatus::Infeasible) {
    throw ModeInfeasibleError("solve_force_magnitude: no balancing contact forces in this mode");
  }
  if (res.status != qp::QpStatus::Optimal) {
    throw SolverError(std::string("solve_force_magnitude: ") + qp::to_string(res.status));
  }

  ForceSolution out;
  out.kkt_residual = res.stationarity;
  out.balance_residual = (a_eq * res.x - b_eq).lpNorm<Eigen::Infinity>();
  col = 0;
  for (const auto& b : blocks) {
    Vec3 f = Vec3::Zero();
    for (const auto& g : b.gens) f += res.x(col++) * g;
    if (b.is_hand) {
      out.hand_force = f;
    } else {
      out.contact_forces.push_back(f);
    }
  }
  for (size_t k = 0; k < accel_gens.size(); ++k) {
    out.acceleration += res.x(n_alpha + static_cast<int>(k)) * accel_gens[k];
  }

  // Force balance on the hand: actuation cancels the contact reaction.
  const Mat3 r_hand_t = state.ee_pose.rotation_matrix().transpose();
  const Vec3 r_h = r_hand_t * (hand.position - state.ee_pose.translation);
  Vec6 hand_wrench;
  hand_wrench.head<3>() = r_hand_t * out.hand_force;
  hand_wrench.tail<3>() = r_h.cross(hand_wrench.head<3>());
  out.eta = axes * hand_wrench;
  out.eta_f = out.eta(0);
  return out;
}

/// The three-step command computation: constrained velocity solve, force-axis
/// selection, force-magnitude solve. Velocity magnitudes are the clamped hand
/// twist expressed in the velocity rows of T.
inline HfvcCommand synthesize_command(const SynthesisState& state,
                                      ForceSolution* force_out = nullptr) {
  const BodyTwist v_o_des = geom::relative_twist(state.pose_estimate, state.subgoal);
  auto [v_o, v_h] = solve_hand_velocity(state, v_o_des);
  v_h = clamp_hand_velocity(v_h);

  const auto [n_force, axis] = compute_force_direction(state.current_robot_contact(), v_h,
                                                       state.ee_pose);
  HfvcCommand cmd;
  cmd.axes = build_axes(n_force, axis);
  cmd.n_force = n_force;
  if (n_force == 1) {
    const ForceSolution fs = solve_force_magnitude(state, cmd.axes, v_o);
    cmd.force_magnitude = fs.eta_f;
    if (force_out) *force_out = fs;
  }
  cmd.velocity_magnitudes = VecX::Zero(6 - n_force);
  const Vec6 vh = v_h.stacked();
  for (int k = 0; k < 6 - n_force; ++k) {
    cmd.velocity_magnitudes(k) = cmd.axes.row(n_force + k).dot(vh);
  }
  return cmd;
}

/// Proprioceptive pose estimate: project the measured ee position onto the
/// straight ee reference segment, clamp, and read the object path there.
inline RigidTransform estimate_object_pose(const InterpolatedTrajectories& traj,
                                           const Vec3& ee_position, double* s_out = nullptr) {
  const Vec3 a = traj.ee_start.translation;
  const Vec3 b = traj.ee_end.translation;
  const Vec3 seg = b - a;
  double s = 0.0;
  const double len2 = seg.squaredNorm();
  if (len2 > 1e-24) {
    s = std::clamp((ee_position - a).dot(seg) / len2, 0.0, 1.0);
  }
  if (s_out) *s_out = s;
  return traj.object_pose_at(s);
}

/// Build the fixed projection plane for one skill: through the ee start,
/// spanned by the ee path direction and the initial force axis (world), or
/// world-z under pure velocity control.
inline void set_projection_plane(InterpolatedTrajectories& traj, const HfvcCommand& first_cmd,
                                 const RigidTransform& ee_pose) {
  const Vec3 seg = traj.ee_end.translation - traj.ee_start.translation;
  if (seg.norm() < 1e-12) return;  // degenerate path: leave unset
  const Vec3 u = seg.normalized();
  Vec3 w;
  if (first_cmd.n_force == 1) {
    w = ee_pose.rotation * Vec3(first_cmd.axes.row(0).head<3>().transpose());
  } else {
    w = Vec3::UnitZ();
  }
  const Vec3 normal = u.cross(w);
  if (normal.norm() < 1e-9) return;  // span degenerate: leave unset
  traj.projection_plane = InterpolatedTrajectories::Plane{traj.ee_start.translation,
                                                          normal.normalized()};
}

/// Project the commanded linear velocity onto the skill's reference plane.
/// Angular rows and the force axis are untouched. Without a valid plane the
/// command passes through flagged.
inline HfvcCommand constrain_velocity_command(const HfvcCommand& cmd,
                                              const InterpolatedTrajectories& traj,
                                              const RigidTransform& ee_pose) {
  HfvcCommand out = cmd;
  if (!traj.projection_plane) {
    out.projection_bypassed = true;
    return out;
  }
  const Vec6 vh = cmd.hand_velocity().stacked();
  const Vec3 v_lin_world = ee_pose.rotation * Vec3(vh.head<3>());
  const Vec3 projected = geom::project_onto_plane(v_lin_world, traj.projection_plane->normal);
  const Vec3 v_lin_body = ee_pose.rotation.conjugate() * projected;
  Vec6 vh_new;
  vh_new << v_lin_body, vh.tail<3>();
  for (int k = 0; k < 6 - cmd.n_force; ++k) {
    out.velocity_magnitudes(k) = cmd.axes.row(cmd.n_force + k).dot(vh_new);
  }
  return out;
}

/// Diagonal task-space gain set for the low-level controller.
struct GainSet {
  Vec6 s_v = Vec6::Zero();
  Vec6 s_f = Vec6::Zero();
  Vec6 d = Vec6::Zero();

  static GainSet simulation() {
    GainSet g;
    g.s_v.setConstant(300.0);
    g.s_f.setConstant(1.0);
    g.d << 10.0, 10.0, 10.0, 1.0, 1.0, 1.0;
    return g;
  }

  static GainSet real_world() {
    GainSet g;
    g.s_v.setConstant(1800.0);
    g.s_f.setConstant(2.0);
    g.d << 10.0, 10.0, 10.0, 1.0, 1.0, 1.0;
    return g;
  }
};

/// tau = S_v v_e + S_f f_e - D v, with the task-space Jacobian the identity.
inline Vec6 task_space_wrench(const Vec6& velocity_error, const Vec6& force_error,
                              const Vec6& velocity, const GainSet& gains) {
  return gains.s_v.cwiseProduct(velocity_error) + gains.s_f.cwiseProduct(force_error) -
         gains.d.cwiseProduct(velocity);
}

struct DistanceSample {
  double t = 0.0;
  double d = 0.0;
  double theta = 0.0;
};

inline constexpr double kTerminationWindow = 0.1;       // s
inline constexpr double kImproveEpsD = 0.5e-3;          // m
inline constexpr double kImproveEpsTheta = 0.25 * M_PI / 180.0;
inline constexpr double kSkillTimeout = 10.0;           // s

/// True when neither the translation nor the rotation gap to the subgoal has
/// improved over the trailing window, or the hard timeout elapsed. Both
/// series must stall; progress on either keeps the skill alive.
inline bool check_termination(const std::vector<DistanceSample>& history,
                              double window = kTerminationWindow,
                              double timeout = kSkillTimeout,
                              double eps_d = kImproveEpsD,
                              double eps_theta = kImproveEpsTheta) {
  if (history.empty()) return false;
  const double t_end = history.back().t;
  if (t_end - history.front().t >= timeout) return true;

  double anchor_d = history.front().d;
  double anchor_theta = history.front().theta;
  double last_improve_d = history.front().t;
  double last_improve_theta = history.front().t;
  for (const auto& s : history) {
    if (s.d < anchor_d - eps_d) {
      anchor_d = s.d;
      last_improve_d = s.t;
    }
    if (s.theta < anchor_theta - eps_theta) {
      anchor_theta = s.theta;
      last_improve_theta = s.t;
    }
  }
  return (t_end - last_improve_d >= window) && (t_end - last_improve_theta >= window);
}

}  // namespace hfvc::synth
