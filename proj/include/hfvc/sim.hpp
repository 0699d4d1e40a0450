#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "hfvc/contact.hpp"
#include "hfvc/errors.hpp"
#include "hfvc/geom.hpp"
#include "hfvc/params.hpp"
#include "hfvc/qp.hpp"
#include "hfvc/scene.hpp"
#include "hfvc/synth.hpp"

namespace hfvc::sim {

using contact::Contact;
using contact::ContactMode;
using contact::ContactOwner;
using geom::BodyTwist;
using geom::RigidTransform;
using scene::SceneState;
using skills::SkillParameter;

struct ExecutionConfig {
  double control_dt = 0.01;          // 100 Hz stepping
  int synthesis_period = 5;          // commands recomputed at 20 Hz
  double skill_timeout = 10.0;       // s
  double retract_distance = 0.05;    // m
  double settle_time = 0.5;          // s
  double infeasible_grace = 0.1;     // s of held commands before giving up
  bool use_pose_feedback = true;     // off: time-indexed trajectory estimate
  bool use_velocity_projection = true;
  bool record_trace = true;
};

struct StepDiagnostics {
  int env_contacts = 0;
  bool ballistic = false;
  bool hand_broke = false;
  bool contact_error = false;
  double max_penetration_before_projection = 0.0;
  double complementarity = 0.0;  // max |slack * multiplier| over generator rows
  double min_normal_impulse = 0.0;
  Vec3 hand_force{Vec3::Zero()};
  BodyTwist object_twist;
};

inline constexpr double kBreakawayForce = 30.0;  // N on the hand coupling

namespace detail {

inline constexpr double kContactBand = 3e-3;  // m, dynamics detection band
inline constexpr double kDualReg = 1e-12;
// Velocity-tracking stiffness of the hand coupling, N per m/s. Matches the
// simulation S_v gain of the low-level controller.
inline constexpr double kHandCouplingGain = 300.0;

struct PlaneGap {
  const scene::Plane* plane;
  double gap;
};

inline double max_penetration(const SceneState& s, const std::vector<scene::Plane>& planes) {
  double worst = 0.0;
  for (const auto& v : s.object.vertices()) {
    const Vec3 p = s.object_pose * v;
    for (const auto& plane : planes) {
      worst = std::max(worst, -plane.signed_distance(p));
    }
  }
  return worst;
}

inline void project_out_of_planes(SceneState& s, const std::vector<scene::Plane>& planes) {
  for (int pass = 0; pass < 3; ++pass) {
    bool moved = false;
    for (const auto& plane : planes) {
      double pen = 0.0;
      for (const auto& v : s.object.vertices()) {
        pen = std::min(pen, plane.signed_distance(s.object_pose * v));
      }
      if (pen < 0.0) {
        s.object_pose.translation -= pen * plane.inward_normal;
        moved = true;
      }
    }
    if (!moved) break;
  }
}

// Ballistic sub-step: gravity integration until first impact, restitution 0.
inline void ballistic_step(SceneState& s, double dt, const std::vector<scene::Plane>& planes) {
  s.fall_velocity += Vec3(0.0, 0.0, -synth::kGravity) * dt;
  const Vec3 motion = s.fall_velocity * dt;
  double alpha = 1.0;
  for (const auto& v : s.object.vertices()) {
    const Vec3 p = s.object_pose * v;
    for (const auto& plane : planes) {
      const double speed = motion.dot(plane.inward_normal);
      if (speed < -1e-12) {
        const double gap = plane.signed_distance(p);
        alpha = std::min(alpha, std::max(0.0, gap / (-speed)));
      }
    }
  }
  s.object_pose.translation += alpha * motion;
  if (alpha < 1.0) s.fall_velocity.setZero();  // inelastic impact
}

}  // namespace detail

/// One quasi-dynamic time step. Velocity-controlled hand axes move
/// kinematically; the force axis applies its magnitude through the sticking
/// coupling; the object twist and contact impulses come from the dual of an
/// Anitescu-style convex velocity-level program. Residual penetration is
/// removed by projection.
inline SceneState step(const SceneState& state, const synth::HfvcCommand& cmd, double dt,
                       StepDiagnostics* diag_out = nullptr) {
  SceneState s = state;
  StepDiagnostics diag;
  const auto planes = s.env.planes();

  const auto env_contacts =
      contact::detect_contacts(s.object_pose, s.object, s.env, detail::kContactBand);
  diag.env_contacts = static_cast<int>(env_contacts.size());

  const BodyTwist cmd_twist = cmd.hand_velocity();
  const bool attached = s.hand.has_value();

  if (env_contacts.empty() && !attached) {
    detail::ballistic_step(s, dt, planes);
    diag.ballistic = true;
    s.time += dt;
    // The commanded hand still moves.
    s.ee_pose = geom::integrate_pose(s.ee_pose, cmd_twist, dt);
    detail::project_out_of_planes(s, planes);
    if (diag_out) *diag_out = diag;
    return s;
  }
  s.fall_velocity.setZero();

  // Generalized mass and applied impulse (body frame).
  Mat6 m = Mat6::Zero();
  m.topLeftCorner<3, 3>() = s.object.mass * Mat3::Identity();
  m.bottomRightCorner<3, 3>() = s.object.inertia();
  const Mat6 m_inv = m.inverse();
  Vec6 p_imp = Vec6::Zero();
  p_imp.head<3>() =
      dt * (s.object_pose.rotation_matrix().transpose() * Vec3(0, 0, -synth::kGravity * s.object.mass));

  // Hand coupling geometry. The sticking contact couples through a stiff
  // velocity penalty (the task-space velocity gain), not a rigid equality: a
  // rigid row would fight the small normal lift the relaxed contact model
  // produces while sliding, wedging flat pushes.
  Eigen::Matrix<double, 3, 6> g_oh = Eigen::Matrix<double, 3, 6>::Zero();
  Vec3 hand_rhs = Vec3::Zero();
  Vec3 u = Vec3::Zero();
  bool has_force_axis = false;
  const double rho = dt * detail::kHandCouplingGain;  // penalty weight, kg
  if (attached) {
    const Vec3 p_h = s.object_pose * s.hand->point_in_object;
    g_oh = contact::point_velocity_map(s.object_pose, s.hand->point_in_object);
    const Vec3 r_h = s.ee_pose.inverse() * p_h;
    const auto g_h = contact::point_velocity_map(s.ee_pose, r_h);
    hand_rhs = g_h * cmd_twist.stacked();
    if (cmd.n_force == 1) {
      u = g_h * cmd.force_axis();
      has_force_axis = u.norm() > 1e-9;
      if (has_force_axis) {
        // Work term of the force-controlled axis, after eliminating the free
        // hand motion along it.
        p_imp += dt * cmd.force_magnitude * (g_oh.transpose() * u) / u.squaredNorm();
      }
    }
  }

  struct StepSolution {
    Vec6 xi;
    VecX mu;
    MatX j;
    VecX r;
  };

  auto solve_step = [&](bool with_hand) -> std::optional<StepSolution> {
    // Coupled rows enter the metric as a quadratic velocity-error penalty.
    Mat6 m_eff = m;
    Vec6 p_eff = p_imp;
    if (attached && with_hand) {
      MatX a_soft;
      VecX b_soft;
      if (has_force_axis) {
        const Vec3 u_hat = u.normalized();
        const auto [q1, q2] = geom::tangent_basis(u_hat);
        a_soft = MatX::Zero(2, 6);
        b_soft = VecX::Zero(2);
        a_soft.row(0) = q1.transpose() * g_oh;
        a_soft.row(1) = q2.transpose() * g_oh;
        b_soft(0) = q1.dot(hand_rhs);
        b_soft(1) = q2.dot(hand_rhs);
      } else {
        a_soft = g_oh;
        b_soft = hand_rhs;
      }
      m_eff += rho * a_soft.transpose() * a_soft;
      p_eff += rho * a_soft.transpose() * b_soft;
    }
    const Mat6 m_eff_inv = m_eff.inverse();

    // Inequality rows: one per friction-pyramid generator per env contact.
    std::vector<Eigen::Matrix<double, 1, 6>> rows;
    std::vector<double> rhs;
    for (const auto& c : env_contacts) {
      const Vec3 r_obj = s.object_pose.inverse() * c.position;
      const auto g_o = contact::point_velocity_map(s.object_pose, r_obj);
      double gap = 0.0;
      for (const auto& plane : planes) {
        if (plane.id == c.plane_id) gap = std::max(0.0, plane.signed_distance(c.position));
      }
      for (const auto& gen :
           contact::friction_pyramid(c.normal, c.mu, synth::kPyramidFacets).generators) {
        rows.push_back(gen.transpose() * g_o);
        rhs.push_back(-gap / dt);
      }
    }
    const int nr = static_cast<int>(rows.size());

    StepSolution sol;
    sol.j = MatX(nr, 6);
    sol.r = VecX(nr);
    for (int i = 0; i < nr; ++i) {
      sol.j.row(i) = rows[i];
      sol.r(i) = rhs[i];
    }
    if (nr == 0) {
      sol.xi = m_eff_inv * p_eff;
      sol.mu = VecX::Zero(0);
      return sol;
    }

    MatX h = sol.j * m_eff_inv * sol.j.transpose();
    h.diagonal().array() += detail::kDualReg * std::max(1.0, h.lpNorm<Eigen::Infinity>());
    const VecX c_dual = sol.j * (m_eff_inv * p_eff) - sol.r;
    const auto res = qp::solve_active_set(h, c_dual, MatX::Zero(0, nr), VecX::Zero(0),
                                          std::vector<bool>(nr, true), VecX::Zero(nr));
    if (res.status != qp::QpStatus::Optimal) return std::nullopt;
    sol.mu = res.x;
    sol.xi = m_eff_inv * (p_eff + sol.j.transpose() * res.x);
    return sol;
  };

  auto solution = solve_step(true);
  bool hand_active = attached;

  if (solution && attached) {
    // Transmitted hand force: the coupling penalty reaction plus the
    // commanded force-axis component. Beyond the budget the contact breaks.
    Vec3 f_hand = Vec3::Zero();
    const Vec3 tracking = g_oh * solution->xi - hand_rhs;
    if (has_force_axis) {
      const Vec3 u_hat = u.normalized();
      const auto [q1, q2] = geom::tangent_basis(u_hat);
      f_hand = -detail::kHandCouplingGain * (tracking.dot(q1) * q1 + tracking.dot(q2) * q2) +
               cmd.force_magnitude * u / u.squaredNorm();
    } else {
      f_hand = -detail::kHandCouplingGain * tracking;
    }
    diag.hand_force = f_hand;
    if (f_hand.norm() > kBreakawayForce) {
      solution = solve_step(false);
      hand_active = false;
      diag.hand_broke = true;
      s.hand.reset();
    }
  }
  if (!solution) {
    diag.contact_error = true;
    if (diag_out) *diag_out = diag;
    throw SolverError("sim::step: contact resolution failed");
  }

  const Vec6 xi = solution->xi;
  diag.object_twist = BodyTwist::from_stacked(xi);

  // Complementarity / cone diagnostics on the generator rows.
  double comp = 0.0, min_imp = 0.0;
  for (int i = 0; i < solution->mu.size(); ++i) {
    const double slack = solution->j.row(i).dot(xi) - solution->r(i);
    comp = std::max(comp, std::abs(slack * solution->mu(i)));
    min_imp = std::min(min_imp, solution->mu(i));
  }
  diag.complementarity = comp;
  diag.min_normal_impulse = min_imp;

  // Integrate object and hand.
  s.object_pose = geom::integrate_pose(s.object_pose, BodyTwist::from_stacked(xi), dt);
  BodyTwist hand_twist = cmd_twist;
  if (hand_active && has_force_axis) {
    const double h_f = u.dot(g_oh * xi - hand_rhs) / u.squaredNorm();
    hand_twist = BodyTwist::from_stacked(cmd_twist.stacked() + h_f * cmd.force_axis());
  }
  s.ee_pose = geom::integrate_pose(s.ee_pose, hand_twist, dt);
  s.time += dt;

  diag.max_penetration_before_projection = detail::max_penetration(s, planes);
  detail::project_out_of_planes(s, planes);
  if (diag_out) *diag_out = diag;
  return s;
}

namespace detail {

inline double nominal_duration(const geom::PoseDistance& pd) {
  return std::max({pd.d / synth::kMaxLinearSpeed, pd.theta / synth::kMaxAngularSpeed, 0.5});
}

}  // namespace detail

/// Run one HFVC skill to termination: approach checks, contact-mode freeze,
/// the 20 Hz synthesize / 100 Hz step loop with proprioceptive pose
/// estimation, then retract and settle. Returns the labeled record.
inline ExecutionRecord rollout_skill(const SceneState& scene_in, const SkillParameter& param,
                                     const ExecutionConfig& cfg = {}) {
  ExecutionRecord rec;
  rec.initial_scene = scene_in;
  rec.param = param;

  SceneState s = scene_in;
  s.object_pose = param.initial_pose;

  const auto finish = [&](const RigidTransform& reached) {
    rec.reached_pose = reached;
    rec.label = skills::label_execution(rec);
    return rec;
  };

  // Subgoal must stay inside the environment.
  for (const auto& plane : s.env.planes()) {
    for (const auto& v : s.object.vertices()) {
      if (plane.signed_distance(param.subgoal_pose * v) < -contact::kDetectTol) {
        rec.subgoal_in_collision = true;
        return finish(s.object_pose);
      }
    }
  }

  // Approach feasibility at the initial contact.
  const Vec3 n_in_obj = scene::surface_inward_normal(s.object, param.contact_point);
  const Vec3 contact_world = s.object_pose * param.contact_point;
  const Vec3 n_in_world = (s.object_pose.rotation * n_in_obj).normalized();
  if (skills::ee_approach_collides(contact_world, n_in_world, s.env)) {
    rec.approach_infeasible = true;
    return finish(s.object_pose);
  }

  // Attach the hand at the contact.
  s.ee_pose = RigidTransform::from_translation(contact_world);
  s.hand = scene::HandAttachment{param.contact_point, n_in_obj};

  // Freeze environment contact modes for the whole execution.
  auto env_contacts = contact::derive_contact_modes(
      contact::detect_contacts(s.object_pose, s.object, s.env), s.object_pose,
      param.subgoal_pose);

  auto traj = synth::InterpolatedTrajectories::make(s.object_pose, param.subgoal_pose, s.ee_pose);
  const double t_nominal =
      detail::nominal_duration(geom::pose_distance(s.object_pose, param.subgoal_pose));

  synth::HfvcCommand cmd;  // zero command until the first synthesis
  cmd.velocity_magnitudes = VecX::Zero(6);
  bool have_cmd = false;
  bool plane_set = false;
  double infeasible_since = -1.0;
  std::vector<synth::DistanceSample> history;
  RigidTransform estimate = s.object_pose;

  const int max_steps = static_cast<int>(cfg.skill_timeout / cfg.control_dt);
  double t = 0.0;
  for (int k = 0; k < max_steps; ++k, t = k * cfg.control_dt) {
    double s_par = 0.0;
    if (cfg.use_pose_feedback) {
      estimate = synth::estimate_object_pose(traj, s.ee_pose.translation, &s_par);
    } else {
      s_par = std::min(1.0, t / t_nominal);
      estimate = traj.object_pose_at(s_par);
    }

    bool mode_infeasible = false;
    if (k % cfg.synthesis_period == 0) {
      synth::SynthesisState st;
      st.pose_estimate = estimate;
      st.subgoal = param.subgoal_pose;
      st.ee_pose = s.ee_pose;
      st.env_contacts = env_contacts;
      st.robot_contact.owner = ContactOwner::Robot;
      st.robot_contact.mode = ContactMode::Sticking;
      st.robot_contact.point_in_object = param.contact_point;
      st.robot_contact.mu = st.hand_mu;
      st.robot_normal_in_object = n_in_obj;
      st.object = s.object;
      try {
        synth::HfvcCommand fresh = synth::synthesize_command(st);
        if (!plane_set) {
          synth::set_projection_plane(traj, fresh, s.ee_pose);
          plane_set = true;
        }
        if (cfg.use_velocity_projection) {
          fresh = synth::constrain_velocity_command(fresh, traj, s.ee_pose);
        }
        cmd = fresh;
        have_cmd = true;
        infeasible_since = -1.0;
      } catch (const ModeInfeasibleError&) {
        mode_infeasible = true;
        if (infeasible_since < 0.0) infeasible_since = t;
        if (!have_cmd || t - infeasible_since >= cfg.infeasible_grace) break;
        // hold the last feasible command
      } catch (const SolverError&) {
        rec.contact_resolution_failed = true;
        break;
      }
    }

    StepDiagnostics diag;
    try {
      s = step(s, cmd, cfg.control_dt, &diag);
    } catch (const SolverError&) {
      rec.contact_resolution_failed = true;
      break;
    }
    rec.steps = k + 1;

    if (cfg.record_trace) {
      TraceRow row;
      row.t = t;
      row.estimated_pose = estimate;
      row.true_pose = s.object_pose;
      row.command = cmd;
      row.s_param = s_par;
      row.mode_infeasible = mode_infeasible;
      row.hand_broken = diag.hand_broke;
      rec.trace.push_back(row);
    }

    const auto pd = geom::pose_distance(estimate, param.subgoal_pose);
    history.push_back({t, pd.d, pd.theta});
    if (synth::check_termination(history, synth::kTerminationWindow, cfg.skill_timeout)) {
      if (cfg.record_trace && !rec.trace.empty()) rec.trace.back().terminated = true;
      break;
    }
  }
  rec.duration = s.time;

  // Release, retract, settle.
  const RigidTransform before_release = s.object_pose;
  s.hand.reset();
  const Vec3 retract_dir = -(s.object_pose.rotation * n_in_obj).normalized();
  s.ee_pose.translation += cfg.retract_distance * retract_dir;

  synth::HfvcCommand idle;
  idle.velocity_magnitudes = VecX::Zero(6);
  const int settle_steps = static_cast<int>(cfg.settle_time / cfg.control_dt);
  for (int k = 0; k < settle_steps; ++k) {
    try {
      s = step(s, idle, cfg.control_dt);
    } catch (const SolverError&) {
      rec.contact_resolution_failed = true;
      break;
    }
  }
  rec.post_release_motion = geom::pose_distance(before_release, s.object_pose);
  return finish(s.object_pose);
}

}  // namespace hfvc::sim
