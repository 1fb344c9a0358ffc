#include "trapper/arm.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

namespace trapper {

double ArmConfig::reach() const {
  double r = 0.0;
  for (double l : link_lengths) r += l;
  return r;
}

RobotState RobotState::at_home(const ArmConfig& cfg) {
  RobotState s;
  s.joint_angles = cfg.home_joint_angles;
  s.joint_angles.n = cfg.joints();
  s.joint_velocities.n = cfg.joints();
  s.end_effector = forward_kinematics(s.joint_angles, cfg);
  return s;
}

Vec3 forward_kinematics(const JointVec& angles, const ArmConfig& cfg) {
  assert(angles.n == cfg.joints());
  double x = cfg.base_position.x;
  double y = cfg.base_position.y;
  double phi = 0.0;
  for (int k = 0; k < angles.n; ++k) {
    phi += angles[k];
    x += cfg.link_lengths[static_cast<std::size_t>(k)] * std::cos(phi);
    y += cfg.link_lengths[static_cast<std::size_t>(k)] * std::sin(phi);
  }
  return {x, y, cfg.hover_z};
}

Jacobian2 jacobian(const JointVec& angles, const ArmConfig& cfg) {
  assert(angles.n == cfg.joints());
  Jacobian2 jac;
  jac.n = angles.n;
  // dx/dtheta_j = -sum_{k>=j} L_k sin(phi_k); dy/dtheta_j = sum_{k>=j} L_k cos(phi_k)
  double phi = 0.0;
  std::array<double, kMaxJoints> sins{}, coss{};
  for (int k = 0; k < angles.n; ++k) {
    phi += angles[k];
    const double l = cfg.link_lengths[static_cast<std::size_t>(k)];
    sins[static_cast<std::size_t>(k)] = l * std::sin(phi);
    coss[static_cast<std::size_t>(k)] = l * std::cos(phi);
  }
  double sx = 0.0, sy = 0.0;
  for (int j = angles.n - 1; j >= 0; --j) {
    sx += sins[static_cast<std::size_t>(j)];
    sy += coss[static_cast<std::size_t>(j)];
    jac.dx[static_cast<std::size_t>(j)] = -sx;
    jac.dy[static_cast<std::size_t>(j)] = sy;
  }
  return jac;
}

namespace {

double clamp(double v, double lo, double hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

// One damped-least-squares increment toward the planar target.
JointVec dls_step(const JointVec& angles, double tx, double ty,
                  const ArmConfig& cfg) {
  const Vec3 ee = forward_kinematics(angles, cfg);
  const double ex = tx - ee.x;
  const double ey = ty - ee.y;

  const Jacobian2 jac = jacobian(angles, cfg);
  double a11 = cfg.dls_lambda * cfg.dls_lambda;
  double a22 = a11;
  double a12 = 0.0;
  for (int j = 0; j < jac.n; ++j) {
    a11 += jac.dx[static_cast<std::size_t>(j)] * jac.dx[static_cast<std::size_t>(j)];
    a12 += jac.dx[static_cast<std::size_t>(j)] * jac.dy[static_cast<std::size_t>(j)];
    a22 += jac.dy[static_cast<std::size_t>(j)] * jac.dy[static_cast<std::size_t>(j)];
  }
  const double det = a11 * a22 - a12 * a12;  // > 0 whenever lambda > 0
  const double w1 = (a22 * ex - a12 * ey) / det;
  const double w2 = (a11 * ey - a12 * ex) / det;

  JointVec delta;
  delta.n = angles.n;
  const double lim = cfg.joint_velocity_limit;
  for (int j = 0; j < jac.n; ++j) {
    const double raw = jac.dx[static_cast<std::size_t>(j)] * w1 +
                       jac.dy[static_cast<std::size_t>(j)] * w2;
    delta[j] = clamp(raw, -lim, lim);
  }
  return delta;
}

}  // namespace

IkPlan ik_plan(const RobotState& state, const Goal& g, const ArmConfig& cfg,
               int n_steps) {
  if (state.dropped) throw std::logic_error("ik_plan: arm already dropped");
  if (!finite(g.position)) throw std::invalid_argument("ik_plan: non-finite goal");
  if (n_steps < 1) throw std::invalid_argument("ik_plan: n_steps < 1");

  IkPlan plan;
  plan.actions.reserve(static_cast<std::size_t>(n_steps));

  double tx = g.position.x;
  double ty = g.position.y;
  const double off_x = tx - cfg.base_position.x;
  const double off_y = ty - cfg.base_position.y;
  const double dist = std::hypot(off_x, off_y);
  if (dist > cfg.reach()) {
    plan.unreachable = true;
    const double s = cfg.reach() / dist;
    tx = cfg.base_position.x + off_x * s;
    ty = cfg.base_position.y + off_y * s;
  }

  JointVec angles = state.joint_angles;
  for (int k = 0; k < n_steps; ++k) {
    ArmAction a;
    a.joint_deltas.n = angles.n;
    const Vec3 ee = forward_kinematics(angles, cfg);
    if (std::hypot(tx - ee.x, ty - ee.y) > cfg.goal_tolerance) {
      a.joint_deltas = dls_step(angles, tx, ty, cfg);
      for (int j = 0; j < angles.n; ++j) angles[j] += a.joint_deltas[j];
    }
    plan.actions.push_back(a);
  }
  return plan;
}

void apply_action(RobotState& state, const ArmAction& a, const ArmConfig& cfg) {
  assert(a.joint_deltas.n == state.joint_angles.n);
  for (int j = 0; j < state.joint_angles.n; ++j) {
    assert(std::abs(a.joint_deltas[j]) <= cfg.joint_velocity_limit * (1.0 + 1e-12));
    state.joint_angles[j] += a.joint_deltas[j];
    state.joint_velocities[j] = a.joint_deltas[j];
  }
  state.end_effector = forward_kinematics(state.joint_angles, cfg);
}

ArmAction StaticPlanner::step(const RobotState& state, const Goal& g) {
  if (state.dropped) {
    throw std::logic_error("StaticPlanner::step: arm already dropped");
  }
  const bool goal_moved = have_chunk_ && !(chunk_goal_ == g.position);
  if (!have_chunk_ || next_ >= chunk_.size() || goal_moved) {
    IkPlan plan = ik_plan(state, g, cfg_, cfg_.chunk_steps);
    chunk_ = std::move(plan.actions);
    last_unreachable_ = plan.unreachable;
    chunk_goal_ = g.position;
    have_chunk_ = true;
    next_ = 0;
    ++ik_invocations_;
  }
  return chunk_[next_++];
}

void StaticPlanner::reset() {
  chunk_.clear();
  have_chunk_ = false;
  next_ = 0;
  ik_invocations_ = 0;
  last_unreachable_ = false;
}

TrapOutcome attempt_trap(RobotState& state, const Goal& g_tilde,
                         const BallState& ball, const ArmConfig& cfg) {
  if (state.dropped) return state.trap_result;
  if (planar_dist(state.end_effector, g_tilde.position) > cfg.goal_tolerance) {
    return TrapOutcome::NotYet;
  }
  state.dropped = true;
  const bool covered = ball.status == BallStatus::Rolling &&
                       chebyshev_dist(ball.position, state.end_effector) <=
                           cfg.box_half_width;
  state.trap_result = covered ? TrapOutcome::Success : TrapOutcome::Miss;
  return state.trap_result;
}

}  // namespace trapper
