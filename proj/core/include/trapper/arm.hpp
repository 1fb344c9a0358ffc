#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "trapper/geometry.hpp"
#include "trapper/table.hpp"

namespace trapper {

inline constexpr int kMaxJoints = 6;

// Fixed-capacity joint vector. The planner and the ETA oracle roll out
// millions of kinematic steps, so joint data stays allocation-free.
struct JointVec {
  std::array<double, kMaxJoints> v{};
  int n = 0;

  double& operator[](int i) { return v[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return v[static_cast<std::size_t>(i)]; }
  bool operator==(const JointVec& o) const = default;
};

struct ArmConfig {
  std::vector<double> link_lengths{0.30, 0.25, 0.15};
  Vec3 base_position{0.0, 0.0, 0.0};
  JointVec home_joint_angles{{-0.5, 1.2, 1.2}, 3};
  double joint_velocity_limit = 0.0035;  // radians per step
  double box_half_width = 0.045;
  double goal_tolerance = 0.01;  // epsilon
  double dls_lambda = 0.1;
  int chunk_steps = 5;
  double hover_z = 0.05;  // end-effector height above the surface until drop

  int joints() const { return static_cast<int>(link_lengths.size()); }
  double reach() const;
};

struct Goal {
  Vec3 position;
};

struct ArmAction {
  JointVec joint_deltas;  // radians per step, one step's worth
};

enum class TrapOutcome { NotYet, Success, Miss };

struct RobotState {
  JointVec joint_angles;
  JointVec joint_velocities;
  Vec3 end_effector;  // cached; always equals forward_kinematics(joint_angles)
  bool dropped = false;
  TrapOutcome trap_result = TrapOutcome::NotYet;  // sticky once dropped

  static RobotState at_home(const ArmConfig& cfg);
};

Vec3 forward_kinematics(const JointVec& angles, const ArmConfig& cfg);

// Analytic partials of the planar end-effector coordinates.
struct Jacobian2 {
  std::array<double, kMaxJoints> dx{};
  std::array<double, kMaxJoints> dy{};
  int n = 0;
};

Jacobian2 jacobian(const JointVec& angles, const ArmConfig& cfg);

struct IkPlan {
  std::vector<ArmAction> actions;
  bool unreachable = false;
};

// Damped least squares: delta = J^T (J J^T + lambda^2 I)^-1 e, each joint
// increment clamped to the velocity limit, iterated n_steps times from the
// given state. Goals beyond reach are retargeted to the closest reachable
// point and flagged.
IkPlan ik_plan(const RobotState& state, const Goal& g, const ArmConfig& cfg,
               int n_steps = 5);

void apply_action(RobotState& state, const ArmAction& a, const ArmConfig& cfg);

// Chunked static planner: pops actions from the current ik_plan chunk and
// replans when the chunk is exhausted or the goal moved.
class StaticPlanner {
 public:
  explicit StaticPlanner(const ArmConfig& cfg) : cfg_(cfg) {}

  ArmAction step(const RobotState& state, const Goal& g);
  void reset();

  int ik_invocations() const { return ik_invocations_; }
  bool last_plan_unreachable() const { return last_unreachable_; }
  const ArmConfig& config() const { return cfg_; }

 private:
  ArmConfig cfg_;
  std::vector<ArmAction> chunk_;
  std::size_t next_ = 0;
  Vec3 chunk_goal_{};
  bool have_chunk_ = false;
  bool last_unreachable_ = false;
  int ik_invocations_ = 0;
};

// One-shot drop: NotYet until the end effector first comes within epsilon of
// the intermediate goal; at that instant the box drops irrevocably and the
// outcome is decided by whether the footprint covers a rolling ball. Calls
// after the drop return the recorded outcome.
TrapOutcome attempt_trap(RobotState& state, const Goal& g_tilde,
                         const BallState& ball, const ArmConfig& cfg);

}  // namespace trapper
