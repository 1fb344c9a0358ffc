#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "trapper/geometry.hpp"

namespace trapper {

enum class BallStatus { Rolling, InPocket, Trapped, Deflected };

struct BallState {
  Vec3 position;
  Vec3 velocity;  // meters per step; v_z == 0 while on the table
  BallStatus status = BallStatus::Rolling;
};

struct TableConfig {
  double half_width = 0.6;
  double half_height = 0.3;
  double wall_restitution = 0.9;  // in (0, 1]
  std::array<Vec3, 8> pocket_centers{};
  double pocket_radius = 0.05;
  double friction_loss = 0.0;  // per-step velocity decay coefficient
  double dt = 0.01;            // seconds per step
  double surface_z = 0.0;

  // 4 corner pockets + 4 edge-midpoint pockets.
  static TableConfig with_standard_pockets(double half_w, double half_h);
};

struct EpisodeInit {
  std::uint64_t seed = 0;
  double speed_min = 0.0;  // m/step
  double speed_max = 0.0;
  double spawn_margin = 0.12;  // min distance from walls and pockets
};

struct TrajPoint {
  Vec3 position;
  bool off_table = false;
};

// Positions after each simulated step; points[i] is the state at step i+1
// relative to the input state. After pocket absorption the absorption point
// repeats with off_table set, so consumers always see fixed-length sequences.
struct Trajectory {
  std::vector<TrajPoint> points;
};

// One discrete step: advance by velocity, reflect specularly off walls with
// restitution on the normal component, absorb into pockets, then apply the
// exponential friction decay v *= exp(-friction_loss * dt).
BallState step_ball(const BallState& state, const TableConfig& table);

// Position uniform over the table interior minus the spawn margin band (also
// kept clear of pockets); speed uniform in [speed_min, speed_max], direction
// uniform in [0, 2pi). Fully determined by the seed.
BallState sample_initial(const EpisodeInit& init, const TableConfig& table);

Trajectory run_ballistic(const BallState& state, const TableConfig& table,
                         int n_steps);

// Straight-line target for the dynamic-reach environment: no walls, pockets
// or friction.
struct ReachTargetState {
  Vec3 position;
  Vec3 velocity;  // constant for the whole episode
};

inline ReachTargetState step_reach_target(const ReachTargetState& s) {
  return {s.position + s.velocity, s.velocity};
}

}  // namespace trapper
