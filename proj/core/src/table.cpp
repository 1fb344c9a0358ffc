#include "trapper/table.hpp"

#include <cmath>
#include <stdexcept>

#include "trapper/rng.hpp"

namespace trapper {

TableConfig TableConfig::with_standard_pockets(double half_w, double half_h) {
  TableConfig t;
  t.half_width = half_w;
  t.half_height = half_h;
  t.pocket_centers = {
      Vec3{half_w, half_h, 0.0},   Vec3{half_w, -half_h, 0.0},
      Vec3{-half_w, -half_h, 0.0}, Vec3{-half_w, half_h, 0.0},
      Vec3{half_w, 0.0, 0.0},      Vec3{-half_w, 0.0, 0.0},
      Vec3{0.0, half_h, 0.0},      Vec3{0.0, -half_h, 0.0}};
  return t;
}

namespace {

bool in_any_pocket(const Vec3& p, const TableConfig& table) {
  for (const Vec3& c : table.pocket_centers) {
    if (planar_dist(p, c) <= table.pocket_radius) return true;
  }
  return false;
}

// Mirror one coordinate back inside [-half, half], flipping and scaling the
// matching velocity component per bounce. The per-step displacement is far
// smaller than the table, so at most a couple of folds are ever needed.
void reflect_axis(double& pos, double& vel, double half, double restitution) {
  while (pos > half || pos < -half) {
    if (pos > half) {
      pos = 2.0 * half - pos;
    } else {
      pos = -2.0 * half - pos;
    }
    vel = -vel * restitution;
  }
}

}  // namespace

BallState step_ball(const BallState& state, const TableConfig& table) {
  if (!finite(state.position) || !finite(state.velocity)) {
    throw std::invalid_argument("step_ball: non-finite ball state");
  }
  if (state.status != BallStatus::Rolling) {
    throw std::invalid_argument("step_ball: ball is not rolling");
  }

  BallState next = state;
  next.position += state.velocity;

  // Pocket check uses the raw advanced position: a ball crossing the rim
  // inside the pocket radius drops in rather than bouncing.
  if (in_any_pocket(next.position, table)) {
    next.status = BallStatus::InPocket;
    next.velocity = Vec3{};
    return next;
  }

  reflect_axis(next.position.x, next.velocity.x, table.half_width,
               table.wall_restitution);
  reflect_axis(next.position.y, next.velocity.y, table.half_height,
               table.wall_restitution);

  // A reflected ball can land inside a pocket disc (corner hits).
  if (in_any_pocket(next.position, table)) {
    next.status = BallStatus::InPocket;
    next.velocity = Vec3{};
    return next;
  }

  if (table.friction_loss > 0.0) {
    const double decay = std::exp(-table.friction_loss * table.dt);
    next.velocity = next.velocity * decay;
  }
  return next;
}

BallState sample_initial(const EpisodeInit& init, const TableConfig& table) {
  if (init.speed_min < 0.0 || init.speed_max < init.speed_min) {
    throw std::invalid_argument("sample_initial: bad speed range");
  }
  if (init.spawn_margin >= table.half_width ||
      init.spawn_margin >= table.half_height) {
    throw std::invalid_argument("sample_initial: spawn margin exceeds table");
  }

  Rng rng(init.seed);
  const double xr = table.half_width - init.spawn_margin;
  const double yr = table.half_height - init.spawn_margin;

  Vec3 pos;
  for (int attempt = 0;; ++attempt) {
    pos = {rng.uniform(-xr, xr), rng.uniform(-yr, yr), table.surface_z};
    bool clear = true;
    for (const Vec3& c : table.pocket_centers) {
      if (planar_dist(pos, c) < table.pocket_radius + init.spawn_margin) {
        clear = false;
        break;
      }
    }
    if (clear) break;
    if (attempt > 10000) {
      throw std::invalid_argument("sample_initial: no clear spawn region");
    }
  }

  const double speed = rng.uniform(init.speed_min, init.speed_max);
  const double angle = rng.uniform(0.0, 2.0 * M_PI);
  BallState s;
  s.position = pos;
  s.velocity = {speed * std::cos(angle), speed * std::sin(angle), 0.0};
  s.status = BallStatus::Rolling;
  return s;
}

Trajectory run_ballistic(const BallState& state, const TableConfig& table,
                         int n_steps) {
  if (n_steps < 1) throw std::invalid_argument("run_ballistic: n_steps < 1");
  Trajectory traj;
  traj.points.reserve(static_cast<std::size_t>(n_steps));
  BallState cur = state;
  for (int i = 0; i < n_steps; ++i) {
    if (cur.status == BallStatus::Rolling) {
      cur = step_ball(cur, table);
    }
    traj.points.push_back(
        {cur.position, cur.status == BallStatus::InPocket});
  }
  return traj;
}

}  // namespace trapper
