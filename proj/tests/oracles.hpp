#pragma once
// Scripted reference controllers used as absolute yardsticks in tests. These
// read privileged environment state on purpose: they bound what a good policy
// can achieve without any learning in the loop.

#include <cmath>

#include "rlinrl/env.hpp"

namespace rlinrl::oracle {

// Proportional lane follower: steer against lateral offset and heading at
// full speed.
inline Action lane_follower(const LaneWorld& env) {
  float omega = -2.0f * env.lateral_offset() - 3.0f * env.heading();
  return Action::cont2(1.0f, std::clamp(omega, -1.0f, 1.0f));
}

inline float lane_follower_return(LaneWorld env, std::uint64_t seed) {
  env.reset(seed);
  float total = 0.0f;
  while (!env.done()) total += env.step(lane_follower(env)).reward;
  return total;
}

// Chase the lowest visible ball (the next one to land).
inline Action catch_controller(const CatchAvoid& env) {
  Tensor obs = env.observe();
  int h = env.obs_h(), w = env.obs_w();
  int target = env.paddle_col(), best_row = -1;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      if (obs.v[static_cast<std::size_t>(((r * w) + c) * 2)] > 0.0f && r > best_row) {
        best_row = r;
        target = c;
      }
  if (target > env.paddle_col()) return Action::disc(2);
  if (target < env.paddle_col()) return Action::disc(0);
  return Action::disc(1);
}

inline int catch_controller_caught(CatchAvoid env, std::uint64_t seed) {
  env.reset(seed);
  while (!env.done()) env.step(catch_controller(env));
  return env.balls_caught();
}

}  // namespace rlinrl::oracle
