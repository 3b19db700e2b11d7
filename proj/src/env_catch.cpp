#include <algorithm>
#include <cmath>

#include "env_blob.hpp"
#include "rlinrl/env.hpp"

namespace rlinrl {

CatchAvoidConfig CatchAvoidConfig::from(const Config& c) {
  CatchAvoidConfig k;
  k.h = static_cast<int>(c.get_int("env.h", k.h));
  k.w = static_cast<int>(c.get_int("env.w", k.w));
  k.n_balls = static_cast<int>(c.get_int("env.n_balls", k.n_balls));
  k.horizon = static_cast<int>(c.get_int("env.horizon", k.horizon));
  k.spawn_gap = static_cast<int>(c.get_int("env.spawn_gap", k.spawn_gap));
  std::string variant = c.get_str("env.variant", "catch");
  if (variant == "catch") k.variant = CatchVariant::catch_balls;
  else if (variant == "avoid") k.variant = CatchVariant::avoid_balls;
  else throw ConfigError("unknown env.variant: " + variant);
  std::string mode = c.get_str("env.reward_mode", "dense");
  if (mode == "dense") k.reward_mode = RewardMode::dense;
  else if (mode == "terminal_only") k.reward_mode = RewardMode::terminal_only;
  else throw ConfigError("unknown env.reward_mode: " + mode);
  if (k.h < 4 || k.w < 6) throw ConfigError("catch env grid too small");
  if (k.n_balls < 1 || k.n_balls > k.w - 4) throw ConfigError("env.n_balls out of range");
  return k;
}

CatchAvoid::CatchAvoid(CatchAvoidConfig cfg) : cfg_(cfg) {}

Tensor CatchAvoid::reset(std::uint64_t seed) {
  rng_ = Rng(seed).split(0xca7cULL);
  paddle_ = 1 + static_cast<int>(rng_.below(static_cast<std::uint32_t>(cfg_.w - 2)));

  // Balls rest visibly at the top row and release one by one, spawn_gap steps
  // apart: ball i holds until its virtual row reaches zero. Columns are
  // distinct and keep clear of the walls so every ball is reachable.
  int lo = 2, hi = cfg_.w - 3;
  std::vector<int> cols;
  for (int c = lo; c <= hi; ++c) cols.push_back(c);
  balls_.clear();
  for (int i = 0; i < cfg_.n_balls; ++i) {
    std::uint32_t j = rng_.below(static_cast<std::uint32_t>(cols.size()));
    balls_.emplace_back(cols[j], -i * cfg_.spawn_gap);
    cols.erase(cols.begin() + static_cast<int>(j));
  }
  landed_ = caught_ = steps_ = 0;
  pending_ = 0.0f;
  done_ = false;
  return observe();
}

StepResult CatchAvoid::step(const Action& a) {
  if (done_) throw UsageError("step after episode end");
  if (!a.is_discrete() || a.discrete > 2)
    throw UsageError("catch env expects a discrete action in {0,1,2}");
  paddle_ += a.discrete - 1;
  paddle_ = std::clamp(paddle_, 1, cfg_.w - 2);

  float reward = 0.0f;
  for (auto& [col, row] : balls_) {
    if (row >= cfg_.h - 1) continue;  // already landed
    ++row;
    if (row == cfg_.h - 1) {
      ++landed_;
      bool touched = std::abs(col - paddle_) <= 1;
      if (touched) {
        ++caught_;
        reward += cfg_.variant == CatchVariant::catch_balls ? 1.0f : -1.0f;
      }
    }
  }
  ++steps_;
  done_ = landed_ == static_cast<int>(balls_.size()) || steps_ >= cfg_.horizon;

  StepResult r;
  if (cfg_.reward_mode == RewardMode::terminal_only) {
    pending_ += reward;
    r.reward = done_ ? pending_ : 0.0f;
  } else {
    r.reward = reward;
  }
  r.done = done_;
  r.obs = observe();
  return r;
}

Tensor CatchAvoid::observe() const {
  Tensor obs = Tensor::zeros({1, cfg_.h, cfg_.w, 2});
  auto at = [&](int r, int c, int ch) -> float& {
    return obs.v[static_cast<std::size_t>(((r * cfg_.w) + c) * 2 + ch)];
  };
  for (const auto& [col, row] : balls_) {
    if (row >= cfg_.h - 1) continue;  // landed balls leave the screen
    at(std::max(row, 0), col, 0) = 1.0f;
  }
  for (int c = paddle_ - 1; c <= paddle_ + 1; ++c)
    if (c >= 0 && c < cfg_.w) at(cfg_.h - 1, c, 1) = 1.0f;
  return obs;
}

EnvSnapshot CatchAvoid::snapshot() const {
  EnvSnapshot s;
  s.kind = kind();
  blob::put_i32(s.blob, paddle_);
  blob::put_i32(s.blob, static_cast<std::int32_t>(balls_.size()));
  for (const auto& [col, row] : balls_) {
    blob::put_i32(s.blob, col);
    blob::put_i32(s.blob, row);
  }
  blob::put_i32(s.blob, landed_);
  blob::put_i32(s.blob, caught_);
  blob::put_i32(s.blob, steps_);
  blob::put_f32(s.blob, pending_);
  blob::put_i32(s.blob, done_ ? 1 : 0);
  blob::put_u64(s.blob, rng_.key());
  blob::put_u64(s.blob, rng_.counter());
  return s;
}

void CatchAvoid::restore(const EnvSnapshot& s) {
  if (s.kind != kind())
    throw IntegrityError("snapshot kind '" + s.kind + "' cannot restore a '" + kind() + "' env");
  blob::Reader r{s.blob};
  paddle_ = r.i32();
  int n = r.i32();
  if (n < 0 || n > 1024) throw IntegrityError("snapshot ball count out of range");
  balls_.assign(static_cast<std::size_t>(n), {0, 0});
  for (auto& [col, row] : balls_) {
    col = r.i32();
    row = r.i32();
  }
  landed_ = r.i32();
  caught_ = r.i32();
  steps_ = r.i32();
  pending_ = r.f32();
  done_ = r.i32() != 0;
  std::uint64_t key = r.u64(), ctr = r.u64();
  rng_.set_state(key, ctr);
  r.done();
}

}  // namespace rlinrl
