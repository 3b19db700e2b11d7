#pragma once
// Deterministic, snapshot-restorable synthetic environments with image-like
// observations and known causal reward structure.

#include <cstdint>
#include <memory>
#include <vector>

#include "rlinrl/config.hpp"
#include "rlinrl/rng.hpp"
#include "rlinrl/tensor.hpp"

namespace rlinrl {

// ---------------------------------------------------------------------------
// Actions
// ---------------------------------------------------------------------------

struct Action {
  int discrete = -1;             // valid when >= 0
  std::vector<float> cont;       // valid when non-empty

  static Action disc(int i) {
    Action a;
    a.discrete = i;
    return a;
  }
  static Action cont2(float v, float omega) {
    Action a;
    a.cont = {v, omega};
    return a;
  }
  bool is_discrete() const { return discrete >= 0; }
};

struct StepResult {
  Tensor obs;
  float reward = 0.0f;
  bool done = false;
};

// Opaque full copy of environment state (including RNG state). Restoring a
// snapshot and replaying the same actions reproduces bit-identical outputs.
struct EnvSnapshot {
  std::string kind;
  std::vector<std::uint8_t> blob;
};

class Env {
 public:
  virtual ~Env() = default;
  virtual std::string kind() const = 0;
  virtual int obs_h() const = 0;
  virtual int obs_w() const = 0;
  virtual int obs_c() const = 0;
  virtual bool discrete_actions() const = 0;
  virtual int action_dim() const = 0;        // categories or continuous dims
  virtual int horizon() const = 0;

  virtual Tensor reset(std::uint64_t seed) = 0;
  virtual StepResult step(const Action& a) = 0;
  virtual Tensor observe() const = 0;
  virtual bool done() const = 0;

  virtual EnvSnapshot snapshot() const = 0;
  virtual void restore(const EnvSnapshot& s) = 0;
  virtual std::unique_ptr<Env> clone() const = 0;

  std::vector<int> obs_shape() const { return {1, obs_h(), obs_w(), obs_c()}; }
};

std::uint64_t obs_hash(const Tensor& obs);

// ---------------------------------------------------------------------------
// LaneWorld: egocentric lane-following with continuous (velocity, steering)
// actions. Channels: 0 = left white line, 1 = middle yellow line (dashed),
// 2 = right white line, 3 = grass.
// ---------------------------------------------------------------------------

enum class LanePattern { lane0, lane1, lane2, lane3, lane4, zigzag };
LanePattern lane_pattern_from_string(const std::string& s);
const char* lane_pattern_name(LanePattern p);

struct LaneWorldConfig {
  int h = 16, w = 16;
  int horizon = 128;
  float dt = 0.1f;
  float k_omega = 0.3f;
  float w_v = 0.5f;              // speed reward
  float w_d = 1.0f;              // lane deviation penalty
  float w_theta = 0.5f;          // heading deviation penalty
  float offroad_penalty = 5.0f;
  float offroad_margin = 0.25f;  // beyond half lane width, in lane widths
  float cells_per_lane = 4.0f;
  float depth_step = 0.12f;      // lanes of look-ahead per grid row
  float d0_range = 0.35f;        // reset lateral offset range
  float theta0_range = 0.25f;    // reset heading range (radians)
  LanePattern pattern = LanePattern::lane0;

  static LaneWorldConfig from(const Config& c);
};

struct LaneRegionMasks {
  // Row-major h*w booleans per region; disjoint by construction.
  std::vector<std::uint8_t> left_white, yellow, right_white, grass;
};

class LaneWorld final : public Env {
 public:
  explicit LaneWorld(LaneWorldConfig cfg);

  std::string kind() const override { return "lane"; }
  int obs_h() const override { return cfg_.h; }
  int obs_w() const override { return cfg_.w; }
  int obs_c() const override { return 4; }
  bool discrete_actions() const override { return false; }
  int action_dim() const override { return 2; }
  int horizon() const override { return cfg_.horizon; }

  Tensor reset(std::uint64_t seed) override;
  Tensor reset_explicit(float d, float theta);  // validated against invariants
  StepResult step(const Action& a) override;
  Tensor observe() const override;
  bool done() const override { return done_; }

  EnvSnapshot snapshot() const override;
  void restore(const EnvSnapshot& s) override;
  std::unique_ptr<Env> clone() const override { return std::make_unique<LaneWorld>(*this); }

  void set_pattern(LanePattern p) { cfg_.pattern = p; }
  LanePattern pattern() const { return cfg_.pattern; }
  LaneRegionMasks region_masks() const;  // geometry of the current state

  float lateral_offset() const { return d_; }
  float heading() const { return theta_; }
  float progress() const { return p_; }
  const LaneWorldConfig& config() const { return cfg_; }

  // Intensity-weighted estimate of d from the right-white channel alone
  // (bottom row); valid whenever that channel is nonempty there.
  static float reconstruct_d_from_right_line(const Tensor& obs, const LaneWorldConfig& cfg);

 private:
  LaneWorldConfig cfg_;
  float d_ = 0.0f, theta_ = 0.0f, p_ = 0.0f;
  int steps_ = 0;
  bool done_ = true;
  Rng rng_;
};

// ---------------------------------------------------------------------------
// CatchAvoid: falling balls and a paddle, discrete {left, stay, right}.
// Channels: 0 = balls, 1 = paddle. The catch and avoid variants share state
// and action spaces; only the reward differs.
// ---------------------------------------------------------------------------

enum class CatchVariant { catch_balls, avoid_balls };
enum class RewardMode { dense, terminal_only };

struct CatchAvoidConfig {
  int h = 12, w = 12;
  int n_balls = 3;
  int horizon = 40;
  int spawn_gap = 5;             // rows between consecutive ball spawns
  CatchVariant variant = CatchVariant::catch_balls;
  RewardMode reward_mode = RewardMode::dense;

  static CatchAvoidConfig from(const Config& c);
};

class CatchAvoid final : public Env {
 public:
  explicit CatchAvoid(CatchAvoidConfig cfg);

  std::string kind() const override { return "catch"; }
  int obs_h() const override { return cfg_.h; }
  int obs_w() const override { return cfg_.w; }
  int obs_c() const override { return 2; }
  bool discrete_actions() const override { return true; }
  int action_dim() const override { return 3; }
  int horizon() const override { return cfg_.horizon; }

  Tensor reset(std::uint64_t seed) override;
  StepResult step(const Action& a) override;
  Tensor observe() const override;
  bool done() const override { return done_; }

  EnvSnapshot snapshot() const override;
  void restore(const EnvSnapshot& s) override;
  std::unique_ptr<Env> clone() const override { return std::make_unique<CatchAvoid>(*this); }

  const CatchAvoidConfig& config() const { return cfg_; }
  int paddle_col() const { return paddle_; }
  int balls_caught() const { return caught_; }
  int balls_landed() const { return landed_; }

 private:
  CatchAvoidConfig cfg_;
  int paddle_ = 0;
  std::vector<std::pair<int, int>> balls_;  // (col, row); row < 0 = not yet visible
  int landed_ = 0, caught_ = 0, steps_ = 0;
  float pending_ = 0.0f;                    // withheld sum in terminal_only mode
  bool done_ = true;
  Rng rng_;
};

// Factory from env.* config keys.
std::unique_ptr<Env> make_env(const Config& c);

}  // namespace rlinrl
