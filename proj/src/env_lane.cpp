#include <cmath>
#include <cstring>

#include "env_blob.hpp"
#include "rlinrl/env.hpp"
#include "rlinrl/io.hpp"

namespace rlinrl {

std::uint64_t obs_hash(const Tensor& obs) {
  return fnv1a64(reinterpret_cast<const std::uint8_t*>(obs.v.data()), obs.v.size() * sizeof(float));
}

LanePattern lane_pattern_from_string(const std::string& s) {
  if (s == "lane0") return LanePattern::lane0;
  if (s == "lane1") return LanePattern::lane1;
  if (s == "lane2") return LanePattern::lane2;
  if (s == "lane3") return LanePattern::lane3;
  if (s == "lane4") return LanePattern::lane4;
  if (s == "zigzag") return LanePattern::zigzag;
  throw ConfigError("unknown lane pattern: " + s);
}

const char* lane_pattern_name(LanePattern p) {
  switch (p) {
    case LanePattern::lane0: return "lane0";
    case LanePattern::lane1: return "lane1";
    case LanePattern::lane2: return "lane2";
    case LanePattern::lane3: return "lane3";
    case LanePattern::lane4: return "lane4";
    case LanePattern::zigzag: return "zigzag";
  }
  return "?";
}

LaneWorldConfig LaneWorldConfig::from(const Config& c) {
  LaneWorldConfig k;
  k.h = static_cast<int>(c.get_int("env.h", k.h));
  k.w = static_cast<int>(c.get_int("env.w", k.w));
  k.horizon = static_cast<int>(c.get_int("env.horizon", k.horizon));
  k.dt = static_cast<float>(c.get_num("env.dt", k.dt));
  k.k_omega = static_cast<float>(c.get_num("env.k_omega", k.k_omega));
  k.w_v = static_cast<float>(c.get_num("env.reward.w_v", k.w_v));
  k.w_d = static_cast<float>(c.get_num("env.reward.w_d", k.w_d));
  k.w_theta = static_cast<float>(c.get_num("env.reward.w_theta", k.w_theta));
  k.offroad_penalty = static_cast<float>(c.get_num("env.reward.offroad_penalty", k.offroad_penalty));
  k.offroad_margin = static_cast<float>(c.get_num("env.reward.offroad_margin", k.offroad_margin));
  k.cells_per_lane = static_cast<float>(c.get_num("env.cells_per_lane", k.cells_per_lane));
  k.depth_step = static_cast<float>(c.get_num("env.depth_step", k.depth_step));
  k.d0_range = static_cast<float>(c.get_num("env.d0_range", k.d0_range));
  k.theta0_range = static_cast<float>(c.get_num("env.theta0_range", k.theta0_range));
  k.pattern = lane_pattern_from_string(c.get_str("env.pattern", "lane0"));
  if (k.h < 4 || k.w < 8) throw ConfigError("lane env grid too small");
  return k;
}

namespace {

// Road centerline lateral offset at longitudinal position s. Zero for every
// pattern except zigzag, whose triangle wave never appears during lane0
// training.
float curve_offset(LanePattern p, float s) {
  if (p != LanePattern::zigzag) return 0.0f;
  const float period = 6.0f;
  const float amp = 1.2f;
  return amp * std::asin(std::sin(6.28318530717958647692f * s / period)) * 0.636619772367581343f;
}

// Dash segments tied to road position: duty is the on-fraction per unit of
// longitudinal distance. The solid right line (duty 1) is the only cue
// present in every row; the left line and especially the yellow line are
// intermittent, so the right line is the most reliable localization feature.
bool dash_on(float s, float duty) {
  if (duty >= 1.0f) return true;
  float f = s - std::floor(s);
  return f < duty;
}

struct LineDef {
  float x0;       // lateral position in lane widths, right-lane center = 0
  int channel;
  float duty;     // 1 = solid
};

constexpr float kLeftDuty = 0.65f;
constexpr float kYellowDuty = 0.5f;

// Road spans [-1.5, +0.5]: left white edge, yellow center line, right white
// edge. lane4 adds two extra yellows between them.
void pattern_lines(LanePattern p, std::vector<LineDef>& out) {
  out.clear();
  bool left = p != LanePattern::lane2;
  bool yellow = p != LanePattern::lane1;
  bool right = p != LanePattern::lane3;
  if (left) out.push_back({-1.5f, 0, kLeftDuty});
  if (yellow) out.push_back({-0.5f, 1, kYellowDuty});
  if (right) out.push_back({0.5f, 2, 1.0f});
  if (p == LanePattern::lane4) {
    out.push_back({-1.0f, 1, kYellowDuty});
    out.push_back({0.0f, 1, kYellowDuty});
  }
}

// Sparse deterministic grass tufts anchored to world coordinates: the grass
// region is visually present but its boundary is too noisy to localize from,
// unlike the solid road lines.
bool grass_tuft(float x_road, float s) {
  auto ix = static_cast<std::int64_t>(std::floor(x_road * 2.0f));
  auto iy = static_cast<std::int64_t>(std::floor(s * 2.0f));
  std::uint64_t h = static_cast<std::uint64_t>(ix) * 0x9E3779B97F4A7C15ULL ^
                    static_cast<std::uint64_t>(iy) * 0xBF58476D1CE4E5B9ULL;
  h ^= h >> 31;
  h *= 0x94D049BB133111EBULL;
  h ^= h >> 29;
  return (h >> 32) % 100 < 22;
}

int render_col(float lateral, float cells_per_lane, int w) {
  float c = 0.5f * static_cast<float>(w - 1) + lateral * cells_per_lane;
  int col = static_cast<int>(std::lround(c));
  return (col >= 0 && col < w) ? col : -1;
}

}  // namespace

LaneWorld::LaneWorld(LaneWorldConfig cfg) : cfg_(cfg) {}

Tensor LaneWorld::reset(std::uint64_t seed) {
  rng_ = Rng(seed).split(0x1a5eULL);
  d_ = rng_.uniform(-cfg_.d0_range, cfg_.d0_range);
  theta_ = rng_.uniform(-cfg_.theta0_range, cfg_.theta0_range);
  p_ = rng_.uniform(0.0f, 4.0f);
  steps_ = 0;
  done_ = false;
  return observe();
}

Tensor LaneWorld::reset_explicit(float d, float theta) {
  const float limit = 0.5f + cfg_.offroad_margin;
  if (std::fabs(d) > limit)
    throw UsageError("reset_explicit: |d| exceeds on-road limit " + std::to_string(limit));
  if (std::fabs(theta) > 1.5f)
    throw UsageError("reset_explicit: |theta| exceeds 1.5 rad");
  d_ = d;
  theta_ = theta;
  p_ = 0.0f;
  steps_ = 0;
  done_ = false;
  return observe();
}

StepResult LaneWorld::step(const Action& a) {
  if (done_) throw UsageError("step after episode end");
  if (a.is_discrete() || a.cont.size() != 2)
    throw UsageError("lane env expects a 2-dim continuous action");
  float v = std::clamp(a.cont[0], -1.0f, 1.0f);
  float omega = std::clamp(a.cont[1], -1.0f, 1.0f);

  theta_ += cfg_.k_omega * omega;
  d_ += v * std::sin(theta_) * cfg_.dt;
  p_ += v * std::cos(theta_) * cfg_.dt;
  ++steps_;

  // Offsets relative to the road centerline; identical to the raw state on
  // straight patterns.
  float drel = d_ - curve_offset(cfg_.pattern, p_);
  bool offroad = std::fabs(drel) > 0.5f + cfg_.offroad_margin;

  StepResult r;
  r.reward = cfg_.w_v * std::max(v, 0.0f) - cfg_.w_d * std::fabs(drel) -
             cfg_.w_theta * std::fabs(theta_) - (offroad ? cfg_.offroad_penalty : 0.0f);
  done_ = offroad || steps_ >= cfg_.horizon;
  r.done = done_;
  r.obs = observe();
  return r;
}

Tensor LaneWorld::observe() const {
  Tensor obs = Tensor::zeros({1, cfg_.h, cfg_.w, 4});
  std::vector<LineDef> lines;
  pattern_lines(cfg_.pattern, lines);
  auto at = [&](int r, int c, int ch) -> float& {
    return obs.v[static_cast<std::size_t>(((r * cfg_.w) + c) * 4 + ch)];
  };
  for (int r = 0; r < cfg_.h; ++r) {
    float depth = static_cast<float>(cfg_.h - 1 - r) * cfg_.depth_step;
    float s = p_ + depth;
    float road = curve_offset(cfg_.pattern, s);
    float shift = -d_ - theta_ * depth + road;
    for (const LineDef& l : lines) {
      if (!dash_on(s + l.x0, l.duty)) continue;
      int col = render_col(l.x0 + shift, cfg_.cells_per_lane, cfg_.w);
      if (col >= 0) at(r, col, l.channel) = 1.0f;
    }
    // Grass strictly outside the road edges, regardless of which lines are
    // drawn in this pattern.
    int left_edge = static_cast<int>(std::lround(0.5f * static_cast<float>(cfg_.w - 1) +
                                                 (-1.5f + shift) * cfg_.cells_per_lane));
    int right_edge = static_cast<int>(std::lround(0.5f * static_cast<float>(cfg_.w - 1) +
                                                  (0.5f + shift) * cfg_.cells_per_lane));
    for (int c = 0; c < cfg_.w; ++c) {
      if (c >= left_edge && c <= right_edge) continue;
      float x_road = (static_cast<float>(c) - 0.5f * static_cast<float>(cfg_.w - 1)) /
                         cfg_.cells_per_lane - shift;
      if (grass_tuft(x_road, s)) at(r, c, 3) = 1.0f;
    }
  }
  return obs;
}

LaneRegionMasks LaneWorld::region_masks() const {
  Tensor obs = observe();
  LaneRegionMasks m;
  const std::size_t n = static_cast<std::size_t>(cfg_.h * cfg_.w);
  m.left_white.assign(n, 0);
  m.yellow.assign(n, 0);
  m.right_white.assign(n, 0);
  m.grass.assign(n, 0);
  std::vector<std::uint8_t>* chans[4] = {&m.left_white, &m.yellow, &m.right_white, &m.grass};
  for (std::size_t i = 0; i < n; ++i)
    for (int ch = 0; ch < 4; ++ch)
      if (obs.v[i * 4 + static_cast<std::size_t>(ch)] > 0.0f) (*chans[ch])[i] = 1;
  return m;
}

float LaneWorld::reconstruct_d_from_right_line(const Tensor& obs, const LaneWorldConfig& cfg) {
  // Bottom row is depth zero, so the right line's column encodes d directly.
  int r = cfg.h - 1;
  for (int c = 0; c < cfg.w; ++c) {
    if (obs.v[static_cast<std::size_t>(((r * cfg.w) + c) * 4 + 2)] > 0.0f) {
      float lateral = (static_cast<float>(c) - 0.5f * static_cast<float>(cfg.w - 1)) / cfg.cells_per_lane;
      return 0.5f - lateral;
    }
  }
  throw UsageError("right line not visible in bottom row");
}

EnvSnapshot LaneWorld::snapshot() const {
  EnvSnapshot s;
  s.kind = kind();
  blob::put_f32(s.blob, d_);
  blob::put_f32(s.blob, theta_);
  blob::put_f32(s.blob, p_);
  blob::put_i32(s.blob, steps_);
  blob::put_i32(s.blob, done_ ? 1 : 0);
  blob::put_i32(s.blob, static_cast<std::int32_t>(cfg_.pattern));
  blob::put_u64(s.blob, rng_.key());
  blob::put_u64(s.blob, rng_.counter());
  return s;
}

void LaneWorld::restore(const EnvSnapshot& s) {
  if (s.kind != kind())
    throw IntegrityError("snapshot kind '" + s.kind + "' cannot restore a '" + kind() + "' env");
  blob::Reader r{s.blob};
  d_ = r.f32();
  theta_ = r.f32();
  p_ = r.f32();
  steps_ = r.i32();
  done_ = r.i32() != 0;
  cfg_.pattern = static_cast<LanePattern>(r.i32());
  std::uint64_t key = r.u64(), ctr = r.u64();
  rng_.set_state(key, ctr);
  r.done();
}

std::unique_ptr<Env> make_env(const Config& c) {
  std::string kind = c.get_str("env.kind");
  if (kind == "lane") return std::make_unique<LaneWorld>(LaneWorldConfig::from(c));
  if (kind == "catch") return std::make_unique<CatchAvoid>(CatchAvoidConfig::from(c));
  throw ConfigError("unknown env.kind: " + kind);
}

}  // namespace rlinrl
