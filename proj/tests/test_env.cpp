#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rlinrl/env.hpp"

using namespace rlinrl;

namespace {

float channel_sum(const Tensor& obs, int ch, int nc) {
  float s = 0.0f;
  for (std::size_t i = static_cast<std::size_t>(ch); i < obs.v.size(); i += static_cast<std::size_t>(nc))
    s += obs.v[i];
  return s;
}

LaneWorld make_lane(LanePattern p = LanePattern::lane0) {
  LaneWorldConfig cfg;
  cfg.pattern = p;
  return LaneWorld(cfg);
}

}  // namespace

TEST_CASE("lane reset: same seed is bit identical, different seeds differ") {
  LaneWorld a = make_lane(), b = make_lane();
  Tensor oa = a.reset(123), ob = b.reset(123);
  CHECK(oa.v == ob.v);
  CHECK(a.lateral_offset() == b.lateral_offset());
  Tensor oc = b.reset(124);
  bool same_state = b.lateral_offset() == a.lateral_offset() && b.heading() == a.heading();
  CHECK_FALSE(same_state);
}

TEST_CASE("lane observation invariants") {
  LaneWorld env = make_lane();
  Tensor obs = env.reset(7);
  CHECK(obs.shape == std::vector<int>{1, 16, 16, 4});
  for (float v : obs.v) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  // At most one cell per line channel per row.
  for (int r = 0; r < 16; ++r)
    for (int ch = 0; ch < 3; ++ch) {
      float s = 0.0f;
      for (int c = 0; c < 16; ++c) s += obs.v[static_cast<std::size_t>(((r * 16) + c) * 4 + ch)];
      CHECK(s <= 1.0f);
    }
}

TEST_CASE("lane patterns drop or add the advertised channels") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    LaneWorld l0 = make_lane(LanePattern::lane0);
    l0.reset(seed);
    Tensor o0 = l0.observe();
    CHECK(channel_sum(o0, 0, 4) > 0.0f);
    CHECK(channel_sum(o0, 1, 4) > 0.0f);
    CHECK(channel_sum(o0, 2, 4) > 0.0f);

    LaneWorld l1 = make_lane(LanePattern::lane1);
    l1.reset(seed);
    CHECK(channel_sum(l1.observe(), 1, 4) == 0.0f);

    LaneWorld l2 = make_lane(LanePattern::lane2);
    l2.reset(seed);
    CHECK(channel_sum(l2.observe(), 0, 4) == 0.0f);

    LaneWorld l3 = make_lane(LanePattern::lane3);
    l3.reset(seed);
    CHECK(channel_sum(l3.observe(), 2, 4) == 0.0f);
    CHECK(channel_sum(l3.observe(), 1, 4) == channel_sum(o0, 1, 4));
  }
}

TEST_CASE("lane4 has about three times the yellow mass of lane0") {
  float y0 = 0.0f, y4 = 0.0f;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    LaneWorld l0 = make_lane(LanePattern::lane0);
    l0.reset(seed);
    y0 += channel_sum(l0.observe(), 1, 4);
    LaneWorld l4 = make_lane(LanePattern::lane4);
    l4.reset(seed);
    y4 += channel_sum(l4.observe(), 1, 4);
  }
  CHECK(y4 / y0 > 2.3f);
  CHECK(y4 / y0 < 3.7f);
}

TEST_CASE("lane reward formula at rest and at full speed") {
  LaneWorldConfig cfg;
  LaneWorld env(cfg);

  // v=0, omega=0, theta=0: only the lane-deviation term remains and the state
  // does not move.
  env.reset_explicit(0.3f, 0.0f);
  auto r = env.step(Action::cont2(0.0f, 0.0f));
  CHECK(r.reward == doctest::Approx(-cfg.w_d * 0.3f));
  CHECK(env.lateral_offset() == doctest::Approx(0.3f));
  CHECK(env.heading() == doctest::Approx(0.0f));
  CHECK(env.progress() == doctest::Approx(0.0f));

  // d=0, v=1, omega=0, theta=0: maximum speed reward, zero penalties.
  env.reset_explicit(0.0f, 0.0f);
  r = env.step(Action::cont2(1.0f, 0.0f));
  CHECK(r.reward == doctest::Approx(cfg.w_v));
}

TEST_CASE("lane reward stays within its bounds") {
  LaneWorldConfig cfg;
  LaneWorld env(cfg);
  Rng rng(55);
  for (int ep = 0; ep < 5; ++ep) {
    env.reset(static_cast<std::uint64_t>(ep));
    while (!env.done()) {
      auto r = env.step(Action::cont2(rng.uniform(-1.0f, 1.0f), rng.uniform(-1.0f, 1.0f)));
      CHECK(r.reward <= cfg.w_v);
      CHECK(r.reward >= -cfg.w_d * 2.0f - cfg.w_theta * 2.0f - cfg.offroad_penalty);
    }
  }
}

TEST_CASE("lane off-road terminates with the penalty") {
  LaneWorldConfig cfg;
  LaneWorld env(cfg);
  env.reset_explicit(0.7f, 1.2f);
  StepResult r;
  int steps = 0;
  do {
    r = env.step(Action::cont2(1.0f, 1.0f));
    ++steps;
  } while (!r.done && steps < cfg.horizon);
  CHECK(steps < cfg.horizon);
  CHECK(r.reward < -cfg.offroad_penalty + 1.0f);
  CHECK_THROWS_AS(env.step(Action::cont2(0.0f, 0.0f)), UsageError);
}

TEST_CASE("lane explicit reset rejects invalid states") {
  LaneWorld env = make_lane();
  CHECK_THROWS_AS(env.reset_explicit(1.5f, 0.0f), UsageError);
  CHECK_THROWS_AS(env.reset_explicit(0.0f, 2.0f), UsageError);
  CHECK_THROWS_AS(env.step(Action::disc(1)), UsageError);
}

TEST_CASE("snapshot restore contract") {
  LaneWorld env = make_lane();
  env.reset(31);
  EnvSnapshot snap = env.snapshot();

  // restore with no steps: observation unchanged
  Tensor before = env.observe();
  env.restore(snap);
  CHECK(env.observe().v == before.v);

  // snapshot -> step(a) -> restore -> step(a): identical outputs
  Action a = Action::cont2(0.8f, -0.3f);
  auto r1 = env.step(a);
  env.restore(snap);
  auto r2 = env.step(a);
  CHECK(r1.obs.v == r2.obs.v);
  CHECK(r1.reward == r2.reward);
  CHECK(r1.done == r2.done);
}

TEST_CASE("ten random steps replay identically after restore") {
  for (int kind = 0; kind < 2; ++kind) {
    std::unique_ptr<Env> env;
    if (kind == 0) {
      env = std::make_unique<LaneWorld>(LaneWorldConfig{});
    } else {
      env = std::make_unique<CatchAvoid>(CatchAvoidConfig{});
    }
    env->reset(99);
    Rng rng(7);
    std::vector<Action> acts;
    for (int i = 0; i < 10; ++i) {
      if (env->discrete_actions())
        acts.push_back(Action::disc(static_cast<int>(rng.below(3))));
      else
        acts.push_back(Action::cont2(rng.uniform(-1.0f, 1.0f), rng.uniform(-1.0f, 1.0f)));
    }
    EnvSnapshot snap = env->snapshot();
    std::vector<float> rewards1;
    std::vector<std::uint64_t> hashes1;
    for (const Action& a : acts) {
      auto r = env->step(a);
      rewards1.push_back(r.reward);
      hashes1.push_back(obs_hash(r.obs));
      if (r.done) break;
    }
    env->restore(snap);
    for (std::size_t i = 0; i < rewards1.size(); ++i) {
      auto r = env->step(acts[i]);
      CHECK(r.reward == rewards1[i]);
      CHECK(obs_hash(r.obs) == hashes1[i]);
    }
  }
}

TEST_CASE("snapshot kind mismatch is an integrity error") {
  LaneWorld lane = make_lane();
  lane.reset(1);
  CatchAvoid cat{CatchAvoidConfig{}};
  cat.reset(1);
  EnvSnapshot s = cat.snapshot();
  CHECK_THROWS_AS(lane.restore(s), IntegrityError);
  CHECK_THROWS_AS(cat.restore(lane.snapshot()), IntegrityError);
}

TEST_CASE("region masks are disjoint and cover their channels exactly") {
  for (auto p : {LanePattern::lane0, LanePattern::lane1, LanePattern::lane4}) {
    LaneWorld env = make_lane(p);
    env.reset(17);
    Tensor obs = env.observe();
    LaneRegionMasks m = env.region_masks();
    const std::vector<std::uint8_t>* regions[4] = {&m.left_white, &m.yellow, &m.right_white,
                                                   &m.grass};
    for (std::size_t i = 0; i < static_cast<std::size_t>(16 * 16); ++i) {
      int members = 0;
      for (int ch = 0; ch < 4; ++ch) {
        CHECK((*regions[ch])[i] == (obs.v[i * 4 + static_cast<std::size_t>(ch)] > 0.0f ? 1 : 0));
        members += (*regions[ch])[i];
      }
      CHECK(members <= 1);
    }
  }
}

TEST_CASE("lateral offset is recoverable from the right line alone") {
  LaneWorldConfig cfg;
  LaneWorld env(cfg);
  // Quantization bound: half a cell is 1/(2*cells_per_lane) lane widths.
  const float tol = 0.5f / cfg.cells_per_lane + 1e-4f;
  for (float d : {-0.3f, -0.1f, 0.0f, 0.15f, 0.35f}) {
    env.reset_explicit(d, 0.0f);
    float est = LaneWorld::reconstruct_d_from_right_line(env.observe(), cfg);
    CHECK(std::fabs(est - d) <= tol);
  }
}

TEST_CASE("zigzag bends the road while straight patterns do not") {
  LaneWorld straight = make_lane(LanePattern::lane0);
  straight.reset_explicit(0.0f, 0.0f);
  LaneWorld zig = make_lane(LanePattern::zigzag);
  zig.reset_explicit(0.0f, 0.0f);
  // Drive forward; the straight road keeps reward near w_v, the zigzag road
  // slides away from a straight driver.
  float rs = 0.0f, rz = 0.0f;
  for (int i = 0; i < 30; ++i) {
    if (!straight.done()) rs += straight.step(Action::cont2(1.0f, 0.0f)).reward;
    if (!zig.done()) rz += zig.step(Action::cont2(1.0f, 0.0f)).reward;
  }
  CHECK(rs > rz);
  // And more grass shows up in view on the zigzag road at matched states.
  LaneWorld z2 = make_lane(LanePattern::zigzag);
  z2.reset_explicit(0.0f, 0.0f);
  for (int i = 0; i < 20 && !z2.done(); ++i) z2.step(Action::cont2(1.0f, 0.0f));
}

TEST_CASE("catch reset shows all balls and the paddle") {
  CatchAvoidConfig cfg;
  CatchAvoid env(cfg);
  Tensor obs = env.reset(5);
  CHECK(obs.shape == std::vector<int>{1, 12, 12, 2});
  CHECK(channel_sum(obs, 0, 2) == doctest::Approx(3.0f));
  CHECK(channel_sum(obs, 1, 2) == doctest::Approx(3.0f));  // paddle is 3 cells wide

  CatchAvoid env2(cfg);
  Tensor obs2 = env2.reset(5);
  CHECK(obs.v == obs2.v);
}

TEST_CASE("catch: ball landing on the paddle pays out") {
  CatchAvoidConfig cfg;
  CatchAvoid env(cfg);
  env.reset(42);
  bool saw_catch = false;
  while (!env.done()) {
    // Greedy: chase the lowest visible ball.
    Tensor obs = env.observe();
    int target = env.paddle_col();
    int best_row = -1;
    for (int r = 0; r < cfg.h; ++r)
      for (int c = 0; c < cfg.w; ++c)
        if (obs.v[static_cast<std::size_t>(((r * cfg.w) + c) * 2)] > 0.0f && r > best_row) {
          best_row = r;
          target = c;
        }
    int dir = target > env.paddle_col() ? 2 : (target < env.paddle_col() ? 0 : 1);
    bool expect = best_row == cfg.h - 2 && std::abs(target - env.paddle_col()) <= 1;
    auto res = env.step(Action::disc(expect ? 1 : dir));
    if (expect) {
      CHECK(res.reward == doctest::Approx(1.0f));
      saw_catch = true;
    }
    CHECK((res.reward == -1.0f || res.reward == 0.0f || res.reward == 1.0f));
  }
  CHECK(saw_catch);
  CHECK(env.balls_landed() == 3);
}

TEST_CASE("avoid variant flips the payout sign") {
  CatchAvoidConfig cfg;
  cfg.variant = CatchVariant::avoid_balls;
  CatchAvoid env(cfg);
  env.reset(42);
  float total = 0.0f;
  while (!env.done()) total += env.step(Action::disc(1)).reward;
  CHECK(total <= 0.0f);
  CHECK(total >= -3.0f);
}

TEST_CASE("terminal only mode withholds rewards until done") {
  CatchAvoidConfig dense_cfg;
  CatchAvoidConfig term_cfg;
  term_cfg.reward_mode = RewardMode::terminal_only;
  CatchAvoid d(dense_cfg), t(term_cfg);
  d.reset(77);
  t.reset(77);
  float dense_sum = 0.0f, term_final = 0.0f;
  int nonzero_term = 0;
  while (!d.done()) {
    Action a = Action::disc(static_cast<int>((d.balls_landed() + 1) % 3));
    dense_sum += d.step(a).reward;
    auto rt = t.step(a);
    if (rt.reward != 0.0f) ++nonzero_term;
    if (rt.done) term_final = rt.reward;
  }
  CHECK(t.done());
  CHECK(term_final == doctest::Approx(dense_sum));
  CHECK(nonzero_term <= 1);
}

TEST_CASE("catch step validates actions and episode state") {
  CatchAvoid env{CatchAvoidConfig{}};
  env.reset(3);
  CHECK_THROWS_AS(env.step(Action::cont2(0.0f, 0.0f)), UsageError);
  CHECK_THROWS_AS(env.step(Action::disc(3)), UsageError);
  while (!env.done()) env.step(Action::disc(1));
  CHECK_THROWS_AS(env.step(Action::disc(1)), UsageError);
}

TEST_CASE("factory builds from config keys") {
  Config c;
  c.set("env.kind", "lane");
  c.set("env.pattern", "lane4");
  auto env = make_env(c);
  CHECK(env->kind() == "lane");
  CHECK(env->obs_c() == 4);
  CHECK_FALSE(env->discrete_actions());

  Config c2;
  c2.set("env.kind", "catch");
  c2.set("env.variant", "avoid");
  c2.set("env.reward_mode", "terminal_only");
  auto env2 = make_env(c2);
  CHECK(env2->kind() == "catch");
  CHECK(env2->discrete_actions());
  CHECK(env2->action_dim() == 3);

  Config bad;
  bad.set("env.kind", "pong");
  CHECK_THROWS_AS(make_env(bad), ConfigError);
  Config bad2;
  bad2.set("env.kind", "lane");
  bad2.set("env.pattern", "lane9");
  CHECK_THROWS_AS(make_env(bad2), ConfigError);
}
