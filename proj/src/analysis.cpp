#include "rlinrl/analysis.hpp"

#include <cmath>

namespace rlinrl {

MaskSource identity_mask_source() {
  return [](const Tensor& s) { return Tensor::full({1, s.shape[1], s.shape[2], 1}, 1.0f); };
}

MaskSource zero_mask_source() {
  return [](const Tensor& s) { return Tensor::zeros({1, s.shape[1], s.shape[2], 1}); };
}

MaskSource interpreter_mask_source(MaskNetwork& mask) {
  return [&mask](const Tensor& s) { return mask.compute_mask(s); };
}

MaskSource jacobian_mask_source(PolicyNetwork& pre, float q) {
  return [&pre, q](const Tensor& s) { return saliency_to_mask(jacobian_saliency(pre, s), q); };
}

MaskSource perturbation_mask_source(PolicyNetwork& pre, const PerturbationConfig& cfg, float q) {
  return [&pre, cfg, q](const Tensor& s) {
    return saliency_to_mask(perturbation_saliency(pre, s, cfg), q);
  };
}

ReturnStats masked_return_eval(Env& env, PolicyNetwork& pre, const MaskSource& ms, int episodes,
                               std::uint64_t seed) {
  if (episodes < 1) throw UsageError("masked_return_eval: episodes must be >= 1");
  ReturnStats st;
  Rng reset_rng = Rng(seed).split(1);
  for (int ep = 0; ep < episodes; ++ep) {
    env.reset(reset_rng.next_u64());
    float total = 0.0f;
    while (!env.done()) {
      Tensor s = env.observe();
      Action a = pre.act_deterministic(attentive_state(s, ms(s)));
      total += env.step(a).reward;
    }
    st.per_episode.push_back(total);
  }
  double m = 0.0;
  for (float r : st.per_episode) m += r;
  m /= episodes;
  double var = 0.0;
  for (float r : st.per_episode) var += (r - m) * (r - m);
  st.mean = static_cast<float>(m);
  st.sd = static_cast<float>(std::sqrt(var / episodes));
  return st;
}

std::vector<LaneAblationRow> lane_ablation(const LaneWorldConfig& cfg, PolicyNetwork& pre,
                                           const std::vector<LanePattern>& patterns, int episodes,
                                           std::uint64_t seed) {
  std::vector<LanePattern> all = {LanePattern::lane0};
  for (LanePattern p : patterns)
    if (p != LanePattern::lane0) all.push_back(p);

  std::vector<LaneAblationRow> rows;
  MaskSource id = identity_mask_source();
  for (LanePattern p : all) {
    LaneWorldConfig c = cfg;
    c.pattern = p;
    LaneWorld env(c);
    ReturnStats st = masked_return_eval(env, pre, id, episodes, seed);
    rows.push_back({p, st.mean, 0.0f});
  }
  float base = rows[0].mean_return;
  for (auto& r : rows) r.percent = base != 0.0f ? 100.0f * r.mean_return / base : 0.0f;
  rows[0].percent = 100.0f;
  return rows;
}

float kl_histogram(const std::vector<int>& ca, const std::vector<int>& cb, float eps) {
  if (ca.size() != cb.size() || ca.empty()) throw UsageError("kl_histogram: bin mismatch");
  double na = 0, nb = 0;
  for (int c : ca) na += c;
  for (int c : cb) nb += c;
  double b = static_cast<double>(ca.size());
  double kl = 0.0;
  for (std::size_t i = 0; i < ca.size(); ++i) {
    double p = (ca[i] + eps) / (na + eps * b);
    double q = (cb[i] + eps) / (nb + eps * b);
    kl += p * std::log(p / q);
  }
  return static_cast<float>(std::max(kl, 0.0));
}

float action_divergence(Env& env, PolicyNetwork& pre, MaskNetwork& mask,
                        const DivergenceConfig& cfg, std::uint64_t seed) {
  if (cfg.steps < 1) throw UsageError("action_divergence: steps must be >= 1");
  if (cfg.bins < 2) throw ConfigError("action_divergence: bins must be >= 2");

  int dims = env.discrete_actions() ? 1 : env.action_dim();
  int bins = env.discrete_actions() ? env.action_dim() : cfg.bins;
  std::vector<std::vector<int>> ha(static_cast<std::size_t>(dims), std::vector<int>(static_cast<std::size_t>(bins), 0));
  std::vector<std::vector<int>> hb = ha;

  auto roll = [&](bool masked, std::vector<std::vector<int>>& hist) {
    Rng reset_rng = Rng(seed).split(7);
    env.reset(reset_rng.next_u64());
    for (int t = 0; t < cfg.steps; ++t) {
      if (env.done()) env.reset(reset_rng.next_u64());
      Tensor s = env.observe();
      Action a = masked ? pre.act_deterministic(attentive_state(s, mask.compute_mask(s)))
                        : pre.act_deterministic(s);
      if (env.discrete_actions()) {
        ++hist[0][static_cast<std::size_t>(a.discrete)];
      } else {
        for (int d = 0; d < dims; ++d) {
          float v = std::clamp(a.cont[static_cast<std::size_t>(d)], -1.0f, 1.0f);
          int b = static_cast<int>((v + 1.0f) * 0.5f * static_cast<float>(bins));
          b = std::clamp(b, 0, bins - 1);
          ++hist[static_cast<std::size_t>(d)][static_cast<std::size_t>(b)];
        }
      }
      env.step(a);
    }
  };
  roll(false, ha);
  roll(true, hb);

  float kl = 0.0f;
  for (int d = 0; d < dims; ++d)
    kl += kl_histogram(ha[static_cast<std::size_t>(d)], hb[static_cast<std::size_t>(d)], cfg.eps);
  return kl;
}

namespace {

struct MassAcc {
  double sum = 0.0;
  int n = 0;
  void add(const Tensor& m, const std::vector<std::uint8_t>& region) {
    double s = 0.0;
    int cnt = 0;
    for (std::size_t i = 0; i < region.size(); ++i)
      if (region[i]) {
        s += m.v[i];
        ++cnt;
      }
    if (cnt > 0) {
      sum += s / cnt;
      ++n;
    }
  }
  std::optional<float> result() const {
    if (n == 0) return std::nullopt;
    return static_cast<float>(sum / n);
  }
};

}  // namespace

RegionReport region_attention(LaneWorld& env, const MaskSource& ms, int n_states,
                              std::uint64_t seed) {
  if (n_states < 1) throw UsageError("region_attention: need at least one state");
  Rng reset_rng = Rng(seed).split(1);
  MassAcc left, yellow, right, grass, other;
  for (int i = 0; i < n_states; ++i) {
    env.reset(reset_rng.next_u64());
    Tensor s = env.observe();
    Tensor m = ms(s);
    LaneRegionMasks rm = env.region_masks();
    std::vector<std::uint8_t> rest(rm.grass.size(), 1);
    for (std::size_t j = 0; j < rest.size(); ++j)
      if (rm.left_white[j] || rm.yellow[j] || rm.right_white[j] || rm.grass[j]) rest[j] = 0;
    left.add(m, rm.left_white);
    yellow.add(m, rm.yellow);
    right.add(m, rm.right_white);
    grass.add(m, rm.grass);
    other.add(m, rest);
  }
  RegionReport rep;
  rep.left_white = left.result();
  rep.yellow = yellow.result();
  rep.right_white = right.result();
  rep.grass = grass.result();
  rep.other = other.result();
  return rep;
}

SparseStats sparse_reward_stats(Env& env, PolicyNetwork* pol, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw UsageError("sparse_reward_stats: episodes must be >= 1");
  Rng rng(seed);
  Rng reset_rng = rng.split(1), act_rng = rng.split(2);
  long steps_total = 0, nonzero_total = 0;
  for (int ep = 0; ep < episodes; ++ep) {
    env.reset(reset_rng.next_u64());
    while (!env.done()) {
      Action a;
      if (pol) {
        a = pol->act_deterministic(env.observe());
      } else if (env.discrete_actions()) {
        a = Action::disc(static_cast<int>(act_rng.below(static_cast<std::uint32_t>(env.action_dim()))));
      } else {
        a.cont.resize(static_cast<std::size_t>(env.action_dim()));
        for (float& v : a.cont) v = act_rng.uniform(-1.0f, 1.0f);
      }
      StepResult r = env.step(a);
      ++steps_total;
      if (r.reward != 0.0f) ++nonzero_total;
    }
  }
  SparseStats st;
  st.mean_horizon = static_cast<float>(steps_total) / static_cast<float>(episodes);
  st.mean_nonzero_steps = static_cast<float>(nonzero_total) / static_cast<float>(episodes);
  st.percentage = steps_total > 0 ? static_cast<float>(nonzero_total) / static_cast<float>(steps_total)
                                  : 0.0f;
  return st;
}

std::vector<ShiftRow> attention_shift_report(LaneWorld& env, PolicyNetwork& pre, MaskNetwork& mask,
                                             int steps, std::uint64_t seed) {
  if (steps < 1) throw UsageError("attention_shift_report: steps must be >= 1");
  Rng reset_rng = Rng(seed).split(1);
  env.reset(reset_rng.next_u64());
  std::vector<ShiftRow> rows;
  for (int t = 0; t < steps; ++t) {
    if (env.done()) env.reset(reset_rng.next_u64());
    Tensor s = env.observe();
    Tensor m = mask.compute_mask(s);
    LaneRegionMasks rm = env.region_masks();
    auto mass = [&](const std::vector<std::uint8_t>& region) {
      double sum = 0.0;
      int cnt = 0;
      for (std::size_t i = 0; i < region.size(); ++i)
        if (region[i]) {
          sum += m.v[i];
          ++cnt;
        }
      return cnt > 0 ? static_cast<float>(sum / cnt) : 0.0f;
    };
    ShiftRow row;
    row.grass_mass = mass(rm.grass);
    row.right_mass = mass(rm.right_white);
    row.flagged = row.grass_mass > row.right_mass;
    rows.push_back(row);
    env.step(pre.act_deterministic(s));
  }
  return rows;
}

RetrainReport retrain_without_yellow_experiment(const LaneWorldConfig& lane_cfg,
                                                const PPOConfig& ppo_cfg,
                                                InterpreterConfig action_cfg,
                                                InterpreterConfig reward_cfg, std::uint64_t seed,
                                                std::ostream* log) {
  Rng rng(seed);

  // Policy that has never seen the yellow line.
  LaneWorldConfig no_yellow = lane_cfg;
  no_yellow.pattern = LanePattern::lane1;
  LaneWorld train_env(no_yellow);
  Rng net_rng = rng.split(1);
  PolicyNetwork pre = PolicyNetwork::for_env(train_env, net_rng);
  pretrain(train_env, pre, ppo_cfg, rng.split(2).next_u64(), log);

  // Its reward is independent of the yellow channel by construction.
  RetrainReport rep;
  auto rows = lane_ablation(no_yellow, pre, {LanePattern::lane1}, 50, rng.split(3).next_u64());
  float with_yellow = rows[0].mean_return;  // lane0: yellow added back
  float without = rows[1].mean_return;
  rep.fy_ablation_delta = std::fabs(with_yellow - without) / std::max(std::fabs(without), 1e-6f);

  // Interpret over lane0 renders, where the yellow line is visible.
  LaneWorldConfig full = lane_cfg;
  full.pattern = LanePattern::lane0;
  action_cfg.mode = InterpretMode::action_supervised;
  reward_cfg.mode = InterpretMode::reward;

  LaneWorld env_a(full);
  Rng mrng_a = rng.split(4);
  MaskNetwork mask_a(pre, action_cfg.beta, mrng_a);
  train_interpreter(env_a, pre, mask_a, action_cfg, rng.split(5).next_u64(), log);
  LaneWorld env_r(full);
  Rng mrng_r = rng.split(6);
  MaskNetwork mask_r(pre, reward_cfg.beta, mrng_r);
  train_interpreter(env_r, pre, mask_r, reward_cfg, rng.split(7).next_u64(), log);

  LaneWorld probe(full);
  rep.action_matching =
      region_attention(probe, interpreter_mask_source(mask_a), 100, rng.split(8).next_u64());
  rep.reward_matching =
      region_attention(probe, interpreter_mask_source(mask_r), 100, rng.split(9).next_u64());
  return rep;
}

}  // namespace rlinrl
