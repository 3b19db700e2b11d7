#include "rlinrl/interpret.hpp"

#include <cmath>
#include <sstream>

namespace rlinrl {

InterpretMode interpret_mode_from_string(const std::string& s) {
  if (s == "reward") return InterpretMode::reward;
  if (s == "reward_K") return InterpretMode::reward_K;
  if (s == "action_rl") return InterpretMode::action_rl;
  if (s == "action_supervised") return InterpretMode::action_supervised;
  throw ConfigError("unknown interpreter mode: " + s);
}

const char* interpret_mode_name(InterpretMode m) {
  switch (m) {
    case InterpretMode::reward: return "reward";
    case InterpretMode::reward_K: return "reward_K";
    case InterpretMode::action_rl: return "action_rl";
    case InterpretMode::action_supervised: return "action_supervised";
  }
  return "?";
}

DistanceKind distance_kind_from_string(const std::string& s) {
  if (s == "squared") return DistanceKind::squared;
  if (s == "absolute") return DistanceKind::absolute;
  throw ConfigError("unknown distance kind: " + s);
}

float distance(DistanceKind d, float a, float b) {
  float x = a - b;
  return d == DistanceKind::squared ? x * x : std::fabs(x);
}

float action_distance(DistanceKind d, const Action& a, const Action& b) {
  if (a.is_discrete() != b.is_discrete())
    throw UsageError("action_distance: mismatched action spaces");
  if (a.is_discrete()) {
    // One-hot embedding: distance vanishes iff the actions agree.
    if (a.discrete == b.discrete) return 0.0f;
    return d == DistanceKind::squared ? 2.0f : 2.0f;
  }
  if (a.cont.size() != b.cont.size())
    throw UsageError("action_distance: mismatched continuous dimensions");
  float s = 0.0f;
  for (std::size_t i = 0; i < a.cont.size(); ++i) s += distance(d, a.cont[i], b.cont[i]);
  return s;
}

InterpreterConfig InterpreterConfig::from(const Config& c) {
  InterpreterConfig k;
  k.mode = interpret_mode_from_string(c.get_str("interp.mode", "reward"));
  k.alpha = static_cast<float>(c.get_num("interp.alpha", k.alpha));
  k.beta = static_cast<float>(c.get_num("interp.beta", k.beta));
  k.K = static_cast<int>(c.get_int("interp.K", k.K));
  k.gamma = static_cast<float>(c.get_num("interp.gamma", k.gamma));
  k.dist = distance_kind_from_string(c.get_str("interp.dist", "squared"));
  k.episodes_per_epoch = static_cast<int>(c.get_int("interp.episodes_per_epoch", k.episodes_per_epoch));
  k.epochs = static_cast<int>(c.get_int("interp.epochs", k.epochs));
  k.lr = static_cast<float>(c.get_num("interp.lr", k.lr));
  k.pool_states = static_cast<int>(c.get_int("interp.pool_states", k.pool_states));
  k.ppo = PPOConfig::from(c, "interp.ppo.");
  k.validate();
  return k;
}

void InterpreterConfig::validate() const {
  if (alpha < 0.0f) throw ConfigError("interp.alpha must be >= 0");
  if (beta < 0.0f || beta >= 1.0f) throw ConfigError("interp.beta must lie in [0,1)");
  if (K < 1) throw ConfigError("interp.K must be >= 1");
  if (gamma <= 0.0f || gamma > 1.0f) throw ConfigError("interp.gamma must lie in (0,1]");
  if (episodes_per_epoch < 1 || epochs < 1) throw ConfigError("interp epoch sizes must be >= 1");
  if (pool_states < 1) throw ConfigError("interp.pool_states must be >= 1");
}

void StatePool::build(Env& env, PolicyNetwork& pre, int n, std::uint64_t seed) {
  snaps_.clear();
  Rng rng(seed);
  Rng sample = rng.split(1), reset = rng.split(2);
  env.reset(reset.next_u64());
  while (static_cast<int>(snaps_.size()) < n) {
    snaps_.push_back(env.snapshot());
    ActResult ar = pre.act_stochastic(env.observe(), sample);
    StepResult sr = env.step(ar.action);
    if (sr.done) env.reset(reset.next_u64());
  }
}

const EnvSnapshot& StatePool::sample(Rng& rng) const {
  if (snaps_.empty()) throw UsageError("state pool is empty");
  return snaps_[rng.below(static_cast<std::uint32_t>(snaps_.size()))];
}

namespace {

void restore_checked(Env& env, const EnvSnapshot& snap, const Tensor& s) {
  env.restore(snap);
  if (obs_hash(env.observe()) != obs_hash(s))
    throw IntegrityError("snapshot does not reproduce the branching state");
}

}  // namespace

float rlinrl_reward(Env& env, const EnvSnapshot& snap, const Tensor& s, PolicyNetwork& pre,
                    const Action& atilde, DistanceKind d) {
  restore_checked(env, snap, s);
  float r = env.step(pre.act_deterministic(s)).reward;
  env.restore(snap);
  float rp = env.step(atilde).reward;
  return -distance(d, r, rp);
}

BranchReturns branch_returns(Env& env, const EnvSnapshot& snap, const Tensor& s,
                             PolicyNetwork& pre, const Action& atilde, int K, float gamma) {
  if (K < 1) throw UsageError("branch_returns: K must be >= 1");
  BranchReturns out;
  restore_checked(env, snap, s);
  float disc = 1.0f;
  for (int i = 0; i < K && !env.done(); ++i) {
    out.ga += disc * env.step(pre.act_deterministic(env.observe())).reward;
    disc *= gamma;
  }
  env.restore(snap);
  disc = 1.0f;
  for (int i = 0; i < K && !env.done(); ++i) {
    Action a = i == 0 ? atilde : pre.act_deterministic(env.observe());
    out.gb += disc * env.step(a).reward;
    disc *= gamma;
  }
  return out;
}

float rlinrl_reward_K(Env& env, const EnvSnapshot& snap, const Tensor& s, PolicyNetwork& pre,
                      const Action& atilde, int K, float gamma, DistanceKind d) {
  BranchReturns g = branch_returns(env, snap, s, pre, atilde, K, gamma);
  return -distance(d, g.ga, g.gb);
}

float action_match_reward(const Action& a, const Action& atilde, DistanceKind d) {
  return -action_distance(d, a, atilde);
}

Action masked_action(PolicyNetwork& pre, MaskNetwork& mask, const Tensor& s) {
  return pre.act_deterministic(attentive_state(s, mask.compute_mask(s)));
}

namespace {

// Restores trainable flags on scope exit so training cannot leave the caller's
// networks in a frozen state.
struct FlagGuard {
  std::vector<Param*> params;
  std::vector<bool> saved;
  explicit FlagGuard(std::vector<Param*> ps) : params(std::move(ps)) {
    for (Param* p : params) saved.push_back(p->trainable);
  }
  ~FlagGuard() {
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->trainable = saved[i];
  }
};

float critic_value(PolicyNetwork& pre, Network& critic, const Tensor& s) {
  Tape t;
  return t.val(critic.forward(t, pre.features(t, t.leaf(s)))).v[0];
}

}  // namespace

InterpretResult train_interpreter(Env& env, PolicyNetwork& pre, MaskNetwork& mask,
                                  const InterpreterConfig& cfg, std::uint64_t seed,
                                  std::ostream* log) {
  cfg.validate();
  if (cfg.beta != mask.beta())
    throw ConfigError("interpreter beta does not match the mask network's");

  FlagGuard guard_pre(pre.all_params());
  pre.set_trainable_all(false);
  mask.freeze_encoder();
  for (Param* p : mask.decoder_params()) p->trainable = true;

  Rng rng(seed);
  Rng sample_rng = rng.split(1), reset_rng = rng.split(2), choose_rng = rng.split(3),
      update_rng = rng.split(4), net_rng = rng.split(5);

  StatePool pool;
  pool.build(env, pre, cfg.pool_states, rng.split(6).next_u64());

  // Fresh-start state: 50% env resets, 50% visitation snapshots.
  auto place_env = [&]() {
    if (choose_rng.uniform() < 0.5f)
      env.reset(reset_rng.next_u64());
    else
      env.restore(pool.sample(choose_rng));
  };

  InterpretResult res;

  auto check_health = [&](const InterpretEpochLog& el, int epoch) {
    if (!std::isfinite(el.mean_reward) || !std::isfinite(el.mean_sparsity))
      throw TrainingError("interpreter diverged (non-finite stats) at epoch " +
                          std::to_string(epoch));
    if (el.mean_sparsity == 0.0f)
      throw TrainingError("mask collapsed to exactly zero at epoch " + std::to_string(epoch));
  };

  if (cfg.mode == InterpretMode::action_supervised) {
    std::vector<Param*> params = mask.decoder_params();
    AdamConfig ac;
    ac.lr = cfg.lr;
    Adam opt(params, ac);
    const int bs = std::min(cfg.ppo.minibatch, cfg.episodes_per_epoch);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      InterpretEpochLog el;
      int seen = 0;
      while (seen < cfg.episodes_per_epoch) {
        int m = std::min(bs, cfg.episodes_per_epoch - seen);
        std::vector<int> shape = {m, mask.obs_h(), mask.obs_w(), mask.obs_c()};
        Tensor obs = Tensor::zeros(shape);
        std::vector<Action> targets;
        std::size_t per = obs.v.size() / static_cast<std::size_t>(m);
        for (int i = 0; i < m; ++i) {
          place_env();
          Tensor s = env.observe();
          std::copy(s.v.begin(), s.v.end(),
                    obs.v.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(i) * per));
          targets.push_back(pre.act_deterministic(s));
        }
        Tape t;
        NodeId x = t.leaf(obs);
        NodeId mn = mask.mask_node(t, x);
        NodeId st = t.mask_mul(x, mn);
        NodeId out = pre.actor_out(t, pre.features(t, st));
        NodeId match;
        if (pre.discrete()) {
          std::vector<int> idx;
          for (const Action& a : targets) idx.push_back(a.discrete);
          match = t.mul_scalar(t.mean(t.logp_discrete(out, idx)), -1.0f);
        } else {
          int dcount = pre.act_dim();
          Tensor tgt = Tensor::zeros({m, dcount});
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < dcount; ++j)
              tgt.v[static_cast<std::size_t>(i * dcount + j)] =
                  targets[static_cast<std::size_t>(i)].cont[static_cast<std::size_t>(j)];
          NodeId diff = t.sub(out, t.leaf(tgt));
          match = cfg.dist == DistanceKind::squared
                      ? t.mul_scalar(t.sum(t.square(diff)), 1.0f / static_cast<float>(m))
                      : t.mul_scalar(t.sum_abs(diff), 1.0f / static_cast<float>(m));
        }
        NodeId loss = t.add(match, t.mul_scalar(t.mean(mn), cfg.alpha));
        float lv = t.val(loss).v[0];
        if (!std::isfinite(lv)) throw TrainingError("supervised interpreter: non-finite loss");
        opt.zero_grad();
        t.backward(loss);
        clip_grad_norm(params, cfg.ppo.max_grad_norm);
        opt.step();

        el.mean_reward += -t.val(match).v[0] * static_cast<float>(m);
        el.mean_sparsity += t.val(t.mean(mn)).v[0] * static_cast<float>(m);
        el.mean_consistency += t.val(match).v[0] * static_cast<float>(m);
        seen += m;
      }
      el.mean_reward /= static_cast<float>(seen);
      el.mean_sparsity /= static_cast<float>(seen);
      el.mean_consistency /= static_cast<float>(seen);
      check_health(el, epoch);
      res.log.push_back(el);
      if (log)
        *log << "epoch " << epoch << " reward " << el.mean_reward << " sparsity "
             << el.mean_sparsity << " consistency " << el.mean_consistency << "\n";
    }
    res.final_sparsity = res.log.back().mean_sparsity;
    return res;
  }

  // RL modes share the PPO path; the critic linear head is retrained from the
  // pretrained one on frozen extractor features.
  Network critic({LayerSpec::Dense(pre.feat_dim(), 1)}, "interp.critic", net_rng);
  for (std::size_t i = 0; i < critic.params().size(); ++i)
    critic.params()[i].value = pre.critic().params()[i].value;

  std::vector<Param*> params = mask.decoder_params();
  for (Param& p : critic.params()) params.push_back(&p);
  AdamConfig ac;
  ac.lr = cfg.ppo.lr;
  Adam opt(params, ac);

  auto fwd = [&](Tape& t, const Tensor& obs, const std::vector<Action>& acts) {
    NodeId x = t.leaf(obs);
    NodeId mn = mask.mask_node(t, x);
    NodeId st = t.mask_mul(x, mn);
    NodeId out = pre.actor_out(t, pre.features(t, st));
    PpoHeads h;
    h.value = critic.forward(t, pre.features(t, x));
    if (pre.discrete()) {
      std::vector<int> ai;
      for (const Action& a : acts) ai.push_back(a.discrete);
      h.logp = t.logp_discrete(out, ai);
      h.entropy = t.mean(t.entropy_discrete(out));
    } else {
      int n = static_cast<int>(acts.size()), dcount = pre.act_dim();
      Tensor at = Tensor::zeros({n, dcount});
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < dcount; ++j)
          at.v[static_cast<std::size_t>(i * dcount + j)] =
              acts[static_cast<std::size_t>(i)].cont[static_cast<std::size_t>(j)];
      NodeId ls = pre.logstd_node(t);
      h.logp = t.gauss_logp(out, ls, at);
      h.entropy = t.add_scalar(t.sum(ls), 0.5f * static_cast<float>(dcount) * 2.83787706640934548356f);
    }
    // The L1 sparsity penalty must reach the decoder as a direct gradient: as
    // a reward term it is a deterministic function of the state and the
    // baseline absorbs it, leaving no pressure on the mask.
    if (cfg.alpha != 0.0f) h.aux = t.mul_scalar(t.mean(mn), cfg.alpha);
    return h;
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    RolloutBatch b;
    InterpretEpochLog el;
    for (int e = 0; e < cfg.episodes_per_epoch; ++e) {
      place_env();
      Tensor s = env.observe();
      EnvSnapshot snap = env.snapshot();
      Tensor m = mask.compute_mask(s);
      Tensor st = attentive_state(s, m);
      ActResult ar = pre.act_stochastic(st, sample_rng);

      float r = 0.0f;
      switch (cfg.mode) {
        case InterpretMode::reward:
          r = rlinrl_reward(env, snap, s, pre, ar.action, cfg.dist);
          break;
        case InterpretMode::reward_K:
          r = rlinrl_reward_K(env, snap, s, pre, ar.action, cfg.K, cfg.gamma, cfg.dist);
          break;
        case InterpretMode::action_rl:
          r = action_match_reward(pre.act_deterministic(s), ar.action, cfg.dist);
          break;
        default:
          throw UsageError("unreachable interpreter mode");
      }
      float sp = sparsity_mean(m);
      b.obs.push_back(s);
      b.actions.push_back(ar.action);
      b.logp.push_back(ar.logp);
      b.val.push_back(critic_value(pre, critic, s));
      b.rew.push_back(r);
      b.done.push_back(1);

      el.mean_reward += r;
      el.mean_sparsity += sp;
      el.mean_consistency += cfg.dist == DistanceKind::squared ? std::sqrt(std::max(-r, 0.0f))
                                                               : std::max(-r, 0.0f);
    }
    el.mean_reward /= static_cast<float>(cfg.episodes_per_epoch);
    el.mean_sparsity /= static_cast<float>(cfg.episodes_per_epoch);
    el.mean_consistency /= static_cast<float>(cfg.episodes_per_epoch);

    compute_gae(b, cfg.ppo.gamma, cfg.ppo.lam, 0.0f);
    ppo_update(fwd, params, opt, b, cfg.ppo, update_rng);

    check_health(el, epoch);
    res.log.push_back(el);
    if (log)
      *log << "epoch " << epoch << " reward " << el.mean_reward << " sparsity " << el.mean_sparsity
           << " consistency " << el.mean_consistency << "\n";
  }
  res.final_sparsity = res.log.back().mean_sparsity;
  return res;
}

ConsistencyEval eval_consistency(Env& env, PolicyNetwork& pre, MaskNetwork& mask, int n_states,
                                 std::uint64_t seed) {
  ConsistencyEval ev;
  Rng rng(seed);
  Rng reset_rng = rng.split(1);
  float rmin = 1e30f, rmax = -1e30f;
  for (int i = 0; i < n_states; ++i) {
    env.reset(reset_rng.next_u64());
    Tensor s = env.observe();
    EnvSnapshot snap = env.snapshot();
    Tensor m = mask.compute_mask(s);
    Action atilde = pre.act_deterministic(attentive_state(s, m));
    Action a = pre.act_deterministic(s);

    env.restore(snap);
    float r = env.step(a).reward;
    env.restore(snap);
    float rp = env.step(atilde).reward;

    ev.mean_abs_rdiff += std::fabs(r - rp);
    ev.mean_abs_adiff += action_distance(DistanceKind::absolute, a, atilde);
    ev.mean_sparsity += sparsity_mean(m);
    rmin = std::min({rmin, r, rp});
    rmax = std::max({rmax, r, rp});
  }
  float n = static_cast<float>(n_states);
  ev.mean_abs_rdiff /= n;
  ev.mean_abs_adiff /= n;
  ev.mean_sparsity /= n;
  ev.reward_range = rmax - rmin;
  return ev;
}

}  // namespace rlinrl
