#include "rlinrl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace rlinrl {

PPOConfig PPOConfig::from(const Config& c, const std::string& prefix) {
  PPOConfig k;
  k.gamma = static_cast<float>(c.get_num(prefix + "gamma", k.gamma));
  k.lam = static_cast<float>(c.get_num(prefix + "lam", k.lam));
  k.clip = static_cast<float>(c.get_num(prefix + "clip", k.clip));
  k.epochs = static_cast<int>(c.get_int(prefix + "epochs", k.epochs));
  k.minibatch = static_cast<int>(c.get_int(prefix + "minibatch", k.minibatch));
  k.ent_coef = static_cast<float>(c.get_num(prefix + "ent_coef", k.ent_coef));
  k.vf_coef = static_cast<float>(c.get_num(prefix + "vf_coef", k.vf_coef));
  k.lr = static_cast<float>(c.get_num(prefix + "lr", k.lr));
  k.max_grad_norm = static_cast<float>(c.get_num(prefix + "max_grad_norm", k.max_grad_norm));
  k.normalize_adv = c.get_int(prefix + "normalize_adv", 1) != 0;
  k.steps_per_update = static_cast<int>(c.get_int(prefix + "steps_per_update", k.steps_per_update));
  k.total_steps = c.get_int(prefix + "total_steps", k.total_steps);
  k.plateau_window = static_cast<int>(c.get_int(prefix + "plateau_window", k.plateau_window));
  k.plateau_tol = static_cast<float>(c.get_num(prefix + "plateau_tol", k.plateau_tol));
  k.validate();
  return k;
}

void PPOConfig::validate() const {
  if (gamma <= 0.0f || gamma > 1.0f) throw ConfigError("ppo.gamma must lie in (0,1]");
  if (clip <= 0.0f) throw ConfigError("ppo.clip must be positive");
  if (epochs < 1 || minibatch < 1 || steps_per_update < 1)
    throw ConfigError("ppo epochs, minibatch and steps_per_update must be >= 1");
}

Tensor RolloutBatch::stacked_obs(const std::vector<int>& idx) const {
  if (idx.empty()) throw UsageError("empty minibatch");
  std::vector<int> shape = obs[0].shape;
  shape[0] = static_cast<int>(idx.size());
  Tensor out = Tensor::zeros(shape);
  std::size_t per = obs[0].v.size();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const Tensor& o = obs[static_cast<std::size_t>(idx[i])];
    if (o.v.size() != per) throw UsageError("inconsistent observation shapes in batch");
    std::copy(o.v.begin(), o.v.end(), out.v.begin() + static_cast<std::ptrdiff_t>(i * per));
  }
  return out;
}

void compute_gae(RolloutBatch& b, float gamma, float lam, float bootstrap_value) {
  std::size_t n = b.obs.size();
  if (b.actions.size() != n || b.logp.size() != n || b.rew.size() != n || b.val.size() != n ||
      b.done.size() != n)
    throw UsageError("rollout field lengths disagree");
  b.adv.assign(n, 0.0f);
  b.ret.assign(n, 0.0f);
  float next_adv = 0.0f;
  float next_val = bootstrap_value;
  for (std::size_t i = n; i-- > 0;) {
    float not_done = b.done[i] ? 0.0f : 1.0f;
    float delta = b.rew[i] + gamma * next_val * not_done - b.val[i];
    next_adv = delta + gamma * lam * not_done * next_adv;
    b.adv[i] = next_adv;
    b.ret[i] = b.adv[i] + b.val[i];
    next_val = b.val[i];
  }
}

PpoHeads policy_heads(PolicyNetwork& pol, Tape& t, const Tensor& obs,
                      const std::vector<Action>& acts) {
  NodeId feat = pol.features(t, t.leaf(obs));
  NodeId out = pol.actor_out(t, feat);
  PpoHeads h;
  h.value = pol.critic_out(t, feat);
  if (pol.discrete()) {
    std::vector<int> ai;
    for (const Action& a : acts) ai.push_back(a.discrete);
    h.logp = t.logp_discrete(out, ai);
    h.entropy = t.mean(t.entropy_discrete(out));
  } else {
    int n = static_cast<int>(acts.size()), d = pol.act_dim();
    Tensor at = Tensor::zeros({n, d});
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j)
        at.v[static_cast<std::size_t>(i * d + j)] = acts[static_cast<std::size_t>(i)].cont[static_cast<std::size_t>(j)];
    NodeId ls = pol.logstd_node(t);
    h.logp = t.gauss_logp(out, ls, at);
    // Diagonal Gaussian entropy: sum_i logstd_i + D/2 (1 + log 2 pi).
    h.entropy = t.add_scalar(t.sum(ls), 0.5f * static_cast<float>(d) * 2.83787706640934548356f);
  }
  return h;
}

UpdateStats ppo_update(const PpoForward& fwd, const std::vector<Param*>& params, Adam& opt,
                       const RolloutBatch& batch, const PPOConfig& cfg, Rng& rng) {
  std::size_t n = batch.size();
  if (batch.adv.size() != n || batch.ret.size() != n)
    throw UsageError("ppo_update: run compute_gae first");

  std::vector<float> adv = batch.adv;
  if (cfg.normalize_adv) {
    double m = 0.0;
    for (float a : adv) m += a;
    m /= static_cast<double>(n);
    double var = 0.0;
    for (float a : adv) var += (a - m) * (a - m);
    float sd = static_cast<float>(std::sqrt(var / static_cast<double>(n)));
    if (sd > 1e-8f)
      for (float& a : adv) a = (a - static_cast<float>(m)) / sd;
  }

  UpdateStats stats;
  int nmb = 0;
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int ep = 0; ep < cfg.epochs; ++ep) {
    for (std::size_t i = n; i > 1; --i)
      std::swap(order[i - 1], order[rng.below(static_cast<std::uint32_t>(i))]);
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.minibatch)) {
      std::vector<int> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                           order.begin() + static_cast<std::ptrdiff_t>(
                                               std::min(start + static_cast<std::size_t>(cfg.minibatch), n)));
      int m = static_cast<int>(idx.size());
      std::vector<Action> acts;
      Tensor old_lp = Tensor::zeros({m});
      Tensor a_mb = Tensor::zeros({m});
      Tensor ret_mb = Tensor::zeros({m});
      for (int j = 0; j < m; ++j) {
        std::size_t src = static_cast<std::size_t>(idx[static_cast<std::size_t>(j)]);
        acts.push_back(batch.actions[src]);
        old_lp.v[static_cast<std::size_t>(j)] = batch.logp[src];
        a_mb.v[static_cast<std::size_t>(j)] = adv[src];
        ret_mb.v[static_cast<std::size_t>(j)] = batch.ret[src];
      }
      Tensor obs_mb = batch.stacked_obs(idx);

      Tape t;
      PpoHeads h = fwd(t, obs_mb, acts);
      NodeId ratio = t.exp(t.sub(h.logp, t.leaf(old_lp)));
      NodeId adv_leaf = t.leaf(a_mb);
      NodeId surr1 = t.mul(ratio, adv_leaf);
      NodeId surr2 = t.mul(t.clamp(ratio, 1.0f - cfg.clip, 1.0f + cfg.clip), adv_leaf);
      NodeId pol_loss = t.mul_scalar(t.mean(t.min(surr1, surr2)), -1.0f);
      NodeId v = h.value;
      if (t.val(v).shape.size() == 2) v = t.reshape(v, {m});
      NodeId v_loss = t.mean(t.square(t.sub(v, t.leaf(ret_mb))));
      NodeId loss = t.add(pol_loss, t.mul_scalar(v_loss, cfg.vf_coef));
      if (cfg.ent_coef != 0.0f) loss = t.add(loss, t.mul_scalar(h.entropy, -cfg.ent_coef));
      if (h.aux != kNoNode) loss = t.add(loss, h.aux);

      float lv = t.val(loss).v[0];
      if (!std::isfinite(lv)) {
        std::ostringstream os;
        os << "ppo_update: non-finite loss (policy " << t.val(pol_loss).v[0] << ", value "
           << t.val(v_loss).v[0] << ", entropy " << t.val(h.entropy).v[0] << ")";
        throw TrainingError(os.str());
      }
      opt.zero_grad();
      t.backward(loss);
      clip_grad_norm(params, cfg.max_grad_norm);
      opt.step();

      stats.policy_loss += t.val(pol_loss).v[0];
      stats.value_loss += t.val(v_loss).v[0];
      stats.entropy += t.val(h.entropy).v[0];
      double kl = 0.0;
      for (int j = 0; j < m; ++j)
        kl += old_lp.v[static_cast<std::size_t>(j)] - t.val(h.logp).v[static_cast<std::size_t>(j)];
      stats.approx_kl += static_cast<float>(kl / m);
      ++nmb;
    }
  }
  if (nmb > 0) {
    stats.policy_loss /= static_cast<float>(nmb);
    stats.value_loss /= static_cast<float>(nmb);
    stats.entropy /= static_cast<float>(nmb);
    stats.approx_kl /= static_cast<float>(nmb);
  }
  return stats;
}

PretrainResult pretrain(Env& env, PolicyNetwork& pol, const PPOConfig& cfg, std::uint64_t seed,
                        std::ostream* log) {
  cfg.validate();
  Rng rng(seed);
  Rng sample_rng = rng.split(1);
  Rng update_rng = rng.split(2);
  Rng reset_rng = rng.split(3);

  std::vector<Param*> params = pol.all_params();
  AdamConfig ac;
  ac.lr = cfg.lr;
  Adam opt(params, ac);

  PretrainResult res;
  std::uint64_t episode = 0;
  Tensor obs = env.reset(reset_rng.next_u64());
  float ep_ret = 0.0f;
  float last_mean = 0.0f;
  float best_window = -1e30f;

  while (res.env_steps < cfg.total_steps) {
    RolloutBatch b;
    std::vector<float> finished;
    for (int i = 0; i < cfg.steps_per_update; ++i) {
      ActResult ar = pol.act_stochastic(obs, sample_rng);
      StepResult sr = env.step(ar.action);
      b.obs.push_back(obs);
      b.actions.push_back(ar.action);
      b.logp.push_back(ar.logp);
      b.val.push_back(ar.value);
      b.rew.push_back(sr.reward);
      b.done.push_back(sr.done ? 1 : 0);
      ep_ret += sr.reward;
      ++res.env_steps;
      if (sr.done) {
        finished.push_back(ep_ret);
        ep_ret = 0.0f;
        ++episode;
        obs = env.reset(reset_rng.next_u64());
      } else {
        obs = sr.obs;
      }
    }
    float bootstrap = b.done.back() ? 0.0f : pol.value(obs);
    compute_gae(b, cfg.gamma, cfg.lam, bootstrap);
    auto fwd = [&pol](Tape& t, const Tensor& o, const std::vector<Action>& a) {
      return policy_heads(pol, t, o, a);
    };
    ppo_update(fwd, params, opt, b, cfg, update_rng);
    ++res.updates;

    if (!finished.empty())
      last_mean = std::accumulate(finished.begin(), finished.end(), 0.0f) /
                  static_cast<float>(finished.size());
    res.curve.push_back(last_mean);
    if (log)
      *log << "update " << res.updates << " steps " << res.env_steps << " return " << last_mean
           << "\n";

    int w = cfg.plateau_window;
    if (res.updates >= 2 * w) {
      auto avg = [&](int from, int count) {
        float s = 0.0f;
        for (int i = from; i < from + count; ++i) s += res.curve[static_cast<std::size_t>(i)];
        return s / static_cast<float>(count);
      };
      float recent = avg(res.updates - w, w);
      float prev = avg(res.updates - 2 * w, w);
      best_window = std::max(best_window, recent);
      if (best_window > 0.0f && recent < 0.25f * best_window) {
        std::ostringstream os;
        os << "pretrain: return collapse (recent " << recent << " vs best " << best_window
           << "); curve:";
        for (float v : res.curve) os << " " << v;
        throw TrainingError(os.str());
      }
      if (recent - prev < cfg.plateau_tol * std::max(std::fabs(prev), 0.1f)) {
        res.final_return = recent;
        return res;
      }
    }
  }
  int w = std::min(cfg.plateau_window, res.updates);
  float s = 0.0f;
  for (int i = res.updates - w; i < res.updates; ++i) s += res.curve[static_cast<std::size_t>(i)];
  res.final_return = w > 0 ? s / static_cast<float>(w) : last_mean;
  return res;
}

}  // namespace rlinrl
