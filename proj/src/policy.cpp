#include "rlinrl/policy.hpp"

#include <algorithm>
#include <cmath>

#include "rlinrl/serialize.hpp"

namespace rlinrl {

namespace {
constexpr float kLogStdInit = -0.5f;
constexpr float kLogStdLo = -5.0f;
constexpr float kLogStdHi = 2.0f;
constexpr float kLog2Pi = 1.83787706640934548356f;
}  // namespace

PolicyNetwork::PolicyNetwork(int h, int w, int c, int act_dim, bool discrete, Rng& rng)
    : h_(h), w_(w), c_(c), act_dim_(act_dim), discrete_(discrete) {
  if (h % 4 != 0 || w % 4 != 0) throw ConfigError("policy extractor needs h, w divisible by 4");
  int flat = (h / 4) * (w / 4) * 16;
  Rng re = rng.split(1), ra = rng.split(2), rc = rng.split(3);
  ext_ = Network({LayerSpec::Conv(c, 8, 3, 2, 1), LayerSpec::Relu(),
                  LayerSpec::Conv(8, 16, 3, 2, 1), LayerSpec::Relu(), LayerSpec::Flatten(),
                  LayerSpec::Dense(flat, feat_dim_), LayerSpec::Relu()},
                 "pi.ext", re);
  actor_ = Network({LayerSpec::Dense(feat_dim_, act_dim)}, "pi.actor", ra);
  critic_ = Network({LayerSpec::Dense(feat_dim_, 1)}, "pi.critic", rc);
  if (!discrete_) logstd_ = Param("pi.logstd", Tensor::full({act_dim}, kLogStdInit));
}

PolicyNetwork PolicyNetwork::for_env(const Env& env, Rng& rng) {
  return PolicyNetwork(env.obs_h(), env.obs_w(), env.obs_c(), env.action_dim(),
                       env.discrete_actions(), rng);
}

NodeId PolicyNetwork::features(Tape& t, NodeId obs) { return ext_.forward(t, obs); }
NodeId PolicyNetwork::actor_out(Tape& t, NodeId feat) { return actor_.forward(t, feat); }
NodeId PolicyNetwork::critic_out(Tape& t, NodeId feat) { return critic_.forward(t, feat); }

NodeId PolicyNetwork::logstd_node(Tape& t) {
  if (discrete_) throw UsageError("logstd is only defined for the continuous head");
  return t.clamp(t.param(logstd_), kLogStdLo, kLogStdHi);
}

float gauss_logp_scalar(const std::vector<float>& mean, const std::vector<float>& logstd,
                        const std::vector<float>& a) {
  float lp = 0.0f;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    float ls = std::clamp(logstd[i], kLogStdLo, kLogStdHi);
    float z = (a[i] - mean[i]) / std::exp(ls);
    lp += -0.5f * z * z - ls - 0.5f * kLog2Pi;
  }
  return lp;
}

ActResult PolicyNetwork::act_stochastic(const Tensor& obs, Rng& rng) {
  Tape t;
  NodeId feat = features(t, t.leaf(obs));
  const Tensor& out = t.val(actor_out(t, feat));
  ActResult r;
  r.value = t.val(critic_out(t, feat)).v[0];
  if (discrete_) {
    // Gumbel-max sampling from the categorical.
    float best = -1e30f;
    int pick = 0;
    std::vector<float> logits = out.v;
    float mx = *std::max_element(logits.begin(), logits.end());
    float z = 0.0f;
    for (float l : logits) z += std::exp(l - mx);
    for (int i = 0; i < act_dim_; ++i) {
      float u = std::max(rng.uniform(), 1e-12f);
      float g = logits[static_cast<std::size_t>(i)] - std::log(-std::log(u));
      if (g > best) {
        best = g;
        pick = i;
      }
    }
    r.action = Action::disc(pick);
    r.logp = logits[static_cast<std::size_t>(pick)] - mx - std::log(z);
  } else {
    std::vector<float> a(static_cast<std::size_t>(act_dim_));
    for (int i = 0; i < act_dim_; ++i) {
      float ls = std::clamp(logstd_.value.v[static_cast<std::size_t>(i)], kLogStdLo, kLogStdHi);
      a[static_cast<std::size_t>(i)] =
          out.v[static_cast<std::size_t>(i)] + std::exp(ls) * rng.normal();
    }
    r.logp = gauss_logp_scalar(out.v, logstd_.value.v, a);
    r.action.cont = std::move(a);
  }
  return r;
}

Action PolicyNetwork::act_deterministic(const Tensor& obs) {
  Tape t;
  const Tensor& out = t.val(actor_out(t, features(t, t.leaf(obs))));
  if (discrete_) {
    int best = 0;
    for (int i = 1; i < act_dim_; ++i)
      if (out.v[static_cast<std::size_t>(i)] > out.v[static_cast<std::size_t>(best)]) best = i;
    return Action::disc(best);
  }
  Action a;
  a.cont = out.v;
  return a;
}

float PolicyNetwork::value(const Tensor& obs) {
  Tape t;
  return t.val(critic_out(t, features(t, t.leaf(obs)))).v[0];
}

float PolicyNetwork::action_logp(const Tensor& obs, const Action& a) {
  Tape t;
  const Tensor& out = t.val(actor_out(t, features(t, t.leaf(obs))));
  if (discrete_) {
    float mx = *std::max_element(out.v.begin(), out.v.end());
    float z = 0.0f;
    for (float l : out.v) z += std::exp(l - mx);
    return out.v[static_cast<std::size_t>(a.discrete)] - mx - std::log(z);
  }
  return gauss_logp_scalar(out.v, logstd_.value.v, a.cont);
}

std::vector<Param*> PolicyNetwork::all_params() {
  std::vector<Param*> ps;
  for (Network* n : {&ext_, &actor_, &critic_})
    for (Param& p : n->params()) ps.push_back(&p);
  if (!discrete_) ps.push_back(&logstd_);
  return ps;
}

void PolicyNetwork::set_trainable_all(bool flag) {
  for (Param* p : all_params()) p->trainable = flag;
}

void PolicyNetwork::save(const std::string& path) {
  std::vector<std::pair<std::string, const Tensor*>> tensors;
  for (Param* p : all_params()) tensors.emplace_back(p->name, &p->value);
  save_params_file(path, tensors);
}

void PolicyNetwork::load(const std::string& path) {
  auto named = load_params_file(path);
  for (Param* p : all_params()) {
    auto it = named.find(p->name);
    if (it == named.end()) throw IntegrityError("checkpoint missing tensor " + p->name);
    if (it->second.shape != p->value.shape)
      throw IntegrityError("checkpoint shape mismatch for " + p->name);
    p->value = it->second;
  }
}

}  // namespace rlinrl
