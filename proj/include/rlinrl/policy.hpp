#pragma once
// Actor-critic policy: shared conv feature extractor, actor head (categorical
// logits or diagonal Gaussian), linear critic head.

#include <memory>

#include "rlinrl/env.hpp"
#include "rlinrl/net.hpp"

namespace rlinrl {

struct ActResult {
  Action action;
  float logp = 0.0f;
  float value = 0.0f;
};

class PolicyNetwork {
 public:
  PolicyNetwork() = default;
  PolicyNetwork(int h, int w, int c, int act_dim, bool discrete, Rng& rng);
  static PolicyNetwork for_env(const Env& env, Rng& rng);

  bool discrete() const { return discrete_; }
  int act_dim() const { return act_dim_; }
  int feat_dim() const { return feat_dim_; }
  int obs_h() const { return h_; }
  int obs_w() const { return w_; }
  int obs_c() const { return c_; }

  // Tape-level pieces; obs is [N,H,W,C].
  NodeId features(Tape& t, NodeId obs);
  NodeId actor_out(Tape& t, NodeId feat);   // logits [N,A] or mean [N,A]
  NodeId critic_out(Tape& t, NodeId feat);  // [N,1]
  NodeId logstd_node(Tape& t);              // [A], clamped to [-5,2]

  ActResult act_stochastic(const Tensor& obs, Rng& rng);
  Action act_deterministic(const Tensor& obs);
  float value(const Tensor& obs);
  // Log-density of a (single) action under the current policy at obs.
  float action_logp(const Tensor& obs, const Action& a);

  Network& extractor() { return ext_; }
  Network& actor() { return actor_; }
  Network& critic() { return critic_; }
  Param& logstd() { return logstd_; }

  std::vector<Param*> all_params();
  void set_trainable_all(bool flag);

  void save(const std::string& path);
  void load(const std::string& path);

 private:
  int h_ = 0, w_ = 0, c_ = 0, act_dim_ = 0, feat_dim_ = 64;
  bool discrete_ = true;
  Network ext_, actor_, critic_;
  Param logstd_;
};

// Gaussian log-density helpers shared with tests.
float gauss_logp_scalar(const std::vector<float>& mean, const std::vector<float>& logstd,
                        const std::vector<float>& a);

}  // namespace rlinrl
