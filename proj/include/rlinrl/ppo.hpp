#pragma once
// Clipped-surrogate PPO with GAE. The update is generic over a forward hook so
// the same machinery trains both the pretraining policy and the mask network
// (which exposes only a subset of trainable parameters).

#include <functional>
#include <ostream>

#include "rlinrl/config.hpp"
#include "rlinrl/optim.hpp"
#include "rlinrl/policy.hpp"

namespace rlinrl {

struct PPOConfig {
  float gamma = 0.99f;
  float lam = 0.95f;
  float clip = 0.2f;
  int epochs = 4;
  int minibatch = 64;
  float ent_coef = 0.01f;
  float vf_coef = 0.5f;
  float lr = 3e-4f;
  float max_grad_norm = 0.5f;
  bool normalize_adv = true;
  int steps_per_update = 1024;
  long total_steps = 200000;
  int plateau_window = 20;
  float plateau_tol = 0.01f;

  static PPOConfig from(const Config& c, const std::string& prefix = "ppo.");
  void validate() const;
};

struct RolloutBatch {
  std::vector<Tensor> obs;
  std::vector<Action> actions;
  std::vector<float> logp, rew, val;
  std::vector<std::uint8_t> done;
  std::vector<float> adv, ret;  // filled by compute_gae

  std::size_t size() const { return obs.size(); }
  Tensor stacked_obs(const std::vector<int>& idx) const;
};

// Standard generalized advantage estimation; bootstrap_value continues the
// final transition when the rollout ends mid-episode.
void compute_gae(RolloutBatch& b, float gamma, float lam, float bootstrap_value);

// Batched heads at one set of observations. logp is [N]; value is [N] or
// [N,1]; entropy is a [1] batch-mean scalar.
struct PpoHeads {
  NodeId logp = kNoNode;
  NodeId value = kNoNode;
  NodeId entropy = kNoNode;
  // Optional scalar added to the loss as-is; carries penalties that must be
  // differentiated directly (e.g. the mask L1 term) rather than fed through
  // the reward, where a state-dependent baseline would absorb them.
  NodeId aux = kNoNode;
};
using PpoForward =
    std::function<PpoHeads(Tape&, const Tensor& obs, const std::vector<Action>& acts)>;

struct UpdateStats {
  float policy_loss = 0.0f;
  float value_loss = 0.0f;
  float entropy = 0.0f;
  float approx_kl = 0.0f;
};

UpdateStats ppo_update(const PpoForward& fwd, const std::vector<Param*>& params, Adam& opt,
                       const RolloutBatch& batch, const PPOConfig& cfg, Rng& rng);

// Heads of a PolicyNetwork, shared by pretraining and tests.
PpoHeads policy_heads(PolicyNetwork& pol, Tape& t, const Tensor& obs,
                      const std::vector<Action>& acts);

struct PretrainResult {
  std::vector<float> curve;    // mean episode return per update
  float final_return = 0.0f;   // last plateau-window average
  long env_steps = 0;
  int updates = 0;
};

// Trains pol on env until the moving-average return plateaus or the step
// budget runs out. Fully determined by seed.
PretrainResult pretrain(Env& env, PolicyNetwork& pol, const PPOConfig& cfg, std::uint64_t seed,
                        std::ostream* log = nullptr);

}  // namespace rlinrl
