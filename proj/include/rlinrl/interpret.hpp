#pragma once
// Interpretation engine: the reward-consistency reward family and the four
// interpreter training modes (one-step RL on reward consistency, K-step
// return consistency, action consistency by RL, action matching by direct
// supervision).

#include <ostream>

#include "rlinrl/mask.hpp"
#include "rlinrl/ppo.hpp"

namespace rlinrl {

enum class InterpretMode { reward, reward_K, action_rl, action_supervised };
InterpretMode interpret_mode_from_string(const std::string& s);
const char* interpret_mode_name(InterpretMode m);

enum class DistanceKind { squared, absolute };
DistanceKind distance_kind_from_string(const std::string& s);
float distance(DistanceKind d, float a, float b);
// One-hot embedding for discrete actions, identity for continuous.
float action_distance(DistanceKind d, const Action& a, const Action& b);

struct InterpreterConfig {
  InterpretMode mode = InterpretMode::reward;
  float alpha = 0.1f;
  float beta = 0.1f;
  int K = 1;
  float gamma = 0.99f;         // discount inside the K-step returns
  DistanceKind dist = DistanceKind::squared;
  int episodes_per_epoch = 256;
  int epochs = 40;
  float lr = 1e-3f;            // supervised mode step size
  int pool_states = 512;       // stored visitation snapshots
  PPOConfig ppo;               // RL modes; one-step episodes

  static InterpreterConfig from(const Config& c);
  void validate() const;
};

// Snapshots gathered along pretrained-policy rollouts, approximating its
// state-visitation distribution.
class StatePool {
 public:
  void build(Env& env, PolicyNetwork& pre, int n, std::uint64_t seed);
  const EnvSnapshot& sample(Rng& rng) const;
  std::size_t size() const { return snaps_.size(); }

 private:
  std::vector<EnvSnapshot> snaps_;
};

// One-step reward consistency: both branches restored from snap, one stepped
// with pi_pre's deterministic action, one with atilde.
float rlinrl_reward(Env& env, const EnvSnapshot& snap, const Tensor& s, PolicyNetwork& pre,
                    const Action& atilde, DistanceKind d);

struct BranchReturns {
  float ga = 0.0f;  // following pi_pre for K steps
  float gb = 0.0f;  // atilde first, then pi_pre for K-1 steps
};
BranchReturns branch_returns(Env& env, const EnvSnapshot& snap, const Tensor& s,
                             PolicyNetwork& pre, const Action& atilde, int K, float gamma);
float rlinrl_reward_K(Env& env, const EnvSnapshot& snap, const Tensor& s, PolicyNetwork& pre,
                      const Action& atilde, int K, float gamma, DistanceKind d);

float action_match_reward(const Action& a, const Action& atilde, DistanceKind d);

struct InterpretEpochLog {
  float mean_reward = 0.0f;      // mode reward before the sparsity term
  float mean_sparsity = 0.0f;    // normalized mask mean
  float mean_consistency = 0.0f; // mean |r - r'| (reward modes) or action distance
};

struct InterpretResult {
  std::vector<InterpretEpochLog> log;
  float final_sparsity = 0.0f;
};

// Trains mask's decoder (and a retrained critic linear head in the RL modes)
// against the frozen pre. pre and the encoder are bit-identical afterwards.
InterpretResult train_interpreter(Env& env, PolicyNetwork& pre, MaskNetwork& mask,
                                  const InterpreterConfig& cfg, std::uint64_t seed,
                                  std::ostream* log = nullptr);

// Deterministic action of the composite policy: pre applied to the masked
// state.
Action masked_action(PolicyNetwork& pre, MaskNetwork& mask, const Tensor& s);

struct ConsistencyEval {
  float mean_abs_rdiff = 0.0f;   // |r - r'| with deterministic branches
  float reward_range = 0.0f;     // max - min one-step reward seen
  float mean_abs_adiff = 0.0f;   // mean action distance |a - atilde|
  float mean_sparsity = 0.0f;
};
ConsistencyEval eval_consistency(Env& env, PolicyNetwork& pre, MaskNetwork& mask, int n_states,
                                 std::uint64_t seed);

}  // namespace rlinrl
