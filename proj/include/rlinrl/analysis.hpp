#pragma once
// Experiment suite over trained artifacts: masked-return evaluation, lane
// ablations, action divergence, region attention, and sparse-reward stats.

#include <functional>
#include <optional>

#include "rlinrl/interpret.hpp"
#include "rlinrl/saliency.hpp"

namespace rlinrl {

// Produces a [1,H,W,1] mask for an observation.
using MaskSource = std::function<Tensor(const Tensor&)>;

MaskSource identity_mask_source();
MaskSource zero_mask_source();
MaskSource interpreter_mask_source(MaskNetwork& mask);
MaskSource jacobian_mask_source(PolicyNetwork& pre, float q);
MaskSource perturbation_mask_source(PolicyNetwork& pre, const PerturbationConfig& cfg, float q);

struct ReturnStats {
  float mean = 0.0f;
  float sd = 0.0f;
  std::vector<float> per_episode;
};

// Full episodes where the policy sees only the masked state at every step.
ReturnStats masked_return_eval(Env& env, PolicyNetwork& pre, const MaskSource& ms, int episodes,
                               std::uint64_t seed);

struct LaneAblationRow {
  LanePattern pattern;
  float mean_return = 0.0f;
  float percent = 0.0f;  // of lane0
};

// Evaluates the unmasked policy under each render pattern; lane0 is always
// included and is the shared 100% denominator.
std::vector<LaneAblationRow> lane_ablation(const LaneWorldConfig& cfg, PolicyNetwork& pre,
                                           const std::vector<LanePattern>& patterns, int episodes,
                                           std::uint64_t seed);

// Smoothed histogram KL between two count vectors over the same bins.
float kl_histogram(const std::vector<int>& ca, const std::vector<int>& cb, float eps);

struct DivergenceConfig {
  int steps = 500;
  int bins = 21;       // continuous dims, over [-1,1]
  float eps = 1e-3f;   // Laplace smoothing
};

// Sum over action dimensions of KL(actions under pi_pre || actions through
// the mask), from two independent rollouts on env's current pattern.
float action_divergence(Env& env, PolicyNetwork& pre, MaskNetwork& mask,
                        const DivergenceConfig& cfg, std::uint64_t seed);

struct RegionReport {
  // Mean mask value inside each region, averaged over states where the
  // region is visible; empty optional = region never visible (not applicable).
  std::optional<float> left_white, yellow, right_white, grass, other;
};

RegionReport region_attention(LaneWorld& env, const MaskSource& ms, int n_states,
                              std::uint64_t seed);

struct SparseStats {
  float mean_horizon = 0.0f;
  float mean_nonzero_steps = 0.0f;
  float percentage = 0.0f;  // nonzero steps / steps
};

// pol may be null: uniform random actions.
SparseStats sparse_reward_stats(Env& env, PolicyNetwork* pol, int episodes, std::uint64_t seed);

struct ShiftRow {
  float grass_mass = 0.0f;
  float right_mass = 0.0f;
  bool flagged = false;  // grass attention exceeds right-line attention
};

// Per-step region attention along a rollout of the unmasked policy on env's
// current pattern (zigzag for the out-of-distribution probe).
std::vector<ShiftRow> attention_shift_report(LaneWorld& env, PolicyNetwork& pre, MaskNetwork& mask,
                                             int steps, std::uint64_t seed);

struct RetrainReport {
  RegionReport action_matching;  // over lane0 renders
  RegionReport reward_matching;
  float fy_ablation_delta = 0.0f;  // relative return change lane1 -> lane0
};

// Pretrains a policy on lane1 (no yellow line), then interprets it over lane0
// renders with both action matching and reward matching.
RetrainReport retrain_without_yellow_experiment(const LaneWorldConfig& lane_cfg,
                                                const PPOConfig& ppo_cfg,
                                                InterpreterConfig action_cfg,
                                                InterpreterConfig reward_cfg, std::uint64_t seed,
                                                std::ostream* log = nullptr);

}  // namespace rlinrl
