// Command-line front end: training, interpretation, evaluation and export.
// Every run prints the resolved configuration before executing; every report
// embeds the config hash and the content hashes of its input checkpoints.
// Exit codes: 0 success, 2 config/usage error, 3 I/O error, 4 integrity
// error, 5 training failure.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "rlinrl/analysis.hpp"
#include "rlinrl/config.hpp"
#include "rlinrl/io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace rlinrl;

namespace {

int thread_cap() {
  const char* s = std::getenv("RLINRL_THREADS");
  if (!s || !*s) return 1;
  char* end = nullptr;
  long v = std::strtol(s, &end, 10);
  if (*end != '\0' || v < 1) throw ConfigError("RLINRL_THREADS must be a positive integer");
  return static_cast<int>(v);
}

std::string config_hash(const Config& c) {
  std::string r = c.resolved();
  return content_hash_hex(std::vector<std::uint8_t>(r.begin(), r.end()));
}

void print_resolved(const Config& c) {
  std::cout << "# resolved config " << config_hash(c) << " (threads=" << thread_cap() << ")\n"
            << c.resolved() << "# ---\n";
}

json env_signature(const Env& env) {
  return json{{"kind", env.kind()},     {"h", env.obs_h()},
              {"w", env.obs_w()},       {"c", env.obs_c()},
              {"action_dim", env.action_dim()}, {"discrete", env.discrete_actions()}};
}

void write_json_atomic(const std::string& path, const json& j) {
  write_text_atomic(path, j.dump(2) + "\n");
}

json read_sidecar(const std::string& ckpt) {
  std::string sp = ckpt + ".json";
  if (!fs::exists(sp)) return json();
  try {
    return json::parse(read_text(sp));
  } catch (const json::exception& e) {
    throw IntegrityError("unreadable sidecar " + sp + ": " + e.what());
  }
}

// Refuses checkpoints whose sidecar disagrees with the file content or with
// the environment the current config describes.
void verify_policy_checkpoint(const std::string& ckpt, const Env& env) {
  json j = read_sidecar(ckpt);
  if (j.is_null()) return;
  if (j.contains("checkpoint_hash") && j["checkpoint_hash"] != file_hash_hex(ckpt))
    throw IntegrityError("checkpoint " + ckpt + " does not match its sidecar hash");
  if (!j.contains("env")) return;
  json want = env_signature(env);
  for (auto& [k, v] : want.items())
    if (j["env"].contains(k) && j["env"][k] != v)
      throw IntegrityError("checkpoint " + ckpt + " was trained for a different environment (" +
                           k + ": " + j["env"][k].dump() + " vs " + v.dump() + ")");
}

PolicyNetwork load_policy(const std::string& ckpt, const Env& env) {
  verify_policy_checkpoint(ckpt, env);
  Rng rng(0);
  PolicyNetwork pol = PolicyNetwork::for_env(env, rng);
  pol.load(ckpt);
  return pol;
}

float sidecar_beta(const std::string& ckpt, const Config& cfg) {
  json j = read_sidecar(ckpt);
  if (!j.is_null() && j.contains("beta")) return j["beta"].get<float>();
  return static_cast<float>(cfg.get_num("interp.beta", 0.1));
}

PerturbationConfig perturbation_from(const Config& cfg) {
  PerturbationConfig pc;
  pc.sigma = static_cast<float>(cfg.get_num("eval.sigma", pc.sigma));
  pc.radius = static_cast<int>(cfg.get_int("eval.radius", pc.radius));
  pc.stride = static_cast<int>(cfg.get_int("eval.stride", pc.stride));
  return pc;
}

// "identity", "zero", "jacobian", "perturbation", or an interpreter
// checkpoint path. holder keeps a loaded mask network alive.
MaskSource resolve_mask_source(const std::string& spec, PolicyNetwork& pre, const Config& cfg,
                               std::unique_ptr<MaskNetwork>& holder, json& inputs) {
  if (spec == "identity") return identity_mask_source();
  if (spec == "zero") return zero_mask_source();
  float q = static_cast<float>(cfg.get_num("eval.q", 0.25));
  if (spec == "jacobian") return jacobian_mask_source(pre, q);
  if (spec == "perturbation") return perturbation_mask_source(pre, perturbation_from(cfg), q);
  Rng rng(0);
  holder = std::make_unique<MaskNetwork>(pre, sidecar_beta(spec, cfg), rng);
  holder->load(spec);
  inputs["mask_checkpoint"] = spec;
  inputs["mask_hash"] = file_hash_hex(spec);
  return interpreter_mask_source(*holder);
}

MaskNetwork load_mask(const std::string& ckpt, PolicyNetwork& pre, const Config& cfg) {
  Rng rng(0);
  MaskNetwork m(pre, sidecar_beta(ckpt, cfg), rng);
  m.load(ckpt);
  return m;
}

json base_report(const std::string& command, const Config& cfg, const std::string& policy_ckpt) {
  json j;
  j["command"] = command;
  j["config_hash"] = config_hash(cfg);
  if (!policy_ckpt.empty()) {
    j["policy_checkpoint"] = policy_ckpt;
    j["policy_hash"] = file_hash_hex(policy_ckpt);
  }
  return j;
}

// ---------------------------------------------------------------------------

void cmd_pretrain(const std::string& config, std::uint64_t seed, const std::string& out) {
  Config cfg = Config::load(config);
  std::unique_ptr<Env> env = make_env(cfg);
  PPOConfig ppo = PPOConfig::from(cfg);
  print_resolved(cfg);

  Rng root(seed);
  Rng net_rng = root.split(1);
  PolicyNetwork pol = PolicyNetwork::for_env(*env, net_rng);
  PretrainResult res = pretrain(*env, pol, ppo, root.split(2).next_u64(), &std::cout);
  pol.save(out);

  json j = base_report("pretrain", cfg, "");
  j["seed"] = seed;
  j["env"] = env_signature(*env);
  j["checkpoint_hash"] = file_hash_hex(out);
  j["final_return"] = res.final_return;
  j["updates"] = res.updates;
  j["env_steps"] = res.env_steps;
  write_json_atomic(out + ".json", j);
  std::cout << "pretrain done: final_return=" << res.final_return << " -> " << out << "\n";
}

void cmd_interpret(const std::string& config, const std::string& policy, std::uint64_t seed,
                   const std::string& out, const std::string& mode, const std::string& alpha,
                   const std::string& beta, const std::string& k) {
  Config cfg = Config::load(config);
  // CLI flags override the config file's interp.* keys.
  if (!mode.empty()) {
    std::string m = mode;
    if (m == "rewardK") m = "reward_K";
    if (m == "actionRL") m = "action_rl";
    if (m == "actionSup") m = "action_supervised";
    cfg.set("interp.mode", m);
  }
  if (!alpha.empty()) cfg.set("interp.alpha", alpha);
  if (!beta.empty()) cfg.set("interp.beta", beta);
  if (!k.empty()) cfg.set("interp.K", k);

  std::unique_ptr<Env> env = make_env(cfg);
  InterpreterConfig icfg = InterpreterConfig::from(cfg);
  print_resolved(cfg);

  PolicyNetwork pre = load_policy(policy, *env);
  Rng root(seed);
  Rng mask_rng = root.split(1);
  MaskNetwork mask(pre, icfg.beta, mask_rng);
  InterpretResult res = train_interpreter(*env, pre, mask, icfg, root.split(2).next_u64(),
                                          &std::cout);
  mask.save(out);

  json j = base_report("interpret", cfg, policy);
  j["seed"] = seed;
  j["mode"] = interpret_mode_name(icfg.mode);
  j["alpha"] = icfg.alpha;
  j["beta"] = icfg.beta;
  j["K"] = icfg.K;
  j["env"] = env_signature(*env);
  j["checkpoint_hash"] = file_hash_hex(out);
  j["final_sparsity"] = res.final_sparsity;
  json log = json::array();
  for (const auto& e : res.log)
    log.push_back({{"mean_reward", e.mean_reward},
                   {"mean_sparsity", e.mean_sparsity},
                   {"mean_consistency", e.mean_consistency}});
  j["log"] = log;
  write_json_atomic(out + ".json", j);
  std::cout << "interpret done: final_sparsity=" << res.final_sparsity << " -> " << out << "\n";
}

void cmd_evaluate(const std::string& config, const std::string& policy, const std::string& mask,
                  int episodes, std::uint64_t seed, const std::string& out) {
  Config cfg = Config::load(config);
  std::unique_ptr<Env> env = make_env(cfg);
  print_resolved(cfg);
  PolicyNetwork pre = load_policy(policy, *env);

  json j = base_report("evaluate", cfg, policy);
  std::unique_ptr<MaskNetwork> holder;
  MaskSource ms = resolve_mask_source(mask, pre, cfg, holder, j);
  ReturnStats st = masked_return_eval(*env, pre, ms, episodes, seed);

  j["mask"] = mask;
  j["episodes"] = episodes;
  j["seed"] = seed;
  j["mean"] = st.mean;
  j["sd"] = st.sd;
  j["per_episode"] = st.per_episode;
  write_json_atomic(out, j);
  std::cout << "evaluate: mean=" << st.mean << " sd=" << st.sd << " -> " << out << "\n";
}

void cmd_ablate(const std::string& config, const std::string& policy,
                const std::string& patterns, int episodes, std::uint64_t seed,
                const std::string& out) {
  Config cfg = Config::load(config);
  LaneWorldConfig lc = LaneWorldConfig::from(cfg);
  print_resolved(cfg);
  LaneWorld env(lc);
  PolicyNetwork pre = load_policy(policy, env);

  std::vector<LanePattern> pats;
  std::stringstream ss(patterns);
  std::string tok;
  while (std::getline(ss, tok, ',')) pats.push_back(lane_pattern_from_string(tok));
  auto rows = lane_ablation(lc, pre, pats, episodes, seed);

  CsvWriter csv({"pattern", "mean_return", "percent_of_lane0"});
  for (const auto& r : rows)
    csv.add_row_text({lane_pattern_name(r.pattern), std::to_string(r.mean_return),
                      std::to_string(r.percent)});
  csv.save(out);
  json j = base_report("ablate", cfg, policy);
  j["episodes"] = episodes;
  j["seed"] = seed;
  j["rows"] = json::array();
  for (const auto& r : rows)
    j["rows"].push_back({{"pattern", lane_pattern_name(r.pattern)},
                         {"mean_return", r.mean_return},
                         {"percent_of_lane0", r.percent}});
  write_json_atomic(out + ".json", j);
  std::cout << "ablate: " << rows.size() << " rows -> " << out << "\n";
}

void cmd_divergence(const std::string& config, const std::string& policy, const std::string& mask,
                    const std::string& patterns, int steps, std::uint64_t seed,
                    const std::string& out) {
  Config cfg = Config::load(config);
  std::unique_ptr<Env> env = make_env(cfg);
  DivergenceConfig dc;
  dc.steps = steps;
  dc.bins = static_cast<int>(cfg.get_int("div.bins", dc.bins));
  dc.eps = static_cast<float>(cfg.get_num("div.eps", dc.eps));
  print_resolved(cfg);
  PolicyNetwork pre = load_policy(policy, *env);
  MaskNetwork m = load_mask(mask, pre, cfg);

  json j = base_report("divergence", cfg, policy);
  j["mask_checkpoint"] = mask;
  j["mask_hash"] = file_hash_hex(mask);
  j["steps"] = dc.steps;
  j["seed"] = seed;
  j["rows"] = json::array();

  if (env->kind() == "lane" && !patterns.empty()) {
    LaneWorldConfig lc = LaneWorldConfig::from(cfg);
    std::vector<std::pair<std::string, float>> rows;
    std::stringstream ss(patterns);
    std::string tok;
    float lane0_kl = -1.0f;
    while (std::getline(ss, tok, ',')) {
      LaneWorldConfig c2 = lc;
      c2.pattern = lane_pattern_from_string(tok);
      LaneWorld e2(c2);
      float kl = action_divergence(e2, pre, m, dc, seed);
      if (c2.pattern == LanePattern::lane0) lane0_kl = kl;
      rows.emplace_back(tok, kl);
    }
    for (auto& [name, kl] : rows) {
      json r = {{"pattern", name}, {"kl", kl}};
      if (lane0_kl > 0.0f)
        r["percent_of_lane0"] = kl == lane0_kl ? 100.0f : 100.0f * kl / lane0_kl;
      j["rows"].push_back(r);
    }
  } else {
    float kl = action_divergence(*env, pre, m, dc, seed);
    j["rows"].push_back({{"pattern", "default"}, {"kl", kl}});
  }
  write_json_atomic(out, j);
  std::cout << "divergence -> " << out << "\n";
}

void cmd_regions(const std::string& config, const std::string& policy, const std::string& mask,
                 int states, std::uint64_t seed, const std::string& out) {
  Config cfg = Config::load(config);
  LaneWorldConfig lc = LaneWorldConfig::from(cfg);
  print_resolved(cfg);
  LaneWorld env(lc);
  PolicyNetwork pre = load_policy(policy, env);
  json j = base_report("regions", cfg, policy);
  std::unique_ptr<MaskNetwork> holder;
  MaskSource ms = resolve_mask_source(mask, pre, cfg, holder, j);
  RegionReport rep = region_attention(env, ms, states, seed);

  auto put = [&](const char* key, const std::optional<float>& v) {
    if (v)
      j[key] = *v;
    else
      j[key] = nullptr;  // region never visible under this pattern
  };
  j["mask"] = mask;
  j["states"] = states;
  j["seed"] = seed;
  put("left_white", rep.left_white);
  put("yellow", rep.yellow);
  put("right_white", rep.right_white);
  put("grass", rep.grass);
  put("other", rep.other);
  write_json_atomic(out, j);
  std::cout << "regions -> " << out << "\n";
}

void cmd_shift(const std::string& config, const std::string& policy, const std::string& mask,
               int steps, std::uint64_t seed, const std::string& out) {
  Config cfg = Config::load(config);
  LaneWorldConfig lc = LaneWorldConfig::from(cfg);
  print_resolved(cfg);
  LaneWorld env(lc);
  PolicyNetwork pre = load_policy(policy, env);
  MaskNetwork m = load_mask(mask, pre, cfg);
  auto rows = attention_shift_report(env, pre, m, steps, seed);

  CsvWriter csv({"step", "grass_mass", "right_mass", "flagged"});
  for (std::size_t i = 0; i < rows.size(); ++i)
    csv.add_row({static_cast<double>(i), rows[i].grass_mass, rows[i].right_mass,
                 rows[i].flagged ? 1.0 : 0.0});
  csv.save(out);
  json j = base_report("shift", cfg, policy);
  j["mask_checkpoint"] = mask;
  j["mask_hash"] = file_hash_hex(mask);
  j["steps"] = steps;
  j["seed"] = seed;
  int flagged = 0;
  for (const auto& r : rows) flagged += r.flagged ? 1 : 0;
  j["flagged_steps"] = flagged;
  write_json_atomic(out + ".json", j);
  std::cout << "shift: " << flagged << "/" << rows.size() << " flagged -> " << out << "\n";
}

void cmd_sparse_stats(const std::string& config, const std::string& policy, int episodes,
                      std::uint64_t seed, const std::string& out) {
  Config cfg = Config::load(config);
  std::unique_ptr<Env> env = make_env(cfg);
  print_resolved(cfg);
  PolicyNetwork pol;
  bool have_pol = !policy.empty();
  if (have_pol) pol = load_policy(policy, *env);
  SparseStats st = sparse_reward_stats(*env, have_pol ? &pol : nullptr, episodes, seed);

  json j = base_report("sparse-stats", cfg, policy);
  j["episodes"] = episodes;
  j["seed"] = seed;
  j["mean_horizon"] = st.mean_horizon;
  j["mean_nonzero_steps"] = st.mean_nonzero_steps;
  j["percentage"] = st.percentage;
  write_json_atomic(out, j);
  std::cout << "sparse-stats: " << st.mean_nonzero_steps << " nonzero steps/ep -> " << out << "\n";
}

void cmd_export_heatmap(const std::string& config, const std::string& policy,
                        const std::string& interpreter, int states, std::uint64_t seed,
                        const std::string& out_dir) {
  Config cfg = Config::load(config);
  std::unique_ptr<Env> env = make_env(cfg);
  print_resolved(cfg);
  PolicyNetwork pre = load_policy(policy, *env);
  MaskNetwork mask = load_mask(interpreter, pre, cfg);
  if (states < 1) throw UsageError("export-heatmap: --states must be >= 1");

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());
  int h = env->obs_h(), w = env->obs_w(), c = env->obs_c();

  CsvWriter csv({"state", "row", "col", "mask"});
  Rng reset_rng = Rng(seed).split(1);
  for (int i = 0; i < states; ++i) {
    env->reset(reset_rng.next_u64());
    Tensor s = env->observe();
    Tensor m = mask.compute_mask(s);
    std::string tag = std::to_string(i);

    std::vector<float> composite(static_cast<std::size_t>(h * w), 0.0f);
    for (int ch = 0; ch < c; ++ch) {
      std::vector<float> plane(static_cast<std::size_t>(h * w));
      for (int p = 0; p < h * w; ++p) {
        float v = s.v[static_cast<std::size_t>(p * c + ch)];
        plane[static_cast<std::size_t>(p)] = v;
        composite[static_cast<std::size_t>(p)] = std::max(composite[static_cast<std::size_t>(p)], v);
      }
      write_pgm((fs::path(out_dir) / ("state_" + tag + "_ch" + std::to_string(ch) + ".pgm")).string(),
                plane, w, h);
    }
    write_pgm((fs::path(out_dir) / ("state_" + tag + ".pgm")).string(), composite, w, h);
    write_pgm((fs::path(out_dir) / ("mask_" + tag + ".pgm")).string(), m.v, w, h);
    std::vector<float> overlay(composite);
    for (int p = 0; p < h * w; ++p) overlay[static_cast<std::size_t>(p)] *= m.v[static_cast<std::size_t>(p)];
    write_pgm((fs::path(out_dir) / ("overlay_" + tag + ".pgm")).string(), overlay, w, h);

    for (int r = 0; r < h; ++r)
      for (int col = 0; col < w; ++col)
        csv.add_row({static_cast<double>(i), static_cast<double>(r), static_cast<double>(col),
                     m.v[static_cast<std::size_t>(r * w + col)]});
  }
  csv.save((fs::path(out_dir) / "mask_values.csv").string());

  json j = base_report("export-heatmap", cfg, policy);
  j["mask_checkpoint"] = interpreter;
  j["mask_hash"] = file_hash_hex(interpreter);
  j["states"] = states;
  j["seed"] = seed;
  write_json_atomic((fs::path(out_dir) / "report.json").string(), j);
  std::cout << "export-heatmap: " << states << " states -> " << out_dir << "\n";
}

void cmd_grad_check(int cases, const std::string& inject_fault) {
  struct Fixture {
    const char* name;
    std::vector<LayerSpec> layers;
    std::vector<int> shape;
  };
  // Each registered layer kind appears in at least one fixture, wrapped with
  // enough structure to give it parameters upstream and downstream.
  std::vector<Fixture> fixtures = {
      {"dense", {LayerSpec::Flatten(), LayerSpec::Dense(12, 5)}, {2, 2, 3, 2}},
      {"conv2d", {LayerSpec::Conv(3, 4)}, {2, 4, 4, 3}},
      {"relu", {LayerSpec::Conv(2, 3), LayerSpec::Relu()}, {2, 4, 4, 2}},
      {"sigmoid", {LayerSpec::Conv(2, 3), LayerSpec::Sigmoid()}, {2, 4, 4, 2}},
      {"thresholded_relu",
       {LayerSpec::Conv(2, 3), LayerSpec::Sigmoid(), LayerSpec::ThresholdedRelu(0.1f)},
       {2, 4, 4, 2}},
      {"flatten",
       {LayerSpec::Conv(2, 3), LayerSpec::Flatten(), LayerSpec::Dense(48, 4)},
       {2, 4, 4, 2}},
      {"upsample2d",
       {LayerSpec::Conv(2, 3), LayerSpec::Upsample(2), LayerSpec::Conv(3, 2)},
       {2, 4, 4, 2}},
  };
  const float eps = 1e-3f, tol = 1e-3f;
  bool all_ok = true;
  std::string failed;
  for (const auto& fx : fixtures) {
    float fault = inject_fault == fx.name ? 1.1f : 1.0f;
    float worst = 0.0f;
    int used = 0;
    for (int cse = 0; used < cases && cse < cases * 40; ++cse) {
      Rng rng(static_cast<std::uint64_t>(cse) + 1);
      Network net(fx.layers, "gc", rng);
      Tensor x = Tensor::zeros(fx.shape);
      for (float& v : x.v) v = rng.uniform(-1.0f, 1.0f);
      GradCheckReport rep = grad_check(net, x, eps, fault);
      if (rep.at_kink) continue;  // finite differences unreliable there
      worst = std::max(worst, rep.max_rel_err);
      ++used;
    }
    bool ok = used == cases && worst < tol;
    std::printf("%-18s cases=%d max_rel_err=%.3e %s\n", fx.name, used, worst,
                ok ? "pass" : "FAIL");
    if (!ok) {
      all_ok = false;
      failed = fx.name;
    }
  }
  if (!all_ok) throw IntegrityError("gradient check failed for layer " + failed);
  std::cout << "grad-check: all layer kinds pass\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"reward-consistency interpretability toolkit"};
  app.require_subcommand(1);

  std::string config, policy, mask, interpreter, out, patterns, mode, alpha, beta, k, inject;
  std::uint64_t seed = 0;
  int episodes = 20, steps = 500, states = 8, cases = 50;

  auto add_common = [&](CLI::App* sub, bool needs_config = true) {
    if (needs_config) sub->add_option("--config", config, "config file")->required();
    sub->add_option("--seed", seed, "root seed");
  };

  auto* sp = app.add_subcommand("pretrain", "train a policy with PPO");
  add_common(sp);
  sp->add_option("--out", out, "checkpoint path")->required();

  auto* si = app.add_subcommand("interpret", "train a mask interpreter against a policy");
  add_common(si);
  si->add_option("--policy", policy, "policy checkpoint")->required();
  si->add_option("--out", out, "mask checkpoint path")->required();
  si->add_option("--mode", mode, "reward|rewardK|actionRL|actionSup");
  si->add_option("--alpha", alpha, "sparsity weight");
  si->add_option("--beta", beta, "mask dead-zone threshold");
  si->add_option("--k", k, "branch depth for rewardK");

  auto* se = app.add_subcommand("evaluate", "masked-return evaluation");
  add_common(se);
  se->add_option("--policy", policy, "policy checkpoint")->required();
  se->add_option("--mask", mask, "identity|zero|jacobian|perturbation|<ckpt>")->required();
  se->add_option("--episodes", episodes, "episode count");
  se->add_option("--out", out, "JSON report path")->required();

  auto* sa = app.add_subcommand("ablate", "lane feature-ablation returns");
  add_common(sa);
  sa->add_option("--policy", policy, "policy checkpoint")->required();
  sa->add_option("--patterns", patterns, "comma list of patterns")
      ->default_val("lane1,lane2,lane3");
  sa->add_option("--episodes", episodes, "episode count");
  sa->add_option("--out", out, "CSV report path")->required();

  auto* sd = app.add_subcommand("divergence", "action-distribution KL through the mask");
  add_common(sd);
  sd->add_option("--policy", policy, "policy checkpoint")->required();
  sd->add_option("--mask", mask, "mask checkpoint")->required();
  sd->add_option("--patterns", patterns, "comma list of lane patterns (optional)");
  sd->add_option("--steps", steps, "steps per rollout");
  sd->add_option("--out", out, "JSON report path")->required();

  auto* sr = app.add_subcommand("regions", "mean mask attention per lane region");
  add_common(sr);
  sr->add_option("--policy", policy, "policy checkpoint")->required();
  sr->add_option("--mask", mask, "identity|zero|jacobian|perturbation|<ckpt>")->required();
  sr->add_option("--states", states, "sampled states");
  sr->add_option("--out", out, "JSON report path")->required();

  auto* sh = app.add_subcommand("shift", "per-step region attention along a rollout");
  add_common(sh);
  sh->add_option("--policy", policy, "policy checkpoint")->required();
  sh->add_option("--mask", mask, "mask checkpoint")->required();
  sh->add_option("--steps", steps, "rollout steps");
  sh->add_option("--out", out, "CSV report path")->required();

  auto* ss = app.add_subcommand("sparse-stats", "reward sparsity statistics");
  add_common(ss);
  ss->add_option("--policy", policy, "policy checkpoint (optional: random actions)");
  ss->add_option("--episodes", episodes, "episode count");
  ss->add_option("--out", out, "JSON report path")->required();

  auto* sx = app.add_subcommand("export-heatmap", "PGM/CSV export of states, masks, overlays");
  add_common(sx);
  sx->add_option("--policy", policy, "policy checkpoint")->required();
  sx->add_option("--interpreter", interpreter, "mask checkpoint")->required();
  sx->add_option("--states", states, "states to export");
  sx->add_option("--out", out, "output directory")->required();

  auto* sg = app.add_subcommand("grad-check", "finite-difference check of all layer kinds");
  sg->add_option("--cases", cases, "random cases per layer kind");
  sg->add_option("--inject-fault", inject, "layer kind to corrupt (test fixture)");

  try {
    app.parse(argc, argv);
    thread_cap();  // validate RLINRL_THREADS up front
    if (sp->parsed()) cmd_pretrain(config, seed, out);
    if (si->parsed()) cmd_interpret(config, policy, seed, out, mode, alpha, beta, k);
    if (se->parsed()) cmd_evaluate(config, policy, mask, episodes, seed, out);
    if (sa->parsed()) cmd_ablate(config, policy, patterns, episodes, seed, out);
    if (sd->parsed()) cmd_divergence(config, policy, mask, patterns, steps, seed, out);
    if (sr->parsed()) cmd_regions(config, policy, mask, states, seed, out);
    if (sh->parsed()) cmd_shift(config, policy, mask, steps, seed, out);
    if (ss->parsed()) cmd_sparse_stats(config, policy, episodes, seed, out);
    if (sx->parsed()) cmd_export_heatmap(config, policy, interpreter, states, seed, out);
    if (sg->parsed()) cmd_grad_check(cases, inject);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return 0;  // --help
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const IntegrityError& e) {
    std::cerr << "integrity error: " << e.what() << "\n";
    return 4;
  } catch (const TrainingError& e) {
    std::cerr << "training error: " << e.what() << "\n";
    return 5;
  }
  return 0;
}
