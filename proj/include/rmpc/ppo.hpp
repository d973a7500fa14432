#pragma once

#include <string>
#include <vector>

#include "rmpc/batch.hpp"
#include "rmpc/env.hpp"
#include "rmpc/policy.hpp"
#include "rmpc/rng.hpp"
#include "rmpc/types.hpp"

namespace rmpc {

struct PpoConfig {
  double gamma = 0.99;
  double lam_gae = 0.95;
  double clip_eps = 0.2;
  int epochs = 4;
  int minibatches = 4;
  double lr = 3e-4;
  double entropy_coef = 0.0;
  double value_coef = 0.5;
  double max_grad_norm = 1.0;
  int n_steps = 24;

  double lambda_blend = 0.1;
  BlendStrategy strategy = BlendStrategy::kJointTorque;

  int hidden = 64;
  ObsSettings obs;
  bool updates_enabled = true;  // false: fixed-prior baseline run
};

/// Rectangular rollout storage, n_steps x n_envs.
struct RolloutBuffer {
  int n_steps = 0, n_envs = 0;
  std::vector<Mat> obs;      // per step: n_envs x obs_dim
  std::vector<Mat> actions;  // per step: n_envs x act_dim
  Mat logp, values, rewards, dones;
  Vec bootstrap_value;  // n_envs

  void resize(int steps, int envs, int obs_dim, int act_dim);
};

struct GaeResult {
  Mat advantages;  // n_steps x n_envs, unnormalized
  Mat returns;
};

/// Standard GAE recursion with per-step done masking and a bootstrap value
/// after the last step. Advantages are returned raw; they are normalized to
/// zero mean / unit variance once per update inside ppo_update.
GaeResult gae_advantages(const RolloutBuffer& buffer, double gamma, double lam);

struct PpoBatch {
  Mat obs;      // N x obs_dim
  Mat actions;  // N x act_dim
  Vec old_logp;
  Vec advantages;
  Vec returns;
};

struct PolicyGrads {
  MlpParams pi;
  MlpParams value;
  Vec log_std;
};
PolicyGrads zero_grads(const PolicyParams& params);

struct PpoLossInfo {
  double total = 0.0;
  double surrogate = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

/// Clipped-surrogate + value + entropy loss and its exact gradients for every
/// parameter (reverse-mode through the MLPs). Pass grads = nullptr to only
/// evaluate the loss (finite-difference tests).
PpoLossInfo ppo_loss(const PolicyParams& params, const PpoBatch& batch, const PpoConfig& cfg,
                     PolicyGrads* grads);

/// Gradient half of the contract; wraps ppo_loss.
PolicyGrads policy_backward(const PolicyParams& params, const PpoBatch& batch,
                            const PpoConfig& cfg);

Vec flatten_policy(const PolicyParams& params);
void unflatten_policy(const Vec& flat, PolicyParams& params);
Vec flatten_grads(const PolicyGrads& grads);

class AdamOptimizer {
 public:
  AdamOptimizer(int dim, double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void step(Vec& params, const Vec& grads);

 private:
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
  Vec m_, v_;
};

struct PpoUpdateStats {
  double loss = 0.0;
  double surrogate = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

/// One PPO update (epochs x minibatches) over a finished rollout.
PpoUpdateStats ppo_update(PolicyParams& params, const RolloutBuffer& buffer,
                          const PpoConfig& cfg, AdamOptimizer& adam, Rng& update_rng);

struct TrainIterationLog {
  int iteration = 0;
  double mean_reward = 0.0;                 // mean per-step weighted total
  std::array<double, 10> mean_terms{};      // weighted contribution per reward term
  double mean_episode_length = 0.0;         // seconds, episodes finished so far
  double wall_time_s = 0.0;                 // cumulative
};

void write_training_log_csv(const std::string& path,
                            const std::vector<TrainIterationLog>& log);

/// Rollout collection + PPO updates with the MPC prior in the loop. The MPC
/// batch is solved once per control step; the residual action is blended per
/// the configured strategy. With updates_enabled = false the same loop runs
/// as the fixed-prior baseline (identical seeds give an identical iteration 0).
class Trainer {
 public:
  Trainer(std::vector<Env>& envs, BatchRunner& mpc_batch, const PpoConfig& cfg, uint64_t seed);

  std::vector<TrainIterationLog> train(PolicyParams& params, int n_iters);

 private:
  std::vector<Env>* envs_;
  BatchRunner* mpc_;
  PpoConfig cfg_;
  Rng rollout_rng_;
  Rng update_rng_;
  std::vector<MpcSolution> pending_;  // MPC solutions for the current states
  bool pending_valid_ = false;
  double episode_len_sum_ = 0.0;
  int episode_count_ = 0;
};

}  // namespace rmpc
