#include "rmpc/ppo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

namespace rmpc {

namespace {
constexpr double kLogSqrt2Pi = 0.91893853320467274178032973640562;
inline double elu_grad(double z) { return z > 0.0 ? 1.0 : std::exp(z); }
}  // namespace

void RolloutBuffer::resize(int steps, int envs, int obs_dim, int act_dim) {
  n_steps = steps;
  n_envs = envs;
  obs.assign(steps, Mat::Zero(envs, obs_dim));
  actions.assign(steps, Mat::Zero(envs, act_dim));
  logp.setZero(steps, envs);
  values.setZero(steps, envs);
  rewards.setZero(steps, envs);
  dones.setZero(steps, envs);
  bootstrap_value.setZero(envs);
}

GaeResult gae_advantages(const RolloutBuffer& buffer, double gamma, double lam) {
  GaeResult out;
  const int T = buffer.n_steps, E = buffer.n_envs;
  out.advantages.setZero(T, E);
  out.returns.setZero(T, E);
  for (int e = 0; e < E; ++e) {
    double running = 0.0;
    for (int t = T - 1; t >= 0; --t) {
      const double not_done = 1.0 - buffer.dones(t, e);
      const double next_value = (t == T - 1) ? buffer.bootstrap_value[e] : buffer.values(t + 1, e);
      const double delta =
          buffer.rewards(t, e) + gamma * next_value * not_done - buffer.values(t, e);
      running = delta + gamma * lam * not_done * running;
      out.advantages(t, e) = running;
      out.returns(t, e) = running + buffer.values(t, e);
    }
  }
  return out;
}

PolicyGrads zero_grads(const PolicyParams& params) {
  PolicyGrads g;
  for (size_t l = 0; l < params.pi.W.size(); ++l) {
    g.pi.W.push_back(Mat::Zero(params.pi.W[l].rows(), params.pi.W[l].cols()));
    g.pi.b.push_back(Vec::Zero(params.pi.b[l].size()));
    g.value.W.push_back(Mat::Zero(params.value.W[l].rows(), params.value.W[l].cols()));
    g.value.b.push_back(Vec::Zero(params.value.b[l].size()));
  }
  g.log_std = Vec::Zero(params.log_std.size());
  return g;
}

namespace {

// Backpropagates d(loss)/d(output) through one MLP given cached activations.
void mlp_backward(const MlpParams& net, const std::vector<Vec>& pre, const std::vector<Vec>& post,
                  const Vec& grad_out, MlpParams& grads) {
  const int n_layers = static_cast<int>(net.W.size());
  Vec delta = grad_out;
  for (int l = n_layers - 1; l >= 0; --l) {
    grads.W[l].noalias() += delta * post[l].transpose();
    grads.b[l] += delta;
    if (l > 0) {
      Vec back = net.W[l].transpose() * delta;
      delta = back.cwiseProduct(pre[l - 1].unaryExpr([](double z) { return elu_grad(z); }));
    }
  }
}

}  // namespace

PpoLossInfo ppo_loss(const PolicyParams& params, const PpoBatch& batch, const PpoConfig& cfg,
                     PolicyGrads* grads) {
  const int N = static_cast<int>(batch.obs.rows());
  if (N == 0) throw StructuralError("ppo_loss: empty batch");
  const int act_dim = params.act_dim;
  const double inv_n = 1.0 / N;

  PpoLossInfo info;
  ForwardCache cache;
  Vec grad_mean(act_dim);

  for (int s = 0; s < N; ++s) {
    const Vec obs = batch.obs.row(s).transpose();
    const Vec action = batch.actions.row(s).transpose();
    const PolicyOutput out = policy_forward(params, obs, grads ? &cache : nullptr);

    const double logp = gaussian_log_prob(action, out.mean, params.log_std);
    const double ratio = std::exp(logp - batch.old_logp[s]);
    const double adv = batch.advantages[s];
    const double surr1 = ratio * adv;
    const double clipped =
        std::min(std::max(ratio, 1.0 - cfg.clip_eps), 1.0 + cfg.clip_eps) * adv;
    const double surr = std::min(surr1, clipped);
    info.surrogate += -surr * inv_n;

    const double verr = out.value - batch.returns[s];
    info.value_loss += 0.5 * verr * verr * inv_n;

    if (grads) {
      // Surrogate gradient flows through the ratio only on the unclipped branch.
      const double g_r = (surr1 <= clipped) ? -adv * inv_n : 0.0;
      if (g_r != 0.0) {
        const double g_logp = g_r * ratio;
        for (int j = 0; j < act_dim; ++j) {
          const double sd = std::exp(params.log_std[j]);
          const double z = (action[j] - out.mean[j]) / sd;
          grad_mean[j] = g_logp * z / sd;
          grads->log_std[j] += g_logp * (z * z - 1.0);
        }
        mlp_backward(params.pi, cache.pi_pre, cache.pi_post, grad_mean, grads->pi);
      }
      const Vec g_v = Vec::Constant(1, cfg.value_coef * verr * inv_n);
      mlp_backward(params.value, cache.v_pre, cache.v_post, g_v, grads->value);
    }
  }

  // State-independent Gaussian entropy.
  double entropy = 0.0;
  for (int j = 0; j < act_dim; ++j) entropy += params.log_std[j] + kLogSqrt2Pi + 0.5;
  info.entropy = entropy;
  if (grads && cfg.entropy_coef != 0.0)
    grads->log_std.array() -= cfg.entropy_coef;

  info.total =
      info.surrogate + cfg.value_coef * info.value_loss - cfg.entropy_coef * info.entropy;
  return info;
}

PolicyGrads policy_backward(const PolicyParams& params, const PpoBatch& batch,
                            const PpoConfig& cfg) {
  PolicyGrads grads = zero_grads(params);
  ppo_loss(params, batch, cfg, &grads);
  return grads;
}

Vec flatten_policy(const PolicyParams& params) {
  Vec flat(params.num_params());
  double* p = flat.data();
  params.pi.flatten_into(p);
  p += params.pi.num_params();
  params.value.flatten_into(p);
  p += params.value.num_params();
  std::copy(params.log_std.data(), params.log_std.data() + params.act_dim, p);
  return flat;
}

void unflatten_policy(const Vec& flat, PolicyParams& params) {
  const double* p = flat.data();
  params.pi.unflatten_from(p);
  p += params.pi.num_params();
  params.value.unflatten_from(p);
  p += params.value.num_params();
  std::copy(p, p + params.act_dim, params.log_std.data());
}

Vec flatten_grads(const PolicyGrads& grads) {
  int n = grads.log_std.size();
  for (size_t l = 0; l < grads.pi.W.size(); ++l)
    n += static_cast<int>(grads.pi.W[l].size() + grads.pi.b[l].size() + grads.value.W[l].size() +
                          grads.value.b[l].size());
  Vec flat(n);
  double* p = flat.data();
  grads.pi.flatten_into(p);
  p += grads.pi.num_params();
  grads.value.flatten_into(p);
  p += grads.value.num_params();
  std::copy(grads.log_std.data(), grads.log_std.data() + grads.log_std.size(), p);
  return flat;
}

AdamOptimizer::AdamOptimizer(int dim, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_ = Vec::Zero(dim);
  v_ = Vec::Zero(dim);
}

void AdamOptimizer::step(Vec& params, const Vec& grads) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grads;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grads.cwiseProduct(grads);
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  params.array() -=
      lr_ * (m_.array() / bc1) / ((v_.array() / bc2).sqrt() + eps_);
}

PpoUpdateStats ppo_update(PolicyParams& params, const RolloutBuffer& buffer,
                          const PpoConfig& cfg, AdamOptimizer& adam, Rng& update_rng) {
  const int T = buffer.n_steps, E = buffer.n_envs;
  const int N = T * E;
  const GaeResult gae = gae_advantages(buffer, cfg.gamma, cfg.lam_gae);

  // Normalize advantages once per update.
  const double mean = gae.advantages.sum() / N;
  const double var = (gae.advantages.array() - mean).square().sum() / N;
  const double inv_std = 1.0 / std::sqrt(var + 1e-8);

  PpoBatch all;
  all.obs.resize(N, buffer.obs[0].cols());
  all.actions.resize(N, buffer.actions[0].cols());
  all.old_logp.resize(N);
  all.advantages.resize(N);
  all.returns.resize(N);
  for (int t = 0; t < T; ++t)
    for (int e = 0; e < E; ++e) {
      const int s = t * E + e;
      all.obs.row(s) = buffer.obs[t].row(e);
      all.actions.row(s) = buffer.actions[t].row(e);
      all.old_logp[s] = buffer.logp(t, e);
      all.advantages[s] = (gae.advantages(t, e) - mean) * inv_std;
      all.returns[s] = gae.returns(t, e);
    }

  std::vector<int> order(N);
  std::iota(order.begin(), order.end(), 0);
  Vec flat = flatten_policy(params);

  PpoUpdateStats stats;
  int stat_count = 0;
  const int mb_count = std::max(1, cfg.minibatches);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int i = N - 1; i > 0; --i) std::swap(order[i], order[update_rng.uniform_int(i + 1)]);
    const int mb_size = (N + mb_count - 1) / mb_count;
    for (int mb = 0; mb < mb_count; ++mb) {
      const int begin = mb * mb_size;
      const int end = std::min(N, begin + mb_size);
      if (begin >= end) continue;
      PpoBatch sub;
      sub.obs.resize(end - begin, all.obs.cols());
      sub.actions.resize(end - begin, all.actions.cols());
      sub.old_logp.resize(end - begin);
      sub.advantages.resize(end - begin);
      sub.returns.resize(end - begin);
      for (int s = begin; s < end; ++s) {
        const int src = order[s];
        sub.obs.row(s - begin) = all.obs.row(src);
        sub.actions.row(s - begin) = all.actions.row(src);
        sub.old_logp[s - begin] = all.old_logp[src];
        sub.advantages[s - begin] = all.advantages[src];
        sub.returns[s - begin] = all.returns[src];
      }
      PolicyGrads grads = zero_grads(params);
      const PpoLossInfo info = ppo_loss(params, sub, cfg, &grads);
      Vec flat_grads = flatten_grads(grads);
      const double norm = flat_grads.norm();
      if (cfg.max_grad_norm > 0.0 && norm > cfg.max_grad_norm)
        flat_grads *= cfg.max_grad_norm / norm;
      adam.step(flat, flat_grads);
      unflatten_policy(flat, params);
      stats.loss += info.total;
      stats.surrogate += info.surrogate;
      stats.value_loss += info.value_loss;
      stats.entropy = info.entropy;
      ++stat_count;
    }
  }
  if (stat_count > 0) {
    stats.loss /= stat_count;
    stats.surrogate /= stat_count;
    stats.value_loss /= stat_count;
  }
  return stats;
}

void write_training_log_csv(const std::string& path,
                            const std::vector<TrainIterationLog>& log) {
  std::ofstream os(path);
  if (!os) throw StructuralError("write_training_log_csv: cannot open " + path);
  os << "iteration,mean_reward,r_lin_vel,r_ang_vel,r_action_rate1,r_action_rate2,r_torques,"
        "r_orientation,r_height,r_joint_reg,r_self_collision,r_termination,episode_length,"
        "wall_time\n";
  os.precision(12);
  for (const auto& row : log) {
    os << row.iteration << "," << row.mean_reward;
    for (double t : row.mean_terms) os << "," << t;
    os << "," << row.mean_episode_length << "," << row.wall_time_s << "\n";
  }
}

Trainer::Trainer(std::vector<Env>& envs, BatchRunner& mpc_batch, const PpoConfig& cfg,
                 uint64_t seed)
    : envs_(&envs),
      mpc_(&mpc_batch),
      cfg_(cfg),
      rollout_rng_(seed, 0x0117),
      update_rng_(seed, 0x0272) {
  if (mpc_batch.size() != static_cast<int>(envs.size()))
    throw StructuralError("Trainer: env count != MPC batch size");
}

std::vector<TrainIterationLog> Trainer::train(PolicyParams& params, int n_iters) {
  const int E = static_cast<int>(envs_->size());
  const int T = cfg_.n_steps;
  std::vector<TrainIterationLog> log;
  AdamOptimizer adam(params.num_params(), cfg_.lr);
  RolloutBuffer buffer;
  buffer.resize(T, E, params.obs_dim, params.act_dim);
  ForwardCache cache;
  const auto wall0 = std::chrono::steady_clock::now();

  std::vector<RobotState> states(E);
  std::vector<MpcCommand> cmds(E);
  std::vector<GaitState> gaits(E);
  auto gather_inputs = [&]() {
    for (int e = 0; e < E; ++e) {
      const EnvState& s = (*envs_)[e].state();
      states[e] = s.robot;
      cmds[e] = s.cmd;
      gaits[e] = s.gait;
    }
  };

  for (int iter = 0; iter < n_iters; ++iter) {
    TrainIterationLog row;
    row.iteration = iter;
    std::array<double, 10> term_sum{};

    for (int t = 0; t < T; ++t) {
      if (!pending_valid_) {
        gather_inputs();
        pending_ = mpc_->solve(states, cmds, gaits);
        pending_valid_ = true;
      }
      for (int e = 0; e < E; ++e) {
        Env& env = (*envs_)[e];
        const MpcSolution& sol = pending_[e];
        const Vec obs = observe(env.state(), sol, cfg_.obs);
        const PolicyOutput fwd = policy_forward(params, obs, nullptr);
        Vec action(params.act_dim);
        for (int j = 0; j < params.act_dim; ++j)
          action[j] = fwd.mean[j] + std::exp(params.log_std[j]) * rollout_rng_.normal();
        const double logp = gaussian_log_prob(action, fwd.mean, params.log_std);

        Vec6 tau;
        bool failed = sol.status != MpcStatus::kOk;
        if (!failed) {
          const Vec6 tau_mpc = mpc_torque(sol, env.state().robot, env.model());
          tau = blend(tau_mpc, sol.tau_ff, sol.q_set, sol.qd_set, action.head<kActDim>(),
                      env.state().robot, cfg_.strategy, cfg_.lambda_blend, env.model());
        } else {
          tau.setZero();
        }
        const Env::StepResult res = env.step(tau, action.head<kActDim>(), failed);

        buffer.obs[t].row(e) = obs.transpose();
        buffer.actions[t].row(e) = action.transpose();
        buffer.logp(t, e) = logp;
        buffer.values(t, e) = fwd.value;
        buffer.rewards(t, e) = res.rewards.total;
        buffer.dones(t, e) = res.done ? 1.0 : 0.0;
        if (res.done) {
          episode_len_sum_ += env.last_episode_length();
          ++episode_count_;
        }
        row.mean_reward += res.rewards.total;
        const auto wt = res.rewards.weighted(env.config().weights);
        for (int k = 0; k < 10; ++k) term_sum[k] += wt[k];
      }
      pending_valid_ = false;
    }

    // MPC solutions for the post-rollout states: bootstrap values now, reused
    // as the first solve of the next iteration.
    gather_inputs();
    pending_ = mpc_->solve(states, cmds, gaits);
    pending_valid_ = true;
    for (int e = 0; e < E; ++e) {
      const Vec obs = observe((*envs_)[e].state(), pending_[e], cfg_.obs);
      buffer.bootstrap_value[e] = policy_forward(params, obs, nullptr).value;
    }

    const double denom = static_cast<double>(T) * E;
    row.mean_reward /= denom;
    for (int k = 0; k < 10; ++k) row.mean_terms[k] = term_sum[k] / denom;
    row.mean_episode_length = episode_count_ > 0 ? episode_len_sum_ / episode_count_ : 0.0;

    if (cfg_.updates_enabled) ppo_update(params, buffer, cfg_, adam, update_rng_);

    row.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    log.push_back(row);
  }
  return log;
}

}  // namespace rmpc
