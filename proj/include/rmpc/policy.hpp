#pragma once

#include <string>
#include <vector>

#include "rmpc/env.hpp"
#include "rmpc/mpc.hpp"
#include "rmpc/rng.hpp"
#include "rmpc/types.hpp"

namespace rmpc {

// Observation layout (kObsDim entries, fixed order):
//   [0]     base height
//   [1:3]   sin/cos base pitch
//   [3:9]   joint positions
//   [9:11]  base linear velocity (vx, vz)
//   [11]    base pitch rate
//   [12:18] joint velocities
//   [18:22] per-foot contact phase (sin 2*pi*phi, cos 2*pi*phi), right then left
//   [22]    MPC value, scaled
inline constexpr int kObsDim = 23;
inline constexpr int kActDim = kNumJoints;

struct ObsSettings {
  double v_mpc_scale = 1e-2;
  double v_mpc_sentinel = 10.0;  // written to the value slot when the MPC failed
};

struct MlpParams {
  std::vector<Mat> W;
  std::vector<Vec> b;

  int num_params() const;
  void flatten_into(double* out) const;
  void unflatten_from(const double* in);
};

/// Policy and value networks (separate trunks) plus a state-independent
/// log-std vector. The final policy layer is zero-initialized so the residual
/// action is exactly zero everywhere at the start of training.
struct PolicyParams {
  int obs_dim = kObsDim;
  int act_dim = kActDim;
  int hidden = 64;
  MlpParams pi;
  MlpParams value;
  Vec log_std;

  int num_params() const { return pi.num_params() + value.num_params() + act_dim; }
};

PolicyParams init_policy(int obs_dim, int act_dim, int hidden, uint64_t seed);

struct PolicyOutput {
  Vec mean;
  Vec log_std;
  double value = 0.0;
};

/// Intermediate activations kept for the backward pass.
struct ForwardCache {
  std::vector<Vec> pi_pre, pi_post;  // pre/post activation per layer
  std::vector<Vec> v_pre, v_post;
};

PolicyOutput policy_forward(const PolicyParams& params, const Vec& obs,
                            ForwardCache* cache = nullptr);

Vec observe(const EnvState& state, const MpcSolution& mpc, const ObsSettings& settings);

enum class BlendStrategy { kJointJoint, kJointTorque, kTorqueTorque };
BlendStrategy blend_strategy_from_string(const std::string& name);
std::string to_string(BlendStrategy s);

/// Blends the MPC output with the policy action at the torque level.
///   joint-joint:   tau = Kp(q_set + lambda a - q) + Kd(qd_set - qd) + tau_ff
///   joint-torque:  tau = tau_mpc + lambda (Kp(a + q_nom - q) - Kd qd)
///   torque-torque: tau = tau_mpc + lambda a
/// The result is clamped to the torque limits.
Vec6 blend(const Vec6& tau_mpc, const Vec6& tau_ff, const Vec6& q_set, const Vec6& qd_set,
           const Vec6& action, const RobotState& state, BlendStrategy strategy, double lambda,
           const ModelParams& model);

double gaussian_log_prob(const Vec& action, const Vec& mean, const Vec& log_std);

/// Versioned binary checkpoint tied to a config hash.
void save_checkpoint(const std::string& path, const PolicyParams& params, uint64_t config_hash);
PolicyParams load_checkpoint(const std::string& path, uint64_t* config_hash = nullptr);

}  // namespace rmpc
