#pragma once

#include <array>
#include <string>
#include <vector>

#include "rmpc/gait.hpp"
#include "rmpc/mpc.hpp"
#include "rmpc/rng.hpp"
#include "rmpc/robot.hpp"
#include "rmpc/types.hpp"

namespace rmpc {

struct TerrainConfig {
  enum class Kind { kFlat, kHeightfield };
  Kind kind = Kind::kFlat;
  double amplitude = 0.04;
  double cell = 0.3;
  double extent = 80.0;  // heightfield spans [-extent/2, extent/2]
  uint64_t seed = 0;
};

/// Ground height profile. Heightfields are value noise on a uniform grid with
/// smoothstep interpolation; flat terrain is height zero everywhere.
class Terrain {
 public:
  Terrain() = default;
  explicit Terrain(const TerrainConfig& cfg);
  double height_at(double x) const;
  const TerrainConfig& config() const { return cfg_; }

 private:
  TerrainConfig cfg_;
  std::vector<double> heights_;
};

struct RewardWeights {
  double lin_vel = 10.0;
  double ang_vel = 5.0;
  double action_rate1 = -1e-3;
  double action_rate2 = -1e-4;
  double torques = -1e-4;
  double orientation = 1.0;
  double height = 1.0;
  double joint_reg = 1.0;
  double self_collision = -1.0;
  double termination = -100.0;
};

struct EnvConfig {
  double control_dt = 0.01;  // 100 Hz control
  int substeps = 4;          // 400 Hz physics

  // Penalty contact model.
  double k_n = 5e4;
  double c_n = 500.0;
  double v_slip = 0.05;

  TerrainConfig terrain;

  // Command sampling ranges.
  double cmd_height_lo = 1.0, cmd_height_hi = 1.0;
  double cmd_vx_lo = -0.6, cmd_vx_hi = 0.6;

  double episode_length = 10.0;  // seconds

  // Domain randomization (collapse a range to disable it).
  double friction_lo = 0.5, friction_hi = 1.0;
  double mass_scale_lo = 0.9, mass_scale_hi = 1.1;
  double init_vx = 0.5;         // initial base velocity in [-v, v]
  double init_pitch_rate = 0.5;

  // Gait schedule the environment tracks (kept in sync with the controller).
  double gait_period = 0.8;
  double phase_switch = 0.5;
  std::array<double, kNumContacts> phase_offsets = {0.5, 0.5, 0.0, 0.0};

  double sigma_r = 0.25;  // tracking reward sharpness
  RewardWeights weights;

  // Termination bounds.
  double height_lo = 0.35, height_hi = 1.2;
  double pitch_max = 1.0;
  double vel_max = 10.0;
  double collision_radius = 0.04;

  GaitState make_gait() const {
    GaitState g;
    g.period = gait_period;
    g.phase_switch = phase_switch;
    g.offsets = phase_offsets;
    return g;
  }
};

struct EnvState {
  RobotState robot;
  GaitState gait;
  MpcCommand cmd;
  double time = 0.0;
  Rng rng;
};

/// Unweighted reward terms plus the weighted total.
struct RewardBreakdown {
  double lin_vel = 0.0;
  double ang_vel = 0.0;
  double action_rate1 = 0.0;
  double action_rate2 = 0.0;
  double torques = 0.0;
  double orientation = 0.0;
  double height = 0.0;
  double joint_reg = 0.0;
  double self_collision = 0.0;
  double termination = 0.0;
  double total = 0.0;

  std::array<double, 10> terms() const {
    return {lin_vel, ang_vel,  action_rate1,   action_rate2, torques,
            orientation, height, joint_reg, self_collision, termination};
  }
  /// Weighted contribution of each term, same order as terms().
  std::array<double, 10> weighted(const RewardWeights& w) const;
};

/// Advances the robot by config.substeps semi-implicit Euler steps under the
/// penalty contact model, then advances time and the gait phase by one control
/// period. Throws SimBlowupError if the state becomes non-finite.
EnvState physics_step(const EnvState& state, const Vec6& tau, const EnvConfig& config,
                      const ModelParams& model, const Terrain& terrain);

/// True iff the left and right shank/foot segments come closer than the
/// collision radius (strict inequality).
bool self_collision(const RobotState& state, const ModelParams& model, double radius = 0.04);

struct TerminationCheck {
  bool terminated = false;
  std::string reason;
};
TerminationCheck check_termination(const EnvState& state, const EnvConfig& config,
                                   const ModelParams& model);

RewardBreakdown compute_rewards(const EnvState& prev, const EnvState& next, const Vec6& tau,
                                const Vec6& action, const Vec6& action_prev,
                                const Vec6& action_prev2, bool terminated, bool collided,
                                const EnvConfig& config, const ModelParams& model);

MpcCommand sample_command(Rng& rng, const EnvConfig& config);

/// Draws friction and a common mass scale within the configured ranges.
ModelParams randomize_model(Rng& rng, const EnvConfig& config, const ModelParams& base);

/// Kinetic + gravitational energy, optionally including the contact-spring
/// potential of penetrating points.
double total_energy(const ModelParams& model, const RobotState& state, const Terrain& terrain,
                    const EnvConfig& config, bool include_contact_springs);

/// One simulated biped: owns its randomized model, terrain and rng stream.
class Env {
 public:
  Env(const ModelParams& base, const EnvConfig& config, uint64_t seed, int env_id = 0);

  void reset();

  struct StepResult {
    RewardBreakdown rewards;
    bool done = false;
    std::string reason;
  };
  /// Applies the torque, steps physics, evaluates rewards and termination.
  /// `action` is the pre-blend policy action used by the action-rate terms.
  /// `force_terminate` ends the episode regardless of the state (e.g. the
  /// controller failed to produce a solution).
  StepResult step(const Vec6& tau, const Vec6& action, bool force_terminate = false);

  EnvState& state() { return state_; }
  const EnvState& state() const { return state_; }
  const ModelParams& model() const { return model_; }
  const EnvConfig& config() const { return config_; }
  const Terrain& terrain() const { return terrain_; }
  double last_episode_length() const { return last_episode_length_; }

 private:
  ModelParams base_model_;
  ModelParams model_;
  EnvConfig config_;
  Terrain terrain_;
  EnvState state_;
  Vec6 action_prev_ = Vec6::Zero();
  Vec6 action_prev2_ = Vec6::Zero();
  double last_episode_length_ = 0.0;
};

}  // namespace rmpc
