#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rmpc/batch.hpp"
#include "rmpc/config.hpp"
#include "rmpc/env.hpp"
#include "rmpc/mpc.hpp"
#include "rmpc/policy.hpp"
#include "rmpc/ppo.hpp"
#include "rmpc/trajlog.hpp"
#include "rmpc/types.hpp"

namespace rmpc {

enum class Leg { kLeft, kRight };

/// Quasi-static joint-torque to ground-reaction-wrench map for one stance
/// leg: W = (J_foot^T)^{-1} tau_leg, where J_foot is the 3x3 Jacobian of the
/// foot frame (x, z, rotation) with respect to that leg's joints. Throws
/// SingularityError when the Jacobian condition number exceeds 1e8
/// (straight-knee configurations).
Vec3 grw_map(const Vec3& tau_leg, const Vec9& q, Leg leg, const ModelParams& model);

struct SurvivalRow {
  int n_qp = 0;
  int n_trials = 0;
  double survived_fraction = 0.0;
};

struct BoundaryRow {
  double cmd_vx = 0.0;
  double tracking_err = 0.0;
  bool achieved = false;
};

struct PhaseMetricRow {
  double phase_bin = 0.0;  // bin center in [0, 1)
  int n_samples = 0;
  double ratio_mean = 0.0;   // NaN when undefined in the bin
  double cosine_mean = 0.0;  // NaN when undefined (0/0 convention: missing)
  std::array<double, kNumJoints> tau_mpc_mean{};
  std::array<double, kNumJoints> tau_res_mean{};
};

struct ExperimentSetup {
  ModelParams model;
  MpcSettings mpc;
  EnvConfig env;
  PpoConfig ppo;
  uint64_t seed = 0;
  int threads = 0;  // <= 0: hardware concurrency
};

ExperimentSetup setup_from_config(const Config& cfg);

struct EpisodeOptions {
  double duration = 5.0;
  bool record = false;
};

struct EpisodeStats {
  bool survived = true;
  double time_alive = 0.0;
  double mean_vx_late = 0.0;  // mean forward velocity over the final window
  double late_window = 5.0;
  std::vector<LogRecord> records;
};

/// Closed-loop rollout of one environment under the MPC controller, with an
/// optional deterministic (mean-action) residual policy blended in.
EpisodeStats run_episode(Env& env, MpcController& ctrl, const PolicyParams* policy,
                         const PpoConfig& pcfg, const EpisodeOptions& opts);

std::vector<SurvivalRow> sweep_qp_iterations(const ExperimentSetup& setup,
                                             const std::vector<int>& n_qp_grid, int trials,
                                             double duration = 5.0);

std::vector<BoundaryRow> velocity_boundary(const ExperimentSetup& setup,
                                           const std::vector<double>& vx_grid,
                                           const PolicyParams* policy, double duration = 8.0);

std::vector<PhaseMetricRow> residual_metrics(const std::vector<LogRecord>& log, int bins = 50);

struct GaitStudyRow {
  std::string schedule;
  double phase_switch = 0.0;
  std::string controller;
  double survived_fraction = 0.0;
  double tracking_err = 0.0;
};
std::vector<GaitStudyRow> gait_study(const ExperimentSetup& setup, const PolicyParams& policy,
                                     int trials, double duration = 8.0);

struct TerrainStudyRow {
  std::string terrain;
  double z_swing = 0.0;
  std::string controller;
  double survived_fraction = 0.0;
  double mean_time_alive = 0.0;
  double mean_distance = 0.0;
};
std::vector<TerrainStudyRow> terrain_study(const ExperimentSetup& setup,
                                           const PolicyParams& policy, int trials,
                                           double duration = 8.0, double cmd_vx = 0.3);

void write_survival_csv(const std::string& path, const std::vector<SurvivalRow>& rows);
void write_boundary_csv(const std::string& path, const std::vector<BoundaryRow>& rows);
void write_phase_metrics_csv(const std::string& path, const std::vector<PhaseMetricRow>& rows);
void write_gait_study_csv(const std::string& path, const std::vector<GaitStudyRow>& rows);
void write_terrain_study_csv(const std::string& path, const std::vector<TerrainStudyRow>& rows);

/// Records experiment identity next to its outputs so a rerun reproduces the
/// same CSV bytes.
void write_manifest(const std::string& out_dir, const std::string& experiment,
                    const Config& cfg, uint64_t seed, int threads);

/// Training entry: rolls out envs + MPC batch, trains the residual policy,
/// writes the checkpoint, the per-iteration log CSV and a manifest.
struct TrainOutputs {
  std::string checkpoint_path;
  std::string log_path;
  std::vector<TrainIterationLog> log;
};
TrainOutputs run_training(const Config& cfg, const std::string& out_dir, uint64_t seed,
                          int threads, int n_iters, int n_envs, bool updates_enabled = true);

/// Dispatch by [experiment] name = sweep-nqp | velocity-boundary | gait-study |
/// terrain-study | benchmark | train | residual-metrics.
int run_experiment(const Config& cfg, const std::string& out_dir, uint64_t seed, int threads);

}  // namespace rmpc
