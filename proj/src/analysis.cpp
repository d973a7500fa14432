#include "rmpc/analysis.hpp"

#include <Eigen/SVD>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

namespace rmpc {

namespace {

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> cursor{0};
  auto worker = [&]() {
    for (;;) {
      const int i = cursor.fetch_add(1);
      if (i >= n) break;
      fn(i);
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < threads; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

}  // namespace

Vec3 grw_map(const Vec3& tau_leg, const Vec9& q, Leg leg, const ModelParams& model) {
  const Kinematics kin = compute_kinematics(model, q, Vec9::Zero());
  const int j0 = leg == Leg::kLeft ? 3 : 6;
  // Foot frame: sole center position plus absolute foot rotation.
  const Vec2 ankle = leg == Leg::kLeft ? kin.ankle_l : kin.ankle_r;
  const double a3 = q[2] + q[j0] + q[j0 + 1] + q[j0 + 2];
  const double c = std::cos(a3), s = std::sin(a3);
  const Vec2 sole(ankle[0] + s * model.ankle_drop, ankle[1] - c * model.ankle_drop);

  // Jacobian rows (x, z, rotation) w.r.t. this leg's three joints.
  Eigen::Matrix3d J;
  const Vec2 pivots[3] = {kin.hip, leg == Leg::kLeft ? kin.knee_l : kin.knee_r, ankle};
  for (int k = 0; k < 3; ++k) {
    const Vec2 r = sole - pivots[k];
    J(0, k) = -r[1];
    J(1, k) = r[0];
    J(2, k) = 1.0;
  }
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(J);
  const Vec3 sv = svd.singularValues();
  const double smin = sv[2];
  const double smax = sv[0];
  if (smin <= 0.0 || smax / smin > 1e8)
    throw SingularityError("grw_map: foot Jacobian near-singular (straight leg)");
  return J.transpose().fullPivLu().solve(tau_leg);
}

ExperimentSetup setup_from_config(const Config& cfg) {
  ExperimentSetup s;
  s.model = model_from_config(cfg);
  s.mpc = mpc_settings_from_config(cfg);
  s.env = env_config_from_config(cfg, s.model);
  s.ppo = ppo_config_from_config(cfg);
  s.seed = static_cast<uint64_t>(cfg.get_int("experiment", "seed", 0));
  s.threads = cfg.get_int("experiment", "threads", 0);
  return s;
}

EpisodeStats run_episode(Env& env, MpcController& ctrl, const PolicyParams* policy,
                         const PpoConfig& pcfg, const EpisodeOptions& opts) {
  EpisodeStats stats;
  const double dt = env.config().control_dt;
  const int steps = static_cast<int>(std::lround(opts.duration / dt));
  const int late_start =
      std::max(0, steps - static_cast<int>(std::lround(stats.late_window / dt)));
  double vx_sum = 0.0;
  int vx_count = 0;
  MpcSolution prev;
  bool have_prev = false;

  for (int t = 0; t < steps; ++t) {
    const EnvState& s = env.state();
    const MpcSolution sol = ctrl.rti_step(s.robot, s.cmd, s.gait, have_prev ? &prev : nullptr);

    Vec6 tau = Vec6::Zero();
    Vec6 action = Vec6::Zero();
    bool failed = sol.status != MpcStatus::kOk;
    Vec6 tau_mpc = Vec6::Zero();
    if (!failed) {
      tau_mpc = mpc_torque(sol, s.robot, env.model());
      if (policy) {
        const Vec obs = observe(s, sol, pcfg.obs);
        action = policy_forward(*policy, obs, nullptr).mean.head<kActDim>();
        tau = blend(tau_mpc, sol.tau_ff, sol.q_set, sol.qd_set, action, s.robot, pcfg.strategy,
                    pcfg.lambda_blend, env.model());
      } else {
        tau = tau_mpc;
      }
    }

    if (opts.record) {
      LogRecord rec;
      rec.time = s.time;
      Eigen::Map<Vec9>(rec.q) = s.robot.q;
      Eigen::Map<Vec9>(rec.qd) = s.robot.qd;
      Eigen::Map<Vec6>(rec.tau_mpc) = tau_mpc;
      Eigen::Map<Vec6>(rec.tau_res) = tau - tau_mpc;
      Eigen::Map<Eigen::Matrix<double, kContactDim, 1>>(rec.f_contact) =
          sol.status == MpcStatus::kOk
              ? Eigen::Matrix<double, kContactDim, 1>(sol.z_star.F.row(0).transpose())
              : Eigen::Matrix<double, kContactDim, 1>::Zero();
      rec.phase = s.gait.phase;
      rec.v_mpc = sol.v_mpc;
      if (failed) rec.flags |= kLogMpcFailed;
      stats.records.push_back(rec);
    }

    const Env::StepResult res = env.step(tau, action, failed);
    if (opts.record) {
      LogRecord& rec = stats.records.back();
      rec.reward_total = res.rewards.total;
      const auto terms = res.rewards.terms();
      for (int k = 0; k < 10; ++k) rec.reward_terms[k] = terms[k];
      if (res.done) rec.flags |= kLogDone;
      if (res.rewards.self_collision > 0.0) rec.flags |= kLogSelfCollision;
    }

    if (t >= late_start) {
      vx_sum += env.state().robot.qd[0];
      ++vx_count;
    }
    if (res.done && res.reason != "timeout") {
      stats.survived = false;
      stats.time_alive = (t + 1) * dt;
      return stats;
    }
    prev = sol;
    have_prev = true;
  }
  stats.time_alive = steps * dt;
  stats.mean_vx_late = vx_count > 0 ? vx_sum / vx_count : 0.0;
  return stats;
}

std::vector<SurvivalRow> sweep_qp_iterations(const ExperimentSetup& setup,
                                             const std::vector<int>& n_qp_grid, int trials,
                                             double duration) {
  if (trials < 1) throw StructuralError("sweep_qp_iterations: trials must be >= 1");
  std::vector<SurvivalRow> rows;
  EnvConfig env_cfg = setup.env;
  env_cfg.episode_length = duration + 1.0;
  // MPC-only closed loop, zero velocity command, stepping in place.
  env_cfg.cmd_vx_lo = env_cfg.cmd_vx_hi = 0.0;
  env_cfg.cmd_height_lo = env_cfg.cmd_height_hi = setup.model.nominal_height();
  env_cfg.friction_lo = env_cfg.friction_hi = setup.model.mu;
  env_cfg.mass_scale_lo = env_cfg.mass_scale_hi = 1.0;

  for (const int n_qp : n_qp_grid) {
    MpcSettings mpc = setup.mpc;
    mpc.n_qp = n_qp;
    std::vector<int> survived(trials, 0);
    parallel_for(trials, setup.threads, [&](int trial) {
      Env env(setup.model, env_cfg, setup.seed, trial);
      MpcController ctrl(setup.model, mpc);
      EpisodeOptions opts;
      opts.duration = duration;
      const EpisodeStats stats = run_episode(env, ctrl, nullptr, setup.ppo, opts);
      survived[trial] = stats.survived ? 1 : 0;
    });
    SurvivalRow row;
    row.n_qp = n_qp;
    row.n_trials = trials;
    int total = 0;
    for (int s : survived) total += s;
    row.survived_fraction = static_cast<double>(total) / trials;
    rows.push_back(row);
  }
  return rows;
}

std::vector<BoundaryRow> velocity_boundary(const ExperimentSetup& setup,
                                           const std::vector<double>& vx_grid,
                                           const PolicyParams* policy, double duration) {
  std::vector<BoundaryRow> rows(vx_grid.size());
  parallel_for(static_cast<int>(vx_grid.size()), setup.threads, [&](int i) {
    EnvConfig env_cfg = setup.env;
    env_cfg.episode_length = duration + 1.0;
    env_cfg.cmd_vx_lo = env_cfg.cmd_vx_hi = vx_grid[i];
    env_cfg.cmd_height_lo = env_cfg.cmd_height_hi = setup.model.nominal_height();
    env_cfg.friction_lo = env_cfg.friction_hi = setup.model.mu;
    env_cfg.mass_scale_lo = env_cfg.mass_scale_hi = 1.0;
    env_cfg.init_vx = 0.0;
    env_cfg.init_pitch_rate = 0.0;
    Env env(setup.model, env_cfg, setup.seed, i);
    MpcController ctrl(setup.model, setup.mpc);
    EpisodeOptions opts;
    opts.duration = duration;
    const EpisodeStats stats = run_episode(env, ctrl, policy, setup.ppo, opts);
    BoundaryRow row;
    row.cmd_vx = vx_grid[i];
    row.tracking_err =
        stats.survived ? std::abs(vx_grid[i] - stats.mean_vx_late) : std::abs(vx_grid[i]);
    row.achieved = stats.survived && row.tracking_err < 0.25;
    rows[i] = row;
  });
  return rows;
}

std::vector<PhaseMetricRow> residual_metrics(const std::vector<LogRecord>& log, int bins) {
  if (log.empty()) throw StructuralError("residual_metrics: empty log");
  if (bins < 1) throw StructuralError("residual_metrics: bins must be >= 1");
  std::vector<PhaseMetricRow> rows(bins);
  std::vector<int> ratio_n(bins, 0), cos_n(bins, 0);
  for (int b = 0; b < bins; ++b) rows[b].phase_bin = (b + 0.5) / bins;

  for (const auto& rec : log) {
    int b = static_cast<int>(rec.phase * bins);
    b = std::min(std::max(b, 0), bins - 1);
    PhaseMetricRow& row = rows[b];
    ++row.n_samples;
    const Eigen::Map<const Vec6> tm(rec.tau_mpc);
    const Eigen::Map<const Vec6> tr(rec.tau_res);
    const double nm = tm.norm(), nr = tr.norm();
    if (nm > 0.0) {
      row.ratio_mean += nr / nm;
      ++ratio_n[b];
    }
    if (nm > 0.0 && nr > 0.0) {
      row.cosine_mean += tr.dot(tm) / (nr * nm);
      ++cos_n[b];
    }
    for (int j = 0; j < kNumJoints; ++j) {
      row.tau_mpc_mean[j] += tm[j];
      row.tau_res_mean[j] += tr[j];
    }
  }
  for (int b = 0; b < bins; ++b) {
    PhaseMetricRow& row = rows[b];
    row.ratio_mean = ratio_n[b] > 0 ? row.ratio_mean / ratio_n[b]
                                    : std::numeric_limits<double>::quiet_NaN();
    row.cosine_mean = cos_n[b] > 0 ? row.cosine_mean / cos_n[b]
                                   : std::numeric_limits<double>::quiet_NaN();
    if (row.n_samples > 0)
      for (int j = 0; j < kNumJoints; ++j) {
        row.tau_mpc_mean[j] /= row.n_samples;
        row.tau_res_mean[j] /= row.n_samples;
      }
  }
  return rows;
}

namespace {

struct ControllerEval {
  double survived_fraction = 0.0;
  double tracking_err = 0.0;
  double mean_time_alive = 0.0;
  double mean_distance = 0.0;
};

ControllerEval eval_controller(const ExperimentSetup& setup, const MpcSettings& mpc,
                               const EnvConfig& env_cfg, const PolicyParams* policy, int trials,
                               double duration) {
  std::vector<EpisodeStats> all(trials);
  std::vector<double> start_x(trials, 0.0), end_x(trials, 0.0);
  parallel_for(trials, setup.threads, [&](int trial) {
    Env env(setup.model, env_cfg, setup.seed, trial);
    MpcController ctrl(setup.model, mpc);
    start_x[trial] = env.state().robot.q[0];
    EpisodeOptions opts;
    opts.duration = duration;
    all[trial] = run_episode(env, ctrl, policy, setup.ppo, opts);
    end_x[trial] = env.state().robot.q[0];
  });
  ControllerEval out;
  for (int i = 0; i < trials; ++i) {
    out.survived_fraction += all[i].survived ? 1.0 : 0.0;
    out.tracking_err += all[i].survived
                            ? std::abs(env_cfg.cmd_vx_lo - all[i].mean_vx_late)
                            : std::abs(env_cfg.cmd_vx_lo);
    out.mean_time_alive += all[i].time_alive;
    out.mean_distance += std::abs(end_x[i] - start_x[i]);
  }
  out.survived_fraction /= trials;
  out.tracking_err /= trials;
  out.mean_time_alive /= trials;
  out.mean_distance /= trials;
  return out;
}

}  // namespace

std::vector<GaitStudyRow> gait_study(const ExperimentSetup& setup, const PolicyParams& policy,
                                     int trials, double duration) {
  std::vector<GaitStudyRow> rows;
  const struct {
    const char* name;
    double phase_switch;
  } schedules[3] = {{"nominal", setup.mpc.phase_switch},
                    {"double_stance", 0.65},
                    {"flight", 0.4}};
  for (const auto& sched : schedules) {
    MpcSettings mpc = setup.mpc;
    mpc.phase_switch = sched.phase_switch;
    EnvConfig env_cfg = setup.env;
    env_cfg.phase_switch = sched.phase_switch;
    env_cfg.episode_length = duration + 1.0;
    env_cfg.cmd_vx_lo = env_cfg.cmd_vx_hi = 0.0;
    env_cfg.cmd_height_lo = env_cfg.cmd_height_hi = setup.model.nominal_height();
    env_cfg.friction_lo = env_cfg.friction_hi = setup.model.mu;
    env_cfg.mass_scale_lo = env_cfg.mass_scale_hi = 1.0;
    env_cfg.init_vx = 0.1;
    env_cfg.init_pitch_rate = 0.1;
    for (const bool residual : {false, true}) {
      const ControllerEval ev = eval_controller(setup, mpc, env_cfg, residual ? &policy : nullptr,
                                                trials, duration);
      rows.push_back({sched.name, sched.phase_switch, residual ? "residual" : "mpc",
                      ev.survived_fraction, ev.tracking_err});
    }
  }
  return rows;
}

std::vector<TerrainStudyRow> terrain_study(const ExperimentSetup& setup,
                                           const PolicyParams& policy, int trials,
                                           double duration, double cmd_vx) {
  std::vector<TerrainStudyRow> rows;
  const struct {
    const char* name;
    TerrainConfig::Kind kind;
    double z_swing;
  } cases[3] = {{"flat", TerrainConfig::Kind::kFlat, setup.mpc.z_swing},
                {"heightfield", TerrainConfig::Kind::kHeightfield, setup.mpc.z_swing},
                {"heightfield", TerrainConfig::Kind::kHeightfield, 0.15}};
  for (const auto& tc : cases) {
    MpcSettings mpc = setup.mpc;
    mpc.z_swing = tc.z_swing;  // zero-shot post-training parameter change
    EnvConfig env_cfg = setup.env;
    env_cfg.terrain.kind = tc.kind;
    env_cfg.episode_length = duration + 1.0;
    env_cfg.cmd_vx_lo = env_cfg.cmd_vx_hi = cmd_vx;
    env_cfg.cmd_height_lo = env_cfg.cmd_height_hi = setup.model.nominal_height();
    env_cfg.friction_lo = env_cfg.friction_hi = setup.model.mu;
    env_cfg.mass_scale_lo = env_cfg.mass_scale_hi = 1.0;
    env_cfg.init_vx = 0.0;
    env_cfg.init_pitch_rate = 0.0;
    for (const bool residual : {false, true}) {
      const ControllerEval ev = eval_controller(setup, mpc, env_cfg, residual ? &policy : nullptr,
                                                trials, duration);
      rows.push_back({tc.name, tc.z_swing, residual ? "residual" : "mpc", ev.survived_fraction,
                      ev.mean_time_alive, ev.mean_distance});
    }
  }
  return rows;
}

void write_survival_csv(const std::string& path, const std::vector<SurvivalRow>& rows) {
  std::ofstream os(path);
  if (!os) throw StructuralError("write_survival_csv: cannot open " + path);
  os << "n_qp,n_trials,survived_fraction\n";
  os.precision(12);
  for (const auto& r : rows)
    os << r.n_qp << "," << r.n_trials << "," << r.survived_fraction << "\n";
}

void write_boundary_csv(const std::string& path, const std::vector<BoundaryRow>& rows) {
  std::ofstream os(path);
  if (!os) throw StructuralError("write_boundary_csv: cannot open " + path);
  os << "cmd_vx,tracking_err,achieved\n";
  os.precision(12);
  for (const auto& r : rows)
    os << r.cmd_vx << "," << r.tracking_err << "," << (r.achieved ? 1 : 0) << "\n";
}

void write_phase_metrics_csv(const std::string& path, const std::vector<PhaseMetricRow>& rows) {
  std::ofstream os(path);
  if (!os) throw StructuralError("write_phase_metrics_csv: cannot open " + path);
  os << "phase_bin,n_samples,ratio_mean,cosine_mean";
  for (int j = 0; j < kNumJoints; ++j) os << ",tau_mpc_mean" << j;
  for (int j = 0; j < kNumJoints; ++j) os << ",tau_res_mean" << j;
  os << "\n";
  os.precision(12);
  for (const auto& r : rows) {
    os << r.phase_bin << "," << r.n_samples << ",";
    if (std::isnan(r.ratio_mean)) os << "";
    else os << r.ratio_mean;
    os << ",";
    if (std::isnan(r.cosine_mean)) os << "";
    else os << r.cosine_mean;
    for (double v : r.tau_mpc_mean) os << "," << v;
    for (double v : r.tau_res_mean) os << "," << v;
    os << "\n";
  }
}

void write_gait_study_csv(const std::string& path, const std::vector<GaitStudyRow>& rows) {
  std::ofstream os(path);
  if (!os) throw StructuralError("write_gait_study_csv: cannot open " + path);
  os << "schedule,phase_switch,controller,survived_fraction,tracking_err\n";
  os.precision(12);
  for (const auto& r : rows)
    os << r.schedule << "," << r.phase_switch << "," << r.controller << ","
       << r.survived_fraction << "," << r.tracking_err << "\n";
}

void write_terrain_study_csv(const std::string& path, const std::vector<TerrainStudyRow>& rows) {
  std::ofstream os(path);
  if (!os) throw StructuralError("write_terrain_study_csv: cannot open " + path);
  os << "terrain,z_swing,controller,survived_fraction,mean_time_alive,mean_distance\n";
  os.precision(12);
  for (const auto& r : rows)
    os << r.terrain << "," << r.z_swing << "," << r.controller << "," << r.survived_fraction
       << "," << r.mean_time_alive << "," << r.mean_distance << "\n";
}

void write_manifest(const std::string& out_dir, const std::string& experiment,
                    const Config& cfg, uint64_t seed, int threads) {
  std::filesystem::create_directories(out_dir);
  std::ofstream os(out_dir + "/manifest.txt");
  if (!os) throw StructuralError("write_manifest: cannot open " + out_dir + "/manifest.txt");
  os << "experiment = " << experiment << "\n";
  os << "config_hash = " << cfg.hash() << "\n";
  os << "seed = " << seed << "\n";
  os << "threads = " << threads << "\n";
  os << "version = " << kVersion << "\n";
}

TrainOutputs run_training(const Config& cfg, const std::string& out_dir, uint64_t seed,
                          int threads, int n_iters, int n_envs, bool updates_enabled) {
  std::filesystem::create_directories(out_dir);
  ExperimentSetup setup = setup_from_config(cfg);
  setup.seed = seed;
  if (threads > 0) setup.threads = threads;
  PpoConfig ppo = setup.ppo;
  ppo.updates_enabled = updates_enabled;

  std::vector<Env> envs;
  envs.reserve(n_envs);
  for (int e = 0; e < n_envs; ++e) envs.emplace_back(setup.model, setup.env, seed, e);
  BatchRunner runner(n_envs, setup.model, setup.mpc, setup.threads);
  Trainer trainer(envs, runner, ppo, seed);
  PolicyParams params = init_policy(kObsDim, kActDim, ppo.hidden, seed);

  TrainOutputs out;
  out.log = trainer.train(params, n_iters);
  out.checkpoint_path = out_dir + "/policy.ckpt";
  out.log_path = out_dir + "/training_log.csv";
  save_checkpoint(out.checkpoint_path, params, cfg.hash());
  write_training_log_csv(out.log_path, out.log);
  return out;
}

int run_experiment(const Config& cfg, const std::string& out_dir, uint64_t seed, int threads) {
  const std::string name = cfg.get_str("experiment", "name", "");
  if (name.empty()) throw StructuralError("run_experiment: [experiment] name missing");
  std::filesystem::create_directories(out_dir);
  ExperimentSetup setup = setup_from_config(cfg);
  setup.seed = seed;
  if (threads > 0) setup.threads = threads;

  auto load_policy = [&]() -> PolicyParams {
    const std::string ckpt = cfg.get_str("experiment", "checkpoint", "");
    if (ckpt.empty())
      throw StructuralError("run_experiment: experiment '" + name + "' needs a checkpoint");
    return load_checkpoint(ckpt);
  };

  if (name == "sweep-nqp") {
    std::vector<int> grid;
    std::istringstream gs(cfg.get_str("experiment", "n_qp_grid", "1 5 10 25 50"));
    for (int v; gs >> v;) grid.push_back(v);
    const int trials = cfg.get_int("experiment", "trials", 100);
    const auto rows = sweep_qp_iterations(setup, grid, trials);
    write_survival_csv(out_dir + "/survival.csv", rows);
  } else if (name == "velocity-boundary") {
    std::vector<double> grid;
    std::istringstream gs(cfg.get_str("experiment", "vx_grid", "-0.8 -0.4 0 0.4 0.8"));
    for (double v; gs >> v;) grid.push_back(v);
    const std::string mode = cfg.get_str("experiment", "controller", "mpc");
    PolicyParams policy;
    const bool residual = mode == "residual";
    if (residual) policy = load_policy();
    const auto rows = velocity_boundary(setup, grid, residual ? &policy : nullptr);
    write_boundary_csv(out_dir + "/boundary_" + mode + ".csv", rows);
  } else if (name == "residual-metrics") {
    const std::string log_path = cfg.get_str("experiment", "log", "");
    const auto records = read_traj_log(log_path);
    const auto rows = residual_metrics(records, cfg.get_int("experiment", "bins", 50));
    write_phase_metrics_csv(out_dir + "/phase_metrics.csv", rows);
  } else if (name == "gait-study") {
    const PolicyParams policy = load_policy();
    const auto rows = gait_study(setup, policy, cfg.get_int("experiment", "trials", 10));
    write_gait_study_csv(out_dir + "/gait_study.csv", rows);
  } else if (name == "terrain-study") {
    const PolicyParams policy = load_policy();
    const auto rows =
        terrain_study(setup, policy, cfg.get_int("experiment", "trials", 10), 8.0,
                      cfg.get_double("experiment", "cmd_vx", 0.3));
    write_terrain_study_csv(out_dir + "/terrain_study.csv", rows);
  } else if (name == "benchmark") {
    std::vector<int> sizes;
    std::istringstream gs(cfg.get_str("experiment", "batch_sizes", "1 16 64 256"));
    for (int v; gs >> v;) sizes.push_back(v);
    const int reps = cfg.get_int("experiment", "repetitions", 3);
    const int workers = setup.threads > 0
                            ? setup.threads
                            : static_cast<int>(std::thread::hardware_concurrency());
    const auto rows = benchmark(sizes, reps, setup.model, setup.mpc, workers, seed);
    write_benchmark_csv(out_dir + "/benchmark.csv", rows);
  } else if (name == "train") {
    run_training(cfg, out_dir, seed, threads, cfg.get_int("experiment", "iterations", 300),
                 cfg.get_int("experiment", "n_envs", 32));
  } else {
    throw StructuralError("run_experiment: unknown experiment '" + name + "'");
  }
  write_manifest(out_dir, name, cfg, seed, threads);
  return 0;
}

}  // namespace rmpc
