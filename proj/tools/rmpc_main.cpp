#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <sstream>
#include <thread>

#include "rmpc/analysis.hpp"
#include "rmpc/config.hpp"

namespace {

rmpc::Config load_config(const std::string& path) {
  if (path.empty()) return rmpc::Config();
  return rmpc::Config::from_file(path);
}

std::vector<double> parse_doubles(const std::string& csv) {
  std::vector<double> out;
  std::istringstream is(csv);
  std::string tok;
  while (std::getline(is, tok, ',')) out.push_back(std::stod(tok));
  return out;
}

std::vector<int> parse_ints(const std::string& csv) {
  std::vector<int> out;
  std::istringstream is(csv);
  std::string tok;
  while (std::getline(is, tok, ',')) out.push_back(std::stoi(tok));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Residual-MPC locomotion stack: batched ADMM MPC, penalty-contact "
               "simulation, residual policy training and analysis"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  uint64_t seed = 0;
  int threads = 0;
  app.add_option("--config", config_path, "shared config file (INI sections)");
  app.add_option("--out-dir", out_dir, "output directory");
  app.add_option("--seed", seed, "experiment seed");
  app.add_option("--threads", threads, "worker count (0 = hardware)");

  auto* run = app.add_subcommand("run", "run an experiment described by a config file");
  std::string run_cfg;
  run->add_option("config", run_cfg, "experiment config file")->required();

  auto* sweep = app.add_subcommand("sweep-nqp", "survival rate vs QP iteration budget");
  std::string nqp_grid = "1,5,10,25,50";
  int sweep_trials = 100;
  sweep->add_option("--grid", nqp_grid, "comma-separated N_QP values");
  sweep->add_option("--trials", sweep_trials, "trials per setting");

  auto* vb = app.add_subcommand("velocity-boundary", "achieved command set per controller");
  std::string vb_grid = "-0.8,-0.6,-0.4,-0.2,0,0.2,0.4,0.6,0.8";
  std::string vb_controller = "mpc";
  std::string vb_ckpt;
  vb->add_option("--grid", vb_grid, "comma-separated vx commands");
  vb->add_option("--controller", vb_controller, "mpc | residual");
  vb->add_option("--checkpoint", vb_ckpt, "policy checkpoint (residual mode)");

  auto* rm = app.add_subcommand("residual-metrics", "phase-binned residual/MPC torque metrics");
  std::string rm_log;
  int rm_bins = 50;
  rm->add_option("log", rm_log, "binary trajectory log")->required();
  rm->add_option("--bins", rm_bins, "phase bins");

  auto* gait = app.add_subcommand("gait-study", "modified contact schedules, MPC vs residual");
  std::string gait_ckpt;
  int gait_trials = 10;
  gait->add_option("--checkpoint", gait_ckpt, "policy checkpoint")->required();
  gait->add_option("--trials", gait_trials, "trials per case");

  auto* terr = app.add_subcommand("terrain-study", "heightfield + swing-height retune study");
  std::string terr_ckpt;
  int terr_trials = 10;
  double terr_vx = 0.3;
  terr->add_option("--checkpoint", terr_ckpt, "policy checkpoint")->required();
  terr->add_option("--trials", terr_trials, "trials per case");
  terr->add_option("--cmd-vx", terr_vx, "forward command during the study");

  auto* bench = app.add_subcommand("benchmark", "per-stage timing across batch sizes");
  std::string bench_sizes = "1,16,64,256";
  int bench_reps = 3;
  bench->add_option("--batch-sizes", bench_sizes, "comma-separated batch sizes");
  bench->add_option("--repetitions", bench_reps, "repetitions per size");

  auto* train = app.add_subcommand("train", "train the residual policy");
  int train_iters = 300;
  int train_envs = 32;
  bool train_baseline = false;
  train->add_option("--iterations", train_iters, "PPO iterations");
  train->add_option("--envs", train_envs, "parallel environments");
  train->add_flag("--baseline", train_baseline, "fixed-prior run (no updates)");

  auto* expcsv = app.add_subcommand("export-csv", "convert a binary trajectory log to CSV");
  std::string expcsv_log, expcsv_out;
  expcsv->add_option("log", expcsv_log, "binary trajectory log")->required();
  expcsv->add_option("csv", expcsv_out, "output CSV path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    std::filesystem::create_directories(out_dir);
    rmpc::Config cfg = load_config(config_path);

    if (run->parsed()) {
      rmpc::Config ecfg = rmpc::Config::from_file(run_cfg);
      return rmpc::run_experiment(ecfg, out_dir, seed, threads);
    }

    rmpc::ExperimentSetup setup = rmpc::setup_from_config(cfg);
    setup.seed = seed;
    if (threads > 0) setup.threads = threads;

    if (sweep->parsed()) {
      const auto rows =
          rmpc::sweep_qp_iterations(setup, parse_ints(nqp_grid), sweep_trials);
      rmpc::write_survival_csv(out_dir + "/survival.csv", rows);
      rmpc::write_manifest(out_dir, "sweep-nqp", cfg, seed, threads);
      for (const auto& r : rows)
        std::printf("n_qp=%d survival=%.3f (%d trials)\n", r.n_qp, r.survived_fraction,
                    r.n_trials);
    } else if (vb->parsed()) {
      rmpc::PolicyParams policy;
      const bool residual = vb_controller == "residual";
      if (residual) policy = rmpc::load_checkpoint(vb_ckpt);
      const auto rows = rmpc::velocity_boundary(setup, parse_doubles(vb_grid),
                                                residual ? &policy : nullptr);
      rmpc::write_boundary_csv(out_dir + "/boundary_" + vb_controller + ".csv", rows);
      rmpc::write_manifest(out_dir, "velocity-boundary", cfg, seed, threads);
      for (const auto& r : rows)
        std::printf("vx=%+.2f err=%.3f %s\n", r.cmd_vx, r.tracking_err,
                    r.achieved ? "achieved" : "-");
    } else if (rm->parsed()) {
      const auto rows = rmpc::residual_metrics(rmpc::read_traj_log(rm_log), rm_bins);
      rmpc::write_phase_metrics_csv(out_dir + "/phase_metrics.csv", rows);
      rmpc::write_manifest(out_dir, "residual-metrics", cfg, seed, threads);
    } else if (gait->parsed()) {
      const auto policy = rmpc::load_checkpoint(gait_ckpt);
      const auto rows = rmpc::gait_study(setup, policy, gait_trials);
      rmpc::write_gait_study_csv(out_dir + "/gait_study.csv", rows);
      rmpc::write_manifest(out_dir, "gait-study", cfg, seed, threads);
    } else if (terr->parsed()) {
      const auto policy = rmpc::load_checkpoint(terr_ckpt);
      const auto rows = rmpc::terrain_study(setup, policy, terr_trials, 8.0, terr_vx);
      rmpc::write_terrain_study_csv(out_dir + "/terrain_study.csv", rows);
      rmpc::write_manifest(out_dir, "terrain-study", cfg, seed, threads);
    } else if (bench->parsed()) {
      const int workers = threads > 0
                              ? threads
                              : static_cast<int>(std::thread::hardware_concurrency());
      const auto rows = rmpc::benchmark(parse_ints(bench_sizes), bench_reps, setup.model,
                                        setup.mpc, workers, seed);
      rmpc::write_benchmark_csv(out_dir + "/benchmark.csv", rows);
      rmpc::write_manifest(out_dir, "benchmark", cfg, seed, threads);
    } else if (train->parsed()) {
      const auto out = rmpc::run_training(cfg, out_dir, seed, threads, train_iters, train_envs,
                                          !train_baseline);
      rmpc::write_manifest(out_dir, "train", cfg, seed, threads);
      std::printf("checkpoint: %s\nlog: %s\n", out.checkpoint_path.c_str(),
                  out.log_path.c_str());
      if (!out.log.empty())
        std::printf("first/last mean reward: %.3f / %.3f\n", out.log.front().mean_reward,
                    out.log.back().mean_reward);
    } else if (expcsv->parsed()) {
      rmpc::export_traj_csv(expcsv_out, rmpc::read_traj_log(expcsv_log));
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
