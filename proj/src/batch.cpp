#include "rmpc/batch.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include "rmpc/rng.hpp"

namespace rmpc {

namespace {
using Clock = std::chrono::steady_clock;
}

BatchRunner::BatchRunner(int n_envs, const ModelParams& model, const MpcSettings& settings,
                         int workers) {
  if (n_envs < 1) throw StructuralError("BatchRunner: n_envs must be >= 1");
  instances_.reserve(n_envs);
  for (int i = 0; i < n_envs; ++i) instances_.emplace_back(model, settings);
  workers_ = workers > 0 ? workers : static_cast<int>(std::thread::hardware_concurrency());
  if (workers_ < 1) workers_ = 1;
}

std::vector<MpcSolution> BatchRunner::solve(const std::vector<RobotState>& states,
                                            const std::vector<MpcCommand>& cmds,
                                            const std::vector<GaitState>& gaits,
                                            const std::vector<MpcSolution>* prev,
                                            const std::vector<int>* order) {
  const int n = size();
  if (static_cast<int>(states.size()) != n || static_cast<int>(cmds.size()) != n ||
      static_cast<int>(gaits.size()) != n)
    throw StructuralError("BatchRunner::solve: input lengths != n_envs");
  if (prev && static_cast<int>(prev->size()) != n)
    throw StructuralError("BatchRunner::solve: prev length != n_envs");

  std::vector<MpcSolution> out(n);
  const auto t0 = Clock::now();

  auto solve_one = [&](int idx) {
    const MpcSolution* warm = prev ? &(*prev)[idx] : nullptr;
    out[idx] = instances_[idx].rti_step(states[idx], cmds[idx], gaits[idx], warm);
  };

  const int nworkers = std::min(workers_, n);
  if (nworkers <= 1) {
    for (int i = 0; i < n; ++i) solve_one(order ? (*order)[i] : i);
  } else {
    std::atomic<int> cursor{0};
    auto worker = [&]() {
      for (;;) {
        const int slot = cursor.fetch_add(1);
        if (slot >= n) break;
        solve_one(order ? (*order)[slot] : slot);
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(nworkers);
    for (int w = 0; w < nworkers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  last_timing_.batch_size = n;
  last_timing_.workers = nworkers;
  last_timing_.total_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  for (int s = 0; s < kNumStages; ++s) {
    double sum = 0.0, sum2 = 0.0;
    for (const auto& sol : out) {
      const double ms = sol.stage_seconds[s] * 1e3;
      sum += ms;
      sum2 += ms * ms;
    }
    const double mean = sum / n;
    last_timing_.mean_ms[s] = mean;
    last_timing_.std_ms[s] = std::sqrt(std::max(0.0, sum2 / n - mean * mean));
  }
  return out;
}

std::vector<BenchmarkRow> benchmark(const std::vector<int>& batch_sizes, int repetitions,
                                    const ModelParams& model, const MpcSettings& settings,
                                    int workers, uint64_t seed) {
  if (repetitions < 1) throw StructuralError("benchmark: repetitions must be >= 1");
  for (int b : batch_sizes)
    if (b < 1) throw StructuralError("benchmark: batch sizes must be >= 1");

  std::vector<BenchmarkRow> rows;
  const Vec9 nominal = nominal_pose(model);

  for (const int b : batch_sizes) {
    std::vector<RobotState> states(b);
    std::vector<MpcCommand> cmds(b);
    std::vector<GaitState> gaits(b);
    Rng rng(seed, static_cast<uint64_t>(b));
    for (int i = 0; i < b; ++i) {
      states[i].q = nominal;
      states[i].qd.setZero();
      states[i].qd[0] = rng.uniform(-0.5, 0.5);
      states[i].qd[2] = rng.uniform(-0.5, 0.5);
      cmds[i].height = model.nominal_height();
      gaits[i] = settings.make_gait();
      gaits[i].phase = rng.uniform();
    }

    for (const int w : {1, workers}) {
      BatchRunner runner(b, model, settings, w);
      std::array<double, kNumStages> acc_mean{}, acc_m2{};
      double total_sum = 0.0, total_sum2 = 0.0;
      for (int rep = 0; rep < repetitions; ++rep) {
        runner.solve(states, cmds, gaits);
        const TimingReport& t = runner.last_timing();
        for (int s = 0; s < kNumStages; ++s) {
          acc_mean[s] += t.mean_ms[s];
          acc_m2[s] += t.mean_ms[s] * t.mean_ms[s];
        }
        total_sum += t.total_ms;
        total_sum2 += t.total_ms * t.total_ms;
      }
      for (int s = 0; s < kNumStages; ++s) {
        const double mean = acc_mean[s] / repetitions;
        rows.push_back({b, w, mpc_stage_name(s), mean,
                        std::sqrt(std::max(0.0, acc_m2[s] / repetitions - mean * mean))});
      }
      const double mean_total = total_sum / repetitions;
      rows.push_back({b, w, "total", mean_total,
                      std::sqrt(std::max(0.0, total_sum2 / repetitions - mean_total * mean_total))});
      if (w == 1 && workers == 1) break;  // avoid a duplicate baseline
    }
  }
  return rows;
}

void write_benchmark_csv(const std::string& path, const std::vector<BenchmarkRow>& rows) {
  std::ofstream os(path);
  if (!os) throw StructuralError("write_benchmark_csv: cannot open " + path);
  os << "batch_size,workers,stage,mean_ms,std_ms\n";
  os.precision(9);
  for (const auto& r : rows)
    os << r.batch_size << "," << r.workers << "," << r.stage << "," << r.mean_ms << ","
       << r.std_ms << "\n";
}

}  // namespace rmpc
