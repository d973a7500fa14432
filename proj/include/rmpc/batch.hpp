#pragma once

#include <string>
#include <vector>

#include "rmpc/mpc.hpp"
#include "rmpc/types.hpp"

namespace rmpc {

/// Per-stage wall-time statistics aggregated over one batch solve.
struct TimingReport {
  int batch_size = 0;
  int workers = 0;
  std::array<double, kNumStages> mean_ms{};
  std::array<double, kNumStages> std_ms{};
  double total_ms = 0.0;  // wall time for the whole tick
};

/// Data-parallel evaluation of independent MPC instances. Each instance owns
/// its controller workspace; parallelism only distributes whole instances, so
/// results are bit-identical to a serial loop regardless of worker count or
/// scheduling order.
class BatchRunner {
 public:
  BatchRunner(int n_envs, const ModelParams& model, const MpcSettings& settings,
              int workers = 0);  // workers <= 0: hardware concurrency

  /// Solves instance i from states[i]/cmds[i]/gaits[i]. Per-instance failures
  /// are reported in each solution's status and never abort the batch.
  /// `order` optionally permutes the processing sequence (tests).
  std::vector<MpcSolution> solve(const std::vector<RobotState>& states,
                                 const std::vector<MpcCommand>& cmds,
                                 const std::vector<GaitState>& gaits,
                                 const std::vector<MpcSolution>* prev = nullptr,
                                 const std::vector<int>* order = nullptr);

  int size() const { return static_cast<int>(instances_.size()); }
  int workers() const { return workers_; }
  const TimingReport& last_timing() const { return last_timing_; }

 private:
  std::vector<MpcController> instances_;
  int workers_ = 1;
  TimingReport last_timing_;
};

struct BenchmarkRow {
  int batch_size;
  int workers;
  std::string stage;
  double mean_ms;
  double std_ms;
};

/// Times every pipeline stage across batch sizes, including a single-worker
/// baseline so parallel speedup can be computed. Rows additionally include a
/// "total" pseudo-stage with the tick wall time.
std::vector<BenchmarkRow> benchmark(const std::vector<int>& batch_sizes, int repetitions,
                                    const ModelParams& model, const MpcSettings& settings,
                                    int workers, uint64_t seed = 0);

void write_benchmark_csv(const std::string& path, const std::vector<BenchmarkRow>& rows);

}  // namespace rmpc
