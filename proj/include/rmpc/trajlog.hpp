#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rmpc/robot.hpp"
#include "rmpc/types.hpp"

namespace rmpc {

// Flag bits of LogRecord::flags.
enum LogFlags : uint32_t {
  kLogDone = 1u << 0,
  kLogSelfCollision = 1u << 1,
  kLogMpcFailed = 1u << 2,
};

/// One control tick of a rollout.
struct LogRecord {
  double time = 0.0;
  double q[kNq] = {};
  double qd[kNq] = {};
  double tau_mpc[kNumJoints] = {};
  double tau_res[kNumJoints] = {};
  double f_contact[kContactDim] = {};
  double phase = 0.0;   // global gait phase
  double v_mpc = 0.0;
  double reward_total = 0.0;
  double reward_terms[10] = {};
  uint32_t flags = 0;
  uint32_t pad = 0;
};

/// Binary trajectory log, versioned with a magic header.
class TrajLogWriter {
 public:
  explicit TrajLogWriter(const std::string& path);
  ~TrajLogWriter();
  void append(const LogRecord& rec);
  void close();

 private:
  void* os_ = nullptr;
};

std::vector<LogRecord> read_traj_log(const std::string& path);

void export_traj_csv(const std::string& csv_path, const std::vector<LogRecord>& records);

}  // namespace rmpc
