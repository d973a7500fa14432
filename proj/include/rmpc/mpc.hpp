#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rmpc/gait.hpp"
#include "rmpc/qp.hpp"
#include "rmpc/robot.hpp"
#include "rmpc/types.hpp"

namespace rmpc {

inline constexpr int kVarsPerNode = kNq + kNq + kContactDim;  // (dq, dqd, dF)

struct MpcSettings {
  int horizon = 12;
  std::vector<double> dt_schedule = std::vector<double>(12, 0.05);

  // Diagonal tracking weights over z = (q, qd, F). Base-x weight stays zero.
  Vec9 w_q = (Vec9() << 0.0, 500.0, 300.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0).finished();
  Vec9 w_qd = (Vec9() << 100.0, 100.0, 50.0, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1).finished();
  Eigen::Matrix<double, kContactDim, 1> w_f =
      Eigen::Matrix<double, kContactDim, 1>::Constant(1e-3);

  double gait_period = 0.8;
  double phase_switch = 0.5;
  std::array<double, kNumContacts> phase_offsets = {0.5, 0.5, 0.0, 0.0};

  double z_swing = 0.075;
  double v_to = 0.2;
  double v_td = -0.3;

  int n_qp = 25;
  double mu = 0.6;
  double sigma = 1e-6;
  double rho = 0.1;
  double over_relax = 1.6;

  bool warm_start = false;  // cold nominal-pose guess by default

  GaitState make_gait() const {
    GaitState g;
    g.period = gait_period;
    g.phase_switch = phase_switch;
    g.offsets = phase_offsets;
    return g;
  }
  AdmmSettings admm() const {
    AdmmSettings s;
    s.sigma = sigma;
    s.rho = rho;
    s.over_relax = over_relax;
    s.n_iters = n_qp;
    return s;
  }
};

struct MpcCommand {
  double height = 1.0;   // c_h
  double vx = 0.0;       // c_vx
  double wpitch = 0.0;   // pitch-rate command slot, 0 in the planar gait
};

struct DecisionTrajectory {
  Mat q;   // T x 9
  Mat qd;  // T x 9
  Mat F;   // T x 8

  void resize(int T) {
    q.setZero(T, kNq);
    qd.setZero(T, kNq);
    F.setZero(T, kContactDim);
  }
};

/// Output of the parameter update: tracking targets, contact flags and swing
/// height targets over the horizon.
struct MpcReference {
  Mat q_des, qd_des, F_des;
  std::vector<std::array<bool, kNumContacts>> stance;
  std::vector<std::array<double, kNumContacts>> swing_height;
};

enum class MpcStatus { kOk, kFailed };

// Stage indices of MpcSolution::stage_seconds.
enum MpcStage {
  kStageInitGuess = 0,
  kStageParam,
  kStageKktBuild,
  kStageRuiz,
  kStageFactorize,
  kStageAdmmIters,
  kStageRnea,
  kNumStages
};
const char* mpc_stage_name(int stage);

struct MpcSolution {
  MpcStatus status = MpcStatus::kFailed;
  std::string message;

  DecisionTrajectory z_star;
  Vec6 tau_ff = Vec6::Zero();
  Vec6 q_set = Vec6::Zero();
  Vec6 qd_set = Vec6::Zero();
  double v_mpc = 0.0;  // QP objective at the solution step

  double prim_res = 0.0;
  double dual_res = 0.0;
  double delta_inf_norm = 0.0;  // ||dz||_inf of the accepted step
  Vec3 base_residual = Vec3::Zero();

  std::array<double, kNumStages> stage_seconds{};
};

/// Tracking targets from the command extrapolation heuristic: height = c_h,
/// forward velocity = c_vx, pitch targets zero, joints at the nominal pose,
/// stance vertical force = weight / active contacts, everything else zero.
MpcReference desired_trajectory(const RobotState& state, const MpcCommand& cmd,
                                const GaitState& gait, const MpcSettings& settings,
                                const ModelParams& model);

/// Linearizes the trajectory optimization at z_guess into a sparse QP over
/// stacked per-node deltas (dq, dqd, dF). Constraint rows are ordered:
/// initial state; per-interval position integration and base dynamics; per
/// node contact rows (stance: friction cone pair + contact velocity; swing:
/// zero force + swing height); per node joint position and velocity boxes.
QpProblem build_qp(const RobotState& state, const DecisionTrajectory& z_guess,
                   const MpcReference& ref, const MpcSettings& settings,
                   const ModelParams& model);

/// Single real-time-iteration MPC step: initial guess, parameter update, QP
/// build, equilibrate, factorize once, a fixed budget of ADMM iterations,
/// full step (alpha = 1), then inverse dynamics at node 0.
class MpcController {
 public:
  MpcController(const ModelParams& model, const MpcSettings& settings);

  MpcSolution rti_step(const RobotState& state, const MpcCommand& cmd, const GaitState& gait,
                       const MpcSolution* prev = nullptr);

  const ModelParams& model() const { return model_; }
  const MpcSettings& settings() const { return settings_; }

 private:
  ModelParams model_;
  MpcSettings settings_;
  Vec9 nominal_;
  DecisionTrajectory guess_;
  QpProblem prob_;
};

/// PD + feedforward torque from a successful solution (throws on failed).
Vec6 mpc_torque(const MpcSolution& solution, const RobotState& state, const ModelParams& model);

}  // namespace rmpc
