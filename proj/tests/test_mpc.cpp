#include <doctest.h>

#include <Eigen/Dense>
#include <cstring>

#include "rmpc/mpc.hpp"
#include "rmpc/rng.hpp"

using namespace rmpc;

TEST_CASE("advance_phase wraps a full cycle back to the start") {
  GaitState g;
  const GaitState g2 = advance_phase(g, g.period);
  CHECK(g2.phase == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("stance/swing switch at the configured phase") {
  GaitState g;
  g.phase = 0.49;
  g.offsets = {0.0, 0.0, 0.0, 0.0};
  CHECK(g.in_stance(0));
  const GaitState g2 = advance_phase(g, 0.02 * g.period);  // crosses 0.5
  CHECK(!g2.in_stance(0));
}

TEST_CASE("horizon contact flags match a hand-unrolled phase table") {
  GaitState g;  // phase 0, period 0.8, switch 0.5, offsets R=0.5, L=0.0
  const std::vector<double> dts(12, 0.05);
  const auto flags = horizon_contact_flags(g, dts);
  REQUIRE(flags.size() == 12);
  // Per node shift = 0.0625; left contacts stance while 0.0625*i < 0.5.
  for (int i = 0; i < 12; ++i) {
    const bool left_stance = 0.0625 * i < 0.5;
    CHECK(flags[i][2] == left_stance);
    CHECK(flags[i][3] == left_stance);
    CHECK(flags[i][0] == !left_stance);
    CHECK(flags[i][1] == !left_stance);
  }
}

TEST_CASE("standing gait keeps every contact in stance") {
  const GaitState g = GaitState::standing();
  const auto flags = horizon_contact_flags(g, std::vector<double>(12, 0.05));
  for (const auto& node : flags)
    for (bool stance : node) CHECK(stance);
}

TEST_CASE("bezier swing profile satisfies its five boundary conditions") {
  Rng rng(42);
  for (int rep = 0; rep < 50; ++rep) {
    const double z_swing = rng.uniform(0.02, 0.2);
    const double v_to = rng.uniform(-0.5, 0.5);
    const double v_td = rng.uniform(-0.5, 0.5);
    CHECK(std::abs(bezier_swing(0.0, z_swing, v_to, v_td).height) <= 1e-12);
    CHECK(std::abs(bezier_swing(1.0, z_swing, v_to, v_td).height) <= 1e-12);
    CHECK(std::abs(bezier_swing(0.5, z_swing, v_to, v_td).height - z_swing) <= 1e-12);
    CHECK(std::abs(bezier_swing(0.0, z_swing, v_to, v_td).velocity - v_to) <= 1e-12);
    CHECK(std::abs(bezier_swing(1.0, z_swing, v_to, v_td).velocity - v_td) <= 1e-12);
  }
}

TEST_CASE("bezier interior value matches an independent de Casteljau evaluation") {
  const double z_swing = 0.075, v_to = 0.0, v_td = 0.0;
  // Control points solved as in the implementation contract.
  double pts[6] = {0.0, v_to / 5.0, 0.0, 0.0, -v_td / 5.0, 0.0};
  pts[2] = pts[3] = (32.0 * z_swing - 5.0 * (pts[1] + pts[4])) / 20.0;
  const double t = 0.25;
  double work[6];
  std::memcpy(work, pts, sizeof(work));
  for (int level = 1; level < 6; ++level)
    for (int i = 0; i < 6 - level; ++i) work[i] = (1.0 - t) * work[i] + t * work[i + 1];
  CHECK(bezier_swing(t, z_swing, v_to, v_td).height == doctest::Approx(work[0]).epsilon(1e-14));
}

TEST_CASE("bezier clamps its argument to [0, 1]") {
  CHECK(bezier_swing(-0.5, 0.075, 0.2, -0.3).height ==
        bezier_swing(0.0, 0.075, 0.2, -0.3).height);
  CHECK(bezier_swing(1.5, 0.075, 0.2, -0.3).height ==
        bezier_swing(1.0, 0.075, 0.2, -0.3).height);
}

namespace {

RobotState standing_state(const ModelParams& model) {
  RobotState s;
  s.q = nominal_pose(model);
  s.qd.setZero();
  return s;
}

MpcCommand zero_command(const ModelParams& model) {
  MpcCommand cmd;
  cmd.height = model.nominal_height();
  return cmd;
}

DecisionTrajectory standing_guess(const ModelParams& model, const MpcSettings& settings,
                                  const GaitState& gait) {
  DecisionTrajectory z;
  z.resize(settings.horizon);
  const Vec9 nominal = nominal_pose(model);
  const auto flags = horizon_contact_flags(gait, settings.dt_schedule);
  const double weight = model.total_mass() * model.gravity;
  for (int i = 0; i < settings.horizon; ++i) {
    z.q.row(i) = nominal.transpose();
    int active = 0;
    for (bool st : flags[i]) active += st ? 1 : 0;
    for (int c = 0; c < kNumContacts; ++c)
      if (flags[i][c] && active > 0) z.F(i, 2 * c + 1) = weight / active;
  }
  return z;
}

}  // namespace

TEST_CASE("desired trajectory: standing with zero command") {
  ModelParams model;
  MpcSettings settings;
  const GaitState gait = GaitState::standing();
  const RobotState state = standing_state(model);
  const MpcCommand cmd = zero_command(model);
  const MpcReference ref = desired_trajectory(state, cmd, gait, settings, model);
  const double fz = model.total_mass() * model.gravity / 4.0;
  for (int i = 0; i < settings.horizon; ++i) {
    CHECK(ref.q_des(i, 1) == cmd.height);
    CHECK(ref.q_des(i, 2) == 0.0);
    CHECK(ref.qd_des.row(i).lpNorm<Eigen::Infinity>() == 0.0);
    for (int c = 0; c < kNumContacts; ++c) {
      CHECK(ref.F_des(i, 2 * c) == 0.0);
      CHECK(ref.F_des(i, 2 * c + 1) == doctest::Approx(fz));
    }
  }
}

TEST_CASE("desired trajectory: velocity command fills every node") {
  ModelParams model;
  MpcSettings settings;
  MpcCommand cmd = zero_command(model);
  cmd.vx = 1.0;
  const MpcReference ref =
      desired_trajectory(standing_state(model), cmd, GaitState::standing(), settings, model);
  for (int i = 0; i < settings.horizon; ++i) CHECK(ref.qd_des(i, 0) == 1.0);
}

TEST_CASE("desired trajectory: single-stance nodes get weight/2 per point") {
  ModelParams model;
  MpcSettings settings;
  GaitState gait;  // switch 0.5
  gait.phase = 0.25;  // left foot in stance, right in swing
  const MpcReference ref = desired_trajectory(standing_state(model), zero_command(model), gait,
                                              settings, model);
  const double fz2 = model.total_mass() * model.gravity / 2.0;
  CHECK(ref.stance[0][2]);
  CHECK(!ref.stance[0][0]);
  CHECK(ref.F_des(0, 2 * 2 + 1) == doctest::Approx(fz2));
  CHECK(ref.F_des(0, 2 * 0 + 1) == 0.0);
}

TEST_CASE("build_qp: constraint count matches the hand count for T = 3") {
  ModelParams model;
  MpcSettings settings;
  settings.horizon = 3;
  settings.dt_schedule.assign(3, 0.05);
  const GaitState gait = GaitState::standing();
  const RobotState state = standing_state(model);
  const MpcReference ref =
      desired_trajectory(state, zero_command(model), gait, settings, model);
  const DecisionTrajectory guess = standing_guess(model, settings, gait);
  const QpProblem prob = build_qp(state, guess, ref, settings, model);

  // initial state 18; integration 9 per interval; dynamics 3 per interval;
  // stance contacts 4 rows x 4 points per node; joint boxes 12 per node.
  const int expected = 18 + 2 * 9 + 2 * 3 + 3 * (4 * 4) + 3 * 12;
  CHECK(prob.num_cons() == expected);
  CHECK(prob.num_vars() == 3 * kVarsPerNode);
}

TEST_CASE("build_qp: friction rows encode the planar cone at the guess") {
  ModelParams model;
  MpcSettings settings;
  settings.horizon = 2;
  settings.dt_schedule.assign(2, 0.05);
  const GaitState gait = GaitState::standing();
  const RobotState state = standing_state(model);
  const MpcReference ref =
      desired_trajectory(state, zero_command(model), gait, settings, model);
  const DecisionTrajectory guess = standing_guess(model, settings, gait);
  const QpProblem prob = build_qp(state, guess, ref, settings, model);

  const double fz = model.total_mass() * model.gravity / 4.0;
  // First contact block starts after initial state (18) + integration (9) +
  // dynamics (3) rows.
  const int row0 = 18 + 9 + 3;
  const Mat A = prob.A.to_dense();
  const int fx_col = 2 * kNq + 0;  // node 0, contact 0, F_x
  const int fz_col = 2 * kNq + 1;
  CHECK(A(row0, fx_col) == 1.0);
  CHECK(A(row0, fz_col) == -settings.mu);
  CHECK(prob.lo[row0] == -kInf);
  CHECK(prob.hi[row0] == doctest::Approx(settings.mu * fz));
  CHECK(A(row0 + 1, fx_col) == -1.0);
  CHECK(A(row0 + 1, fz_col) == -settings.mu);
  CHECK(prob.hi[row0 + 1] == doctest::Approx(settings.mu * fz));
}

TEST_CASE("build_qp: equilibrium standing guess is a fixed point") {
  ModelParams model;
  MpcSettings settings;
  const GaitState gait = GaitState::standing();
  const RobotState state = standing_state(model);
  const MpcReference ref =
      desired_trajectory(state, zero_command(model), gait, settings, model);
  const DecisionTrajectory guess = standing_guess(model, settings, gait);
  const QpProblem prob = build_qp(state, guess, ref, settings, model);
  const QpSolution sol = admm_solve(prob, settings.admm());
  CHECK(sol.x.lpNorm<Eigen::Infinity>() <= 1e-3);
}

TEST_CASE("build_qp: rejects bad guesses") {
  ModelParams model;
  MpcSettings settings;
  const GaitState gait = GaitState::standing();
  const RobotState state = standing_state(model);
  const MpcReference ref =
      desired_trajectory(state, zero_command(model), gait, settings, model);
  DecisionTrajectory guess = standing_guess(model, settings, gait);
  guess.q.resize(settings.horizon - 1, kNq);
  CHECK_THROWS_AS(build_qp(state, guess, ref, settings, model), StructuralError);

  DecisionTrajectory nan_guess = standing_guess(model, settings, gait);
  nan_guess.qd(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(build_qp(state, nan_guess, ref, settings, model), StructuralError);
}

TEST_CASE("rti_step: standing equilibrium produces weight-sharing forces") {
  ModelParams model;
  MpcSettings settings;
  MpcController ctrl(model, settings);
  const RobotState state = standing_state(model);
  const MpcSolution sol =
      ctrl.rti_step(state, zero_command(model), GaitState::standing());
  REQUIRE(sol.status == MpcStatus::kOk);
  CHECK(sol.delta_inf_norm <= 1e-3);

  const double fz_expect = model.total_mass() * model.gravity / 4.0;
  for (int c = 0; c < kNumContacts; ++c) {
    CHECK(sol.z_star.F(0, 2 * c + 1) == doctest::Approx(fz_expect).epsilon(0.10));
  }

  // Feedforward within 5% of the static gravity-compensation torques.
  Eigen::Matrix<double, kContactDim, 1> F_eq = Eigen::Matrix<double, kContactDim, 1>::Zero();
  for (int c = 0; c < kNumContacts; ++c) F_eq[2 * c + 1] = fz_expect;
  const Vec6 tau_static =
      inverse_dynamics_torque(model, state.q, Vec9::Zero(), Vec9::Zero(), F_eq).tau;
  for (int j = 0; j < kNumJoints; ++j) {
    const double scale = std::max(std::abs(tau_static[j]), 0.5);
    CHECK(std::abs(sol.tau_ff[j] - tau_static[j]) <= 0.05 * scale);
  }
}

TEST_CASE("rti_step: velocity command pulls the planned speed toward it") {
  ModelParams model;
  MpcSettings settings;
  MpcController ctrl(model, settings);
  MpcCommand cmd = zero_command(model);
  cmd.vx = 0.5;
  GaitState gait;
  const MpcSolution sol = ctrl.rti_step(standing_state(model), cmd, gait);
  REQUIRE(sol.status == MpcStatus::kOk);
  const double v_first = sol.z_star.qd(1, 0);
  const double v_last = sol.z_star.qd(settings.horizon - 1, 0);
  CHECK(v_last > v_first);
  CHECK(v_last > 0.25);  // most of the way to the command by the horizon end
}

TEST_CASE("rti_step: swing-foot heights track the bezier profile") {
  ModelParams model;
  MpcSettings settings;
  MpcController ctrl(model, settings);
  GaitState gait;
  gait.phase = 0.6;  // left foot mid-swing
  const RobotState state = standing_state(model);
  const MpcSolution sol = ctrl.rti_step(state, zero_command(model), gait);
  REQUIRE(sol.status == MpcStatus::kOk);
  const MpcReference ref = desired_trajectory(state, zero_command(model), gait, settings, model);
  int checked = 0;
  for (int i = 0; i < settings.horizon; ++i) {
    const ContactSet cs =
        contact_kinematics(model, sol.z_star.q.row(i).transpose(), Vec9::Zero());
    for (int c = 0; c < kNumContacts; ++c) {
      if (ref.stance[i][c]) continue;
      CHECK(std::abs(cs.pos[c][1] - ref.swing_height[i][c]) <= 1e-3);
      ++checked;
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("rti_step: equality and inequality rows hold at the solution") {
  ModelParams model;
  MpcSettings settings;
  const GaitState gait = GaitState::standing();
  const RobotState state = standing_state(model);
  const MpcReference ref =
      desired_trajectory(state, zero_command(model), gait, settings, model);
  const DecisionTrajectory guess = standing_guess(model, settings, gait);
  const QpProblem prob = build_qp(state, guess, ref, settings, model);
  const QpSolution sol = admm_solve(prob, settings.admm());
  Vec ax(prob.num_cons());
  csc_gemv(prob.A, sol.x, ax);
  for (int i = 0; i < prob.num_cons(); ++i) {
    if (prob.lo[i] == prob.hi[i]) {
      CHECK(std::abs(ax[i] - prob.lo[i]) <= 1e-3);
    } else {
      CHECK(ax[i] >= prob.lo[i] - 1e-4);
      CHECK(ax[i] <= prob.hi[i] + 1e-4);
    }
  }
}

TEST_CASE("rti_step: deterministic bit-identical resolves") {
  ModelParams model;
  MpcSettings settings;
  Rng rng(99);
  RobotState state = standing_state(model);
  for (int i = 0; i < kNq; ++i) state.qd[i] = 0.1 * rng.normal();
  GaitState gait;
  gait.phase = 0.37;
  MpcCommand cmd = zero_command(model);
  cmd.vx = 0.3;

  MpcController a(model, settings), b(model, settings);
  const MpcSolution sa = a.rti_step(state, cmd, gait);
  const MpcSolution sb = b.rti_step(state, cmd, gait);
  REQUIRE(sa.status == MpcStatus::kOk);
  CHECK(std::memcmp(sa.z_star.q.data(), sb.z_star.q.data(), sizeof(double) * sa.z_star.q.size()) == 0);
  CHECK(std::memcmp(sa.z_star.qd.data(), sb.z_star.qd.data(), sizeof(double) * sa.z_star.qd.size()) == 0);
  CHECK(std::memcmp(sa.z_star.F.data(), sb.z_star.F.data(), sizeof(double) * sa.z_star.F.size()) == 0);
  CHECK(sa.tau_ff == sb.tau_ff);
  CHECK(sa.v_mpc == sb.v_mpc);
}

TEST_CASE("rti_step: non-finite state fails cleanly") {
  ModelParams model;
  MpcSettings settings;
  MpcController ctrl(model, settings);
  RobotState state = standing_state(model);
  state.q[3] = std::numeric_limits<double>::quiet_NaN();
  const MpcSolution sol = ctrl.rti_step(state, zero_command(model), GaitState::standing());
  CHECK(sol.status == MpcStatus::kFailed);
  CHECK(!sol.message.empty());
  CHECK_THROWS_AS(mpc_torque(sol, state, model), StructuralError);
}

TEST_CASE("rti_step: warm start from the previous solution is available") {
  ModelParams model;
  MpcSettings settings;
  settings.warm_start = true;
  MpcController ctrl(model, settings);
  const RobotState state = standing_state(model);
  const MpcCommand cmd = zero_command(model);
  const GaitState gait = GaitState::standing();
  const MpcSolution first = ctrl.rti_step(state, cmd, gait);
  REQUIRE(first.status == MpcStatus::kOk);
  const MpcSolution second = ctrl.rti_step(state, cmd, gait, &first);
  REQUIRE(second.status == MpcStatus::kOk);
  CHECK(second.delta_inf_norm <= 1e-3);
}

TEST_CASE("mpc stage names cover the pipeline") {
  CHECK(std::string(mpc_stage_name(kStageInitGuess)) == "init_guess");
  CHECK(std::string(mpc_stage_name(kStageRnea)) == "rnea");
}
