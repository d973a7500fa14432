#include "rmpc/mpc.hpp"

#include <chrono>
#include <cmath>

namespace rmpc {

namespace {
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int active_contacts(const std::array<bool, kNumContacts>& stance) {
  int n = 0;
  for (bool s : stance) n += s ? 1 : 0;
  return n;
}
}  // namespace

const char* mpc_stage_name(int stage) {
  static const char* names[kNumStages] = {"init_guess", "param",     "kkt_build", "ruiz",
                                          "factorize",  "admm_iters", "rnea"};
  return (stage >= 0 && stage < kNumStages) ? names[stage] : "unknown";
}

MpcReference desired_trajectory(const RobotState& state, const MpcCommand& cmd,
                                const GaitState& gait, const MpcSettings& settings,
                                const ModelParams& model) {
  (void)state;
  const int T = settings.horizon;
  MpcReference ref;
  ref.q_des.setZero(T, kNq);
  ref.qd_des.setZero(T, kNq);
  ref.F_des.setZero(T, kContactDim);
  ref.stance = horizon_contact_flags(gait, settings.dt_schedule);
  const auto swing_t = horizon_swing_times(gait, settings.dt_schedule);
  ref.swing_height.resize(T);

  const Vec9 nominal = nominal_pose(model);
  const double weight = model.total_mass() * model.gravity;
  for (int i = 0; i < T; ++i) {
    ref.q_des.row(i) = nominal.transpose();
    ref.q_des(i, 0) = 0.0;  // base x carries zero weight and stays untracked
    ref.q_des(i, 1) = cmd.height;
    ref.q_des(i, 2) = 0.0;
    ref.qd_des(i, 0) = cmd.vx;
    ref.qd_des(i, 2) = cmd.wpitch;
    const int n_active = active_contacts(ref.stance[i]);
    for (int c = 0; c < kNumContacts; ++c) {
      if (ref.stance[i][c]) {
        ref.F_des(i, 2 * c + 1) = n_active > 0 ? weight / n_active : 0.0;
        ref.swing_height[i][c] = 0.0;
      } else {
        ref.swing_height[i][c] =
            bezier_swing(swing_t[i][c], settings.z_swing, settings.v_to, settings.v_td).height;
      }
    }
  }
  return ref;
}

QpProblem build_qp(const RobotState& state, const DecisionTrajectory& z_guess,
                   const MpcReference& ref, const MpcSettings& settings,
                   const ModelParams& model) {
  const int T = settings.horizon;
  if (z_guess.q.rows() != T || z_guess.qd.rows() != T || z_guess.F.rows() != T)
    throw StructuralError("build_qp: guess shape mismatch");
  if (!z_guess.q.allFinite() || !z_guess.qd.allFinite() || !z_guess.F.allFinite() ||
      !state.q.allFinite() || !state.qd.allFinite())
    throw StructuralError("build_qp: non-finite linearization point");

  const int n = T * kVarsPerNode;
  auto var_q = [](int i, int k) { return i * kVarsPerNode + k; };
  auto var_qd = [](int i, int k) { return i * kVarsPerNode + kNq + k; };
  auto var_f = [](int i, int k) { return i * kVarsPerNode + 2 * kNq + k; };

  QpProblem prob;

  // Cost: P = blockdiag(Q_z * dt_i), q_lin = Q_z * dt_i * (z_guess - z_des).
  {
    std::vector<Triplet> pts;
    pts.reserve(n);
    prob.q_lin.setZero(n);
    for (int i = 0; i < T; ++i) {
      const double dt = settings.dt_schedule[i];
      for (int k = 0; k < kNq; ++k) {
        const double wq = settings.w_q[k] * dt;
        const double wqd = settings.w_qd[k] * dt;
        pts.push_back({var_q(i, k), var_q(i, k), wq});
        pts.push_back({var_qd(i, k), var_qd(i, k), wqd});
        prob.q_lin[var_q(i, k)] = wq * (z_guess.q(i, k) - ref.q_des(i, k));
        prob.q_lin[var_qd(i, k)] = wqd * (z_guess.qd(i, k) - ref.qd_des(i, k));
      }
      for (int k = 0; k < kContactDim; ++k) {
        const double wf = settings.w_f[k] * dt;
        pts.push_back({var_f(i, k), var_f(i, k), wf});
        prob.q_lin[var_f(i, k)] = wf * (z_guess.F(i, k) - ref.F_des(i, k));
      }
    }
    prob.P = csc_from_triplets(pts, n, n);
  }

  // Per-node dynamics quantities at the linearization point.
  std::vector<Eigen::Matrix<double, 3, kNq>> Mb(T);
  std::vector<Vec3> hb(T);
  std::vector<ContactSet> contacts(T);
  for (int i = 0; i < T; ++i) {
    const Kinematics kin =
        compute_kinematics(model, z_guess.q.row(i).transpose(), z_guess.qd.row(i).transpose());
    Mb[i] = mass_matrix(model, kin).topRows<3>();
    hb[i] = bias_forces(model, kin).head<3>();
    contacts[i] = kin.contacts;
  }

  std::vector<Triplet> ats;
  std::vector<double> lo, hi;
  int row = 0;
  auto push_bound = [&](double l, double h) {
    lo.push_back(l);
    hi.push_back(h);
    ++row;
  };

  // Initial state equality.
  for (int k = 0; k < kNq; ++k) {
    ats.push_back({row, var_q(0, k), 1.0});
    const double r = state.q[k] - z_guess.q(0, k);
    push_bound(r, r);
  }
  for (int k = 0; k < kNq; ++k) {
    ats.push_back({row, var_qd(0, k), 1.0});
    const double r = state.qd[k] - z_guess.qd(0, k);
    push_bound(r, r);
  }

  // Semi-implicit position integration: q_{i+1} = q_i + dt qd_{i+1}.
  for (int i = 0; i + 1 < T; ++i) {
    const double dt = settings.dt_schedule[i];
    for (int k = 0; k < kNq; ++k) {
      ats.push_back({row, var_q(i + 1, k), 1.0});
      ats.push_back({row, var_q(i, k), -1.0});
      ats.push_back({row, var_qd(i + 1, k), -dt});
      const double r = -(z_guess.q(i + 1, k) - z_guess.q(i, k) - dt * z_guess.qd(i + 1, k));
      push_bound(r, r);
    }
  }

  // Base dynamics with qdd eliminated: M_b (qd_{i+1} - qd_i)/dt + h_b = J_b^T F_i.
  // M_b, h_b, J_b frozen at the guess (Gauss-Newton linearization).
  for (int i = 0; i + 1 < T; ++i) {
    const double dt_inv = 1.0 / settings.dt_schedule[i];
    const Vec3 mb_qdd =
        Mb[i] * (z_guess.qd.row(i + 1) - z_guess.qd.row(i)).transpose() * dt_inv;
    Vec3 jbf = Vec3::Zero();
    for (int c = 0; c < kNumContacts; ++c)
      jbf += contacts[i].jac[c].leftCols<3>().transpose() *
             z_guess.F.row(i).segment<2>(2 * c).transpose();
    const Vec3 resid = mb_qdd + hb[i] - jbf;
    for (int b = 0; b < 3; ++b) {
      for (int k = 0; k < kNq; ++k) {
        const double m = Mb[i](b, k) * dt_inv;
        if (m != 0.0) {
          ats.push_back({row, var_qd(i + 1, k), m});
          ats.push_back({row, var_qd(i, k), -m});
        }
      }
      for (int c = 0; c < kNumContacts; ++c) {
        ats.push_back({row, var_f(i, 2 * c), -contacts[i].jac[c](0, b)});
        ats.push_back({row, var_f(i, 2 * c + 1), -contacts[i].jac[c](1, b)});
      }
      push_bound(-resid[b], -resid[b]);
    }
  }

  // Contact rows per node. State-dependent rows (stance velocity, swing
  // height) start at node 1: node 0 is pinned to the measured state by the
  // initial condition and would otherwise make the equalities inconsistent.
  // Force rows apply at every node since forces stay free decision variables.
  for (int i = 0; i < T; ++i) {
    for (int c = 0; c < kNumContacts; ++c) {
      const double fx = z_guess.F(i, 2 * c);
      const double fz = z_guess.F(i, 2 * c + 1);
      if (ref.stance[i][c]) {
        // |F_x| <= mu F_z as two one-sided rows.
        ats.push_back({row, var_f(i, 2 * c), 1.0});
        ats.push_back({row, var_f(i, 2 * c + 1), -settings.mu});
        push_bound(-kInf, -(fx - settings.mu * fz));
        ats.push_back({row, var_f(i, 2 * c), -1.0});
        ats.push_back({row, var_f(i, 2 * c + 1), -settings.mu});
        push_bound(-kInf, -(-fx - settings.mu * fz));
        if (i == 0) continue;
        // Stationary contact point: J qd = 0.
        for (int axis = 0; axis < 2; ++axis) {
          const double r = -contacts[i].jac[c].row(axis).dot(z_guess.qd.row(i));
          for (int k = 0; k < kNq; ++k) {
            const double j = contacts[i].jac[c](axis, k);
            if (j != 0.0) ats.push_back({row, var_qd(i, k), j});
          }
          push_bound(r, r);
        }
      } else {
        // Swing: zero force, foot height pinned to the swing profile.
        ats.push_back({row, var_f(i, 2 * c), 1.0});
        push_bound(-fx, -fx);
        ats.push_back({row, var_f(i, 2 * c + 1), 1.0});
        push_bound(-fz, -fz);
        if (i == 0) continue;
        const double r = ref.swing_height[i][c] - contacts[i].pos[c][1];
        for (int k = 0; k < kNq; ++k) {
          const double j = contacts[i].jac[c](1, k);
          if (j != 0.0) ats.push_back({row, var_q(i, k), j});
        }
        push_bound(r, r);
      }
    }
  }

  // Joint box limits, also from node 1 (node 0 is the measured state).
  for (int i = 1; i < T; ++i) {
    for (int k = 0; k < kNumJoints; ++k) {
      ats.push_back({row, var_q(i, 3 + k), 1.0});
      push_bound(model.joint_lo[k] - z_guess.q(i, 3 + k),
                 model.joint_hi[k] - z_guess.q(i, 3 + k));
    }
    for (int k = 0; k < kNumJoints; ++k) {
      ats.push_back({row, var_qd(i, 3 + k), 1.0});
      push_bound(-model.qd_limit[k] - z_guess.qd(i, 3 + k),
                 model.qd_limit[k] - z_guess.qd(i, 3 + k));
    }
  }

  prob.A = csc_from_triplets(ats, row, n);
  prob.lo = Eigen::Map<Vec>(lo.data(), row);
  prob.hi = Eigen::Map<Vec>(hi.data(), row);
  return prob;
}

MpcController::MpcController(const ModelParams& model, const MpcSettings& settings)
    : model_(model), settings_(settings), nominal_(nominal_pose(model)) {
  guess_.resize(settings.horizon);
  if (static_cast<int>(settings.dt_schedule.size()) != settings.horizon)
    throw StructuralError("MpcController: dt_schedule length != horizon");
  if (settings.horizon < 2) throw StructuralError("MpcController: horizon must be >= 2");
}

MpcSolution MpcController::rti_step(const RobotState& state, const MpcCommand& cmd,
                                    const GaitState& gait, const MpcSolution* prev) {
  MpcSolution sol;
  const int T = settings_.horizon;
  try {
    // f_init: nominal-pose guess (optionally shifted previous solution),
    // stance forces seeded with the weight-share heuristic.
    auto t0 = Clock::now();
    const auto stance = horizon_contact_flags(gait, settings_.dt_schedule);
    const double weight = model_.total_mass() * model_.gravity;
    if (settings_.warm_start && prev != nullptr && prev->status == MpcStatus::kOk) {
      for (int i = 0; i < T; ++i) {
        const int j = std::min(i + 1, T - 1);
        guess_.q.row(i) = prev->z_star.q.row(j);
        guess_.qd.row(i) = prev->z_star.qd.row(j);
        guess_.F.row(i) = prev->z_star.F.row(j);
      }
    } else {
      for (int i = 0; i < T; ++i) {
        guess_.q.row(i) = nominal_.transpose();
        guess_.q(i, 0) = state.q[0];
        guess_.qd.row(i).setZero();
        const int n_active = active_contacts(stance[i]);
        for (int c = 0; c < kNumContacts; ++c) {
          guess_.F(i, 2 * c) = 0.0;
          guess_.F(i, 2 * c + 1) =
              (stance[i][c] && n_active > 0) ? weight / n_active : 0.0;
        }
      }
    }
    sol.stage_seconds[kStageInitGuess] = seconds_since(t0);

    t0 = Clock::now();
    const MpcReference ref = desired_trajectory(state, cmd, gait, settings_, model_);
    sol.stage_seconds[kStageParam] = seconds_since(t0);

    t0 = Clock::now();
    prob_ = build_qp(state, guess_, ref, settings_, model_);
    AdmmSolver solver(prob_, settings_.admm());
    sol.stage_seconds[kStageKktBuild] = seconds_since(t0);

    t0 = Clock::now();
    solver.equilibrate();
    sol.stage_seconds[kStageRuiz] = seconds_since(t0);

    t0 = Clock::now();
    solver.assemble();
    sol.stage_seconds[kStageKktBuild] += seconds_since(t0);

    t0 = Clock::now();
    solver.factorize();
    sol.stage_seconds[kStageFactorize] = seconds_since(t0);

    t0 = Clock::now();
    const QpSolution qp = solver.run();
    sol.stage_seconds[kStageAdmmIters] = seconds_since(t0);

    t0 = Clock::now();
    if (!qp.x.allFinite())
      throw DivergenceError("rti_step: non-finite QP solution", qp.iters_run);
    sol.z_star.resize(T);
    for (int i = 0; i < T; ++i) {
      const auto dz = qp.x.segment(i * kVarsPerNode, kVarsPerNode);
      sol.z_star.q.row(i) = guess_.q.row(i) + dz.head(kNq).transpose();
      sol.z_star.qd.row(i) = guess_.qd.row(i) + dz.segment(kNq, kNq).transpose();
      sol.z_star.F.row(i) = guess_.F.row(i) + dz.tail(kContactDim).transpose();
    }
    sol.delta_inf_norm = qp.x.lpNorm<Eigen::Infinity>();
    sol.v_mpc = qp.objective;
    sol.prim_res = qp.prim_res;
    sol.dual_res = qp.dual_res;

    const Vec9 q0 = sol.z_star.q.row(0).transpose();
    const Vec9 qd0 = sol.z_star.qd.row(0).transpose();
    const Vec9 qdd0 =
        (sol.z_star.qd.row(1) - sol.z_star.qd.row(0)).transpose() / settings_.dt_schedule[0];
    const Eigen::Matrix<double, kContactDim, 1> f0 = sol.z_star.F.row(0).transpose();
    const InverseDynamicsResult id = inverse_dynamics_torque(model_, q0, qd0, qdd0, f0);
    sol.tau_ff = id.tau;
    sol.base_residual = id.base_residual;
    sol.q_set = q0.tail<kNumJoints>();
    sol.qd_set = qd0.tail<kNumJoints>();
    sol.stage_seconds[kStageRnea] = seconds_since(t0);

    sol.status = MpcStatus::kOk;
  } catch (const std::exception& e) {
    sol.status = MpcStatus::kFailed;
    sol.message = e.what();
  }
  return sol;
}

Vec6 mpc_torque(const MpcSolution& solution, const RobotState& state, const ModelParams& model) {
  if (solution.status != MpcStatus::kOk)
    throw StructuralError("mpc_torque: solution status is failed: " + solution.message);
  return pd_torque(model, solution.q_set, solution.qd_set, state, solution.tau_ff);
}

}  // namespace rmpc
