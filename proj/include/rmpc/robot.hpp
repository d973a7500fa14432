#pragma once

#include <array>

#include "rmpc/types.hpp"

namespace rmpc {

// Generalized coordinates of the planar biped:
//   [base x, base z, base pitch, L hip, L knee, L ankle, R hip, R knee, R ankle]
// Pitch and joint angles are positive counter-clockwise in the x-z plane
// (x right, z up). The torso hangs above a single hip pivot; each leg is
// thigh-shank-foot with toe/heel contact points on the sole.
inline constexpr int kNq = 9;
inline constexpr int kNumJoints = 6;
inline constexpr int kNumContacts = 4;
inline constexpr int kContactDim = 2 * kNumContacts;

using Vec9 = Eigen::Matrix<double, kNq, 1>;
using Vec6 = Eigen::Matrix<double, kNumJoints, 1>;
using Mat99 = Eigen::Matrix<double, kNq, kNq>;
using RowJac = Eigen::Matrix<double, 2, kNq>;

struct ModelParams {
  double torso_mass = 10.0, torso_len = 0.4, torso_inertia = 10.0 * 0.4 * 0.4 / 12.0;
  double thigh_mass = 2.5, thigh_len = 0.4, thigh_inertia = 2.5 * 0.4 * 0.4 / 12.0;
  double shank_mass = 1.5, shank_len = 0.4, shank_inertia = 1.5 * 0.4 * 0.4 / 12.0;
  double foot_mass = 0.5, foot_half_len = 0.09, foot_inertia = 0.5 * 0.18 * 0.18 / 12.0;
  double ankle_drop = 0.05;  // ankle height above the sole

  // Per actuated joint, order (L hip, L knee, L ankle, R hip, R knee, R ankle).
  Vec6 joint_lo = (Vec6() << -1.5, 0.05, -1.2, -1.5, 0.05, -1.2).finished();
  Vec6 joint_hi = (Vec6() << 1.5, 2.4, 1.2, 1.5, 2.4, 1.2).finished();
  Vec6 qd_limit = Vec6::Constant(20.0);
  Vec6 tau_limit = (Vec6() << 60.0, 60.0, 30.0, 60.0, 60.0, 30.0).finished();
  Vec6 kp = Vec6::Constant(30.0);
  Vec6 kd = Vec6::Constant(1.0);

  double mu = 0.8;
  double gravity = 9.81;

  // Nominal standing stance: ankles +-stagger from the hip at a vertical drop.
  double nominal_stagger = 0.15;
  double nominal_drop = 0.75;

  double total_mass() const {
    return torso_mass + 2.0 * (thigh_mass + shank_mass + foot_mass);
  }
  double nominal_height() const { return ankle_drop + nominal_drop + 0.5 * torso_len; }
};

struct RobotState {
  Vec9 q = Vec9::Zero();
  Vec9 qd = Vec9::Zero();
};

/// Contact points in the fixed order (right toe, right heel, left toe, left heel).
struct ContactSet {
  std::array<Vec2, kNumContacts> pos;
  std::array<Vec2, kNumContacts> vel;
  std::array<RowJac, kNumContacts> jac;
};

/// Everything the dynamics needs from one forward-kinematics pass.
struct Kinematics {
  // link order: torso, L thigh, L shank, L foot, R thigh, R shank, R foot
  static constexpr int kNumLinks = 7;
  std::array<Vec2, kNumLinks> com_pos;
  std::array<Vec2, kNumLinks> com_vel;
  std::array<RowJac, kNumLinks> com_jac;
  std::array<Vec2, kNumLinks> com_jdot_qd;  // centripetal/Coriolis acceleration
  std::array<Vec9, kNumLinks> omega_row;    // d(omega_link)/d(qd)
  Vec2 hip, knee_l, ankle_l, knee_r, ankle_r;
  ContactSet contacts;
};

Kinematics compute_kinematics(const ModelParams& p, const Vec9& q, const Vec9& qd);

/// Symmetric positive definite mass matrix M(q).
Mat99 mass_matrix(const ModelParams& p, const Vec9& q);
Mat99 mass_matrix(const ModelParams& p, const Kinematics& k);

/// Coriolis, centrifugal and gravity forces h(q, qd); h(q, 0) is the gradient
/// of the potential energy.
Vec9 bias_forces(const ModelParams& p, const Vec9& q, const Vec9& qd);
Vec9 bias_forces(const ModelParams& p, const Kinematics& k);

ContactSet contact_kinematics(const ModelParams& p, const Vec9& q, const Vec9& qd);

struct BaseDynamicsTerms {
  Eigen::Matrix<double, 3, kNq> M_b;          // first three rows of M
  Vec3 h_b;                                   // first three rows of h
  Eigen::Matrix<double, kContactDim, 3> J_b;  // base columns of the stacked contact Jacobian
};

BaseDynamicsTerms base_dynamics_terms(const ModelParams& p, const Vec9& q, const Vec9& qd);

struct InverseDynamicsResult {
  Vec6 tau;           // actuated rows of M qdd + h - J^T F
  Vec3 base_residual; // unactuated rows; ~0 for dynamics-consistent (qdd, F)
};

InverseDynamicsResult inverse_dynamics_torque(const ModelParams& p, const Vec9& q,
                                              const Vec9& qd, const Vec9& qdd,
                                              const Eigen::Matrix<double, kContactDim, 1>& F);

/// PD + feedforward joint torque, clamped to the torque limits.
Vec6 pd_torque(const ModelParams& p, const Vec6& q_des, const Vec6& qd_des,
               const RobotState& state, const Vec6& tau_ff);

/// Documented standing pose: feet flat on the ground, left ankle forward of
/// the hip by nominal_stagger and the right mirrored, base at nominal_height.
Vec9 nominal_pose(const ModelParams& p);

/// Total kinetic plus gravitational potential energy.
double mechanical_energy(const ModelParams& p, const Vec9& q, const Vec9& qd);

}  // namespace rmpc
