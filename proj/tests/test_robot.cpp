#include <doctest.h>

#include <Eigen/Dense>

#include "rmpc/rng.hpp"
#include "rmpc/robot.hpp"

using namespace rmpc;

namespace {

Vec9 random_q(Rng& rng) {
  Vec9 q;
  q[0] = rng.uniform(-1.0, 1.0);
  q[1] = rng.uniform(0.6, 1.2);
  q[2] = rng.uniform(-0.5, 0.5);
  for (int j = 0; j < kNumJoints; ++j) q[3 + j] = rng.uniform(-0.8, 0.8);
  // keep knees bent to stay away from singular straight legs
  q[4] = rng.uniform(0.2, 1.5);
  q[7] = rng.uniform(0.2, 1.5);
  return q;
}

Vec9 random_qd(Rng& rng, double scale = 1.0) {
  Vec9 qd;
  for (int i = 0; i < kNq; ++i) qd[i] = scale * rng.normal();
  return qd;
}

// Potential energy from link positions only (independent path for gradients).
double potential(const ModelParams& p, const Vec9& q) {
  const Kinematics k = compute_kinematics(p, q, Vec9::Zero());
  const double m[7] = {p.torso_mass, p.thigh_mass, p.shank_mass, p.foot_mass,
                       p.thigh_mass, p.shank_mass, p.foot_mass};
  double u = 0.0;
  for (int i = 0; i < 7; ++i) u += m[i] * p.gravity * k.com_pos[i][1];
  return u;
}

// Kinetic energy from link velocities only.
double kinetic(const ModelParams& p, const Vec9& q, const Vec9& qd) {
  const Kinematics k = compute_kinematics(p, q, qd);
  const double m[7] = {p.torso_mass, p.thigh_mass, p.shank_mass, p.foot_mass,
                       p.thigh_mass, p.shank_mass, p.foot_mass};
  const double I[7] = {p.torso_inertia, p.thigh_inertia, p.shank_inertia, p.foot_inertia,
                       p.thigh_inertia, p.shank_inertia, p.foot_inertia};
  double ke = 0.0;
  for (int i = 0; i < 7; ++i) {
    ke += 0.5 * m[i] * k.com_vel[i].squaredNorm();
    ke += 0.5 * I[i] * std::pow(k.omega_row[i].dot(qd), 2);
  }
  return ke;
}

}  // namespace

TEST_CASE("mass matrix is symmetric positive definite") {
  ModelParams p;
  Rng rng(1);
  for (int rep = 0; rep < 1000; ++rep) {
    const Vec9 q = random_q(rng);
    const Mat99 M = mass_matrix(p, q);
    CHECK((M - M.transpose()).lpNorm<Eigen::Infinity>() <= 1e-12);
    const Eigen::LLT<Mat99> llt(M);
    CHECK(llt.info() == Eigen::Success);
  }
}

TEST_CASE("mass matrix (x, x) entry is the total mass") {
  ModelParams p;
  Rng rng(2);
  for (int rep = 0; rep < 10; ++rep) {
    const Mat99 M = mass_matrix(p, random_q(rng));
    CHECK(M(0, 0) == doctest::Approx(p.total_mass()).epsilon(1e-12));
  }
}

TEST_CASE("mass matrix matches the momentum finite-difference oracle") {
  ModelParams p;
  Rng rng(3);
  for (int rep = 0; rep < 10; ++rep) {
    const Vec9 q = random_q(rng);
    const Vec9 qd = random_qd(rng);
    const Mat99 M = mass_matrix(p, q);
    // KE computed independently from link velocities.
    CHECK(kinetic(p, q, qd) == doctest::Approx(0.5 * qd.dot(M * qd)).epsilon(1e-10));
    // p_i = dKE/dqd_i by central differences.
    const double h = 1e-6;
    const Vec9 momentum = M * qd;
    for (int i = 0; i < kNq; ++i) {
      Vec9 qp = qd, qm = qd;
      qp[i] += h;
      qm[i] -= h;
      const double fd = (kinetic(p, q, qp) - kinetic(p, q, qm)) / (2.0 * h);
      CHECK(momentum[i] == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("bias forces at rest equal the potential gradient") {
  ModelParams p;
  Rng rng(4);
  for (int rep = 0; rep < 10; ++rep) {
    const Vec9 q = random_q(rng);
    const Vec9 h = bias_forces(p, q, Vec9::Zero());
    const double eps = 1e-6;
    for (int i = 0; i < kNq; ++i) {
      Vec9 qp = q, qm = q;
      qp[i] += eps;
      qm[i] -= eps;
      const double fd = (potential(p, qp) - potential(p, qm)) / (2.0 * eps);
      CHECK(h[i] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("bias z-component at rest is the total weight") {
  ModelParams p;
  Rng rng(5);
  const Vec9 h = bias_forces(p, random_q(rng), Vec9::Zero());
  CHECK(h[1] == doctest::Approx(p.total_mass() * p.gravity).epsilon(1e-12));
  CHECK(h[0] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("energy rate balance: d/dt KE = qd . (tau - grad U)") {
  ModelParams p;
  Rng rng(6);
  for (int rep = 0; rep < 10; ++rep) {
    const Vec9 q = random_q(rng);
    const Vec9 qd = random_qd(rng, 0.5);
    Vec9 tau_gen = Vec9::Zero();
    for (int i = 0; i < kNq; ++i) tau_gen[i] = rng.normal();

    const Mat99 M = mass_matrix(p, q);
    const Vec9 h = bias_forces(p, q, qd);
    const Vec9 qdd = M.llt().solve(tau_gen - h);

    // Central difference of KE along the exact second-order expansion.
    const double dt = 1e-6;
    const Vec9 q_p = q + dt * qd + 0.5 * dt * dt * qdd;
    const Vec9 qd_p = qd + dt * qdd;
    const Vec9 q_m = q - dt * qd + 0.5 * dt * dt * qdd;
    const Vec9 qd_m = qd - dt * qdd;
    const double ke_rate = (kinetic(p, q_p, qd_p) - kinetic(p, q_m, qd_m)) / (2.0 * dt);

    const Vec9 grad_u = bias_forces(p, q, Vec9::Zero());
    const double expected = qd.dot(tau_gen - grad_u);
    CHECK(ke_rate == doctest::Approx(expected).epsilon(1e-4));
  }
}

TEST_CASE("contact points touch the ground in the nominal pose") {
  ModelParams p;
  const Vec9 q = nominal_pose(p);
  const ContactSet cs = contact_kinematics(p, q, Vec9::Zero());
  for (int c = 0; c < kNumContacts; ++c) {
    CHECK(cs.pos[c][1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(cs.vel[c].norm() == 0.0);
  }
  // Stagger: left points forward of the right ones.
  CHECK(cs.pos[2][0] > cs.pos[0][0]);
}

TEST_CASE("contact Jacobians match finite differences of position") {
  ModelParams p;
  Rng rng(7);
  for (int rep = 0; rep < 5; ++rep) {
    const Vec9 q = random_q(rng);
    const Vec9 qd = random_qd(rng);
    const ContactSet cs = contact_kinematics(p, q, qd);
    const double h = 1e-6;
    for (int c = 0; c < kNumContacts; ++c) {
      // velocity = J qd
      CHECK((cs.vel[c] - cs.jac[c] * qd).norm() < 1e-10);
      for (int i = 0; i < kNq; ++i) {
        Vec9 qp = q, qm = q;
        qp[i] += h;
        qm[i] -= h;
        const Vec2 fd = (contact_kinematics(p, qp, qd).pos[c] -
                         contact_kinematics(p, qm, qd).pos[c]) /
                        (2.0 * h);
        CHECK(std::abs(cs.jac[c](0, i) - fd[0]) < 1e-5);
        CHECK(std::abs(cs.jac[c](1, i) - fd[1]) < 1e-5);
      }
    }
  }
}

TEST_CASE("base dynamics terms slice the full dynamics") {
  ModelParams p;
  Rng rng(8);
  const Vec9 q = random_q(rng);
  const Vec9 qd = random_qd(rng);
  const BaseDynamicsTerms t = base_dynamics_terms(p, q, qd);
  CHECK((t.M_b - mass_matrix(p, q).topRows<3>()).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((t.h_b - bias_forces(p, q, qd).head<3>()).lpNorm<Eigen::Infinity>() == 0.0);
  const ContactSet cs = contact_kinematics(p, q, qd);
  for (int c = 0; c < kNumContacts; ++c)
    CHECK((t.J_b.block<2, 3>(2 * c, 0) - cs.jac[c].leftCols<3>()).lpNorm<Eigen::Infinity>() ==
          0.0);
}

TEST_CASE("static stance with weight/4 per contact is in equilibrium") {
  ModelParams p;
  const Vec9 q = nominal_pose(p);
  const BaseDynamicsTerms t = base_dynamics_terms(p, q, Vec9::Zero());
  Eigen::Matrix<double, kContactDim, 1> F = Eigen::Matrix<double, kContactDim, 1>::Zero();
  const double fz = p.total_mass() * p.gravity / kNumContacts;
  for (int c = 0; c < kNumContacts; ++c) F[2 * c + 1] = fz;
  const Vec3 resid = t.h_b - t.J_b.transpose() * F;
  CHECK(resid.lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("inverse dynamics compensates gravity at rest") {
  ModelParams p;
  Rng rng(9);
  const Vec9 q = random_q(rng);
  const auto id = inverse_dynamics_torque(p, q, Vec9::Zero(), Vec9::Zero(),
                                          Eigen::Matrix<double, kContactDim, 1>::Zero());
  const Vec9 grad_u = bias_forces(p, q, Vec9::Zero());
  CHECK((id.tau - grad_u.tail<kNumJoints>()).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("inverse dynamics of the equilibrium stance has zero base residual") {
  ModelParams p;
  const Vec9 q = nominal_pose(p);
  Eigen::Matrix<double, kContactDim, 1> F = Eigen::Matrix<double, kContactDim, 1>::Zero();
  for (int c = 0; c < kNumContacts; ++c)
    F[2 * c + 1] = p.total_mass() * p.gravity / kNumContacts;
  const auto id = inverse_dynamics_torque(p, q, Vec9::Zero(), Vec9::Zero(), F);
  CHECK(id.base_residual.lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("inverse dynamics equals the dense recomputation") {
  ModelParams p;
  Rng rng(10);
  for (int rep = 0; rep < 10; ++rep) {
    const Vec9 q = random_q(rng);
    const Vec9 qd = random_qd(rng);
    const Vec9 qdd = random_qd(rng, 3.0);
    Eigen::Matrix<double, kContactDim, 1> F;
    for (int i = 0; i < kContactDim; ++i) F[i] = rng.normal() * 30.0;
    const auto id = inverse_dynamics_torque(p, q, qd, qdd, F);

    Vec9 gen = mass_matrix(p, q) * qdd + bias_forces(p, q, qd);
    const ContactSet cs = contact_kinematics(p, q, qd);
    for (int c = 0; c < kNumContacts; ++c)
      gen -= cs.jac[c].transpose() * F.segment<2>(2 * c);
    CHECK((id.tau - gen.tail<kNumJoints>()).lpNorm<Eigen::Infinity>() < 1e-9);
    CHECK((id.base_residual - gen.head<3>()).lpNorm<Eigen::Infinity>() < 1e-9);
  }
}

TEST_CASE("inverse dynamics is linear in (qdd, F)") {
  ModelParams p;
  Rng rng(11);
  const Vec9 q = random_q(rng);
  const Vec9 qd = random_qd(rng);
  const Vec9 qdd1 = random_qd(rng), qdd2 = random_qd(rng);
  Eigen::Matrix<double, kContactDim, 1> F1, F2;
  for (int i = 0; i < kContactDim; ++i) {
    F1[i] = rng.normal();
    F2[i] = rng.normal();
  }
  const auto a = inverse_dynamics_torque(p, q, qd, qdd1, F1);
  const auto b = inverse_dynamics_torque(p, q, qd, qdd2, F2);
  const auto ab = inverse_dynamics_torque(p, q, qd, qdd1 + qdd2, F1 + F2);
  const auto zero = inverse_dynamics_torque(p, q, qd, Vec9::Zero(),
                                            Eigen::Matrix<double, kContactDim, 1>::Zero());
  // Superposition after removing the affine (bias) part.
  const Vec6 lhs = ab.tau - zero.tau;
  const Vec6 rhs = (a.tau - zero.tau) + (b.tau - zero.tau);
  CHECK((lhs - rhs).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("pd_torque examples") {
  ModelParams p;
  RobotState s;
  s.q = nominal_pose(p);
  const Vec6 qj = s.q.tail<kNumJoints>();
  const Vec6 ff = Vec6::Constant(3.0);

  // Tracking exactly: torque is the feedforward.
  CHECK((pd_torque(p, qj, Vec6::Zero(), s, ff) - ff).lpNorm<Eigen::Infinity>() == 0.0);

  // Zero gains: feedforward only.
  ModelParams p0 = p;
  p0.kp.setZero();
  p0.kd.setZero();
  CHECK((pd_torque(p0, qj.array() + 1.0, Vec6::Ones(), s, ff) - ff).lpNorm<Eigen::Infinity>() ==
        0.0);

  // Unit error with Kp = 30, Kd = 1.
  const Vec6 tau = pd_torque(p, qj.array() + 1.0, Vec6::Ones(), s, Vec6::Zero());
  for (int j = 0; j < kNumJoints; ++j)
    CHECK(tau[j] == doctest::Approx(std::min(31.0, p.tau_limit[j])));

  // Clamping against the torque limits.
  const Vec6 big = pd_torque(p, qj.array() + 10.0, Vec6::Zero(), s, Vec6::Zero());
  for (int j = 0; j < kNumJoints; ++j) CHECK(big[j] == p.tau_limit[j]);
}

TEST_CASE("nominal pose respects joint limits and nominal height") {
  ModelParams p;
  const Vec9 q = nominal_pose(p);
  CHECK(q[1] == doctest::Approx(p.nominal_height()));
  for (int j = 0; j < kNumJoints; ++j) {
    CHECK(q[3 + j] >= p.joint_lo[j]);
    CHECK(q[3 + j] <= p.joint_hi[j]);
  }
}
