#include "rmpc/robot.hpp"

#include <cmath>

namespace rmpc {

namespace {

inline Vec2 perp(const Vec2& v) { return Vec2(-v[1], v[0]); }

inline Vec2 rot(double a, double x, double z) {
  const double c = std::cos(a), s = std::sin(a);
  return Vec2(c * x - s * z, s * x + c * z);
}

// Angle coordinate indices per link, ending with the link's own joint.
// Link order: torso, L thigh, L shank, L foot, R thigh, R shank, R foot.
constexpr int kChain[7][4] = {
    {2, -1, -1, -1}, {2, 3, -1, -1}, {2, 3, 4, -1}, {2, 3, 4, 5},
    {2, 6, -1, -1}, {2, 6, 7, -1}, {2, 6, 7, 8},
};

struct PointFrame {
  Vec2 pos, vel;
};

}  // namespace

Kinematics compute_kinematics(const ModelParams& p, const Vec9& q, const Vec9& qd) {
  Kinematics k;
  const Vec2 base(q[0], q[1]);
  const Vec2 vbase(qd[0], qd[1]);
  const double th = q[2];

  // Pivot positions/velocities per angle coordinate (index 2..8).
  std::array<PointFrame, kNq> pivot;
  pivot[2] = {base, vbase};

  auto chain_point = [&](const PointFrame& from, double abs_angle, double omega, double x,
                         double z) {
    const Vec2 r = rot(abs_angle, x, z);
    return PointFrame{from.pos + r, from.vel + omega * perp(r)};
  };

  PointFrame base_pt{base, vbase};
  PointFrame hip = chain_point(base_pt, th, qd[2], 0.0, -0.5 * p.torso_len);
  k.hip = hip.pos;

  // Per-leg chains. Left joints {3,4,5}, right {6,7,8}.
  struct LegFrames {
    PointFrame knee, ankle;
    double a1, a2, a3;  // absolute thigh/shank/foot angles
    double w1, w2, w3;  // absolute angular rates
  };
  auto leg = [&](int hip_idx) {
    LegFrames f;
    f.a1 = th + q[hip_idx];
    f.a2 = f.a1 + q[hip_idx + 1];
    f.a3 = f.a2 + q[hip_idx + 2];
    f.w1 = qd[2] + qd[hip_idx];
    f.w2 = f.w1 + qd[hip_idx + 1];
    f.w3 = f.w2 + qd[hip_idx + 2];
    f.knee = chain_point(hip, f.a1, f.w1, 0.0, -p.thigh_len);
    f.ankle = chain_point(f.knee, f.a2, f.w2, 0.0, -p.shank_len);
    return f;
  };
  const LegFrames left = leg(3);
  const LegFrames right = leg(6);
  k.knee_l = left.knee.pos;
  k.ankle_l = left.ankle.pos;
  k.knee_r = right.knee.pos;
  k.ankle_r = right.ankle.pos;

  pivot[3] = hip;
  pivot[4] = left.knee;
  pivot[5] = left.ankle;
  pivot[6] = hip;
  pivot[7] = right.knee;
  pivot[8] = right.ankle;

  // CoM frames.
  std::array<PointFrame, Kinematics::kNumLinks> com;
  com[0] = base_pt;
  com[1] = chain_point(hip, left.a1, left.w1, 0.0, -0.5 * p.thigh_len);
  com[2] = chain_point(left.knee, left.a2, left.w2, 0.0, -0.5 * p.shank_len);
  com[3] = chain_point(left.ankle, left.a3, left.w3, 0.0, -p.ankle_drop);
  com[4] = chain_point(hip, right.a1, right.w1, 0.0, -0.5 * p.thigh_len);
  com[5] = chain_point(right.knee, right.a2, right.w2, 0.0, -0.5 * p.shank_len);
  com[6] = chain_point(right.ankle, right.a3, right.w3, 0.0, -p.ankle_drop);

  auto point_jacobian = [&](const Vec2& pos, int link) {
    RowJac J = RowJac::Zero();
    J(0, 0) = 1.0;
    J(1, 1) = 1.0;
    for (int c = 0; c < 4; ++c) {
      const int a = kChain[link][c];
      if (a < 0) break;
      J.col(a) = perp(pos - pivot[a].pos);
    }
    return J;
  };
  auto point_jdot_qd = [&](const PointFrame& pt, int link) {
    Vec2 acc = Vec2::Zero();
    for (int c = 0; c < 4; ++c) {
      const int a = kChain[link][c];
      if (a < 0) break;
      acc += qd[a] * perp(pt.vel - pivot[a].vel);
    }
    return acc;
  };

  for (int link = 0; link < Kinematics::kNumLinks; ++link) {
    k.com_pos[link] = com[link].pos;
    k.com_vel[link] = com[link].vel;
    k.com_jac[link] = point_jacobian(com[link].pos, link);
    k.com_jdot_qd[link] = point_jdot_qd(com[link], link);
    k.omega_row[link] = Vec9::Zero();
    for (int c = 0; c < 4; ++c) {
      const int a = kChain[link][c];
      if (a < 0) break;
      k.omega_row[link][a] = 1.0;
    }
  }

  // Contact points: (right toe, right heel, left toe, left heel).
  struct ContactSpec {
    const LegFrames* leg;
    int link;
    double x_off;
  };
  const ContactSpec specs[kNumContacts] = {
      {&right, 6, p.foot_half_len},
      {&right, 6, -p.foot_half_len},
      {&left, 3, p.foot_half_len},
      {&left, 3, -p.foot_half_len},
  };
  for (int c = 0; c < kNumContacts; ++c) {
    const auto& s = specs[c];
    const PointFrame anchor = (s.link == 3) ? left.ankle : right.ankle;
    const double a3 = s.leg->a3;
    const double w3 = s.leg->w3;
    PointFrame pt = chain_point(anchor, a3, w3, s.x_off, -p.ankle_drop);
    k.contacts.pos[c] = pt.pos;
    k.contacts.vel[c] = pt.vel;
    k.contacts.jac[c] = point_jacobian(pt.pos, s.link);
  }
  return k;
}

namespace {

inline void link_inertias(const ModelParams& p, double* mass, double* inertia) {
  const double m[7] = {p.torso_mass, p.thigh_mass, p.shank_mass, p.foot_mass,
                       p.thigh_mass, p.shank_mass, p.foot_mass};
  const double I[7] = {p.torso_inertia, p.thigh_inertia, p.shank_inertia, p.foot_inertia,
                       p.thigh_inertia, p.shank_inertia, p.foot_inertia};
  for (int i = 0; i < 7; ++i) {
    mass[i] = m[i];
    inertia[i] = I[i];
  }
}

}  // namespace

Mat99 mass_matrix(const ModelParams& p, const Vec9& q) {
  return mass_matrix(p, compute_kinematics(p, q, Vec9::Zero()));
}

Mat99 mass_matrix(const ModelParams& p, const Kinematics& k) {
  double m[7], I[7];
  link_inertias(p, m, I);
  Mat99 M = Mat99::Zero();
  for (int link = 0; link < Kinematics::kNumLinks; ++link) {
    M.noalias() += m[link] * k.com_jac[link].transpose() * k.com_jac[link];
    M.noalias() += I[link] * k.omega_row[link] * k.omega_row[link].transpose();
  }
  return M;
}

Vec9 bias_forces(const ModelParams& p, const Vec9& q, const Vec9& qd) {
  return bias_forces(p, compute_kinematics(p, q, qd));
}

Vec9 bias_forces(const ModelParams& p, const Kinematics& k) {
  double m[7], I[7];
  link_inertias(p, m, I);
  Vec9 h = Vec9::Zero();
  const Vec2 g_acc(0.0, p.gravity);
  for (int link = 0; link < Kinematics::kNumLinks; ++link) {
    // Angular rate coefficients are constant in q, so the rotational part
    // contributes no velocity-product terms in the plane.
    h.noalias() += m[link] * k.com_jac[link].transpose() * (k.com_jdot_qd[link] + g_acc);
  }
  return h;
}

ContactSet contact_kinematics(const ModelParams& p, const Vec9& q, const Vec9& qd) {
  return compute_kinematics(p, q, qd).contacts;
}

BaseDynamicsTerms base_dynamics_terms(const ModelParams& p, const Vec9& q, const Vec9& qd) {
  BaseDynamicsTerms t;
  t.M_b = mass_matrix(p, q).topRows<3>();
  t.h_b = bias_forces(p, q, qd).head<3>();
  const ContactSet cs = contact_kinematics(p, q, qd);
  for (int c = 0; c < kNumContacts; ++c)
    t.J_b.block<2, 3>(2 * c, 0) = cs.jac[c].leftCols<3>();
  return t;
}

InverseDynamicsResult inverse_dynamics_torque(const ModelParams& p, const Vec9& q,
                                              const Vec9& qd, const Vec9& qdd,
                                              const Eigen::Matrix<double, kContactDim, 1>& F) {
  const Kinematics k = compute_kinematics(p, q, qd);
  double m[7], I[7];
  link_inertias(p, m, I);
  Vec9 gen = Vec9::Zero();
  const Vec2 g_acc(0.0, p.gravity);
  for (int link = 0; link < Kinematics::kNumLinks; ++link) {
    const Vec2 com_acc =
        k.com_jac[link] * qdd + k.com_jdot_qd[link] + g_acc;
    gen.noalias() += m[link] * k.com_jac[link].transpose() * com_acc;
    const double wdot = k.omega_row[link].dot(qdd);
    gen.noalias() += I[link] * wdot * k.omega_row[link];
  }
  for (int c = 0; c < kNumContacts; ++c)
    gen.noalias() -= k.contacts.jac[c].transpose() * F.segment<2>(2 * c);

  InverseDynamicsResult out;
  out.base_residual = gen.head<3>();
  out.tau = gen.tail<kNumJoints>();
  return out;
}

Vec6 pd_torque(const ModelParams& p, const Vec6& q_des, const Vec6& qd_des,
               const RobotState& state, const Vec6& tau_ff) {
  const Vec6 qj = state.q.tail<kNumJoints>();
  const Vec6 qdj = state.qd.tail<kNumJoints>();
  Vec6 tau = p.kp.cwiseProduct(q_des - qj) + p.kd.cwiseProduct(qd_des - qdj) + tau_ff;
  return tau.cwiseMax(-p.tau_limit).cwiseMin(p.tau_limit);
}

namespace {

Vec9 nominal_pose_uncached(const ModelParams& p) {
  // Solve each leg for (ankle - hip) = (x_off, -drop) with a flat foot.
  auto leg_angles = [&](double x_off) {
    const double l1 = p.thigh_len, l2 = p.shank_len;
    const double hyp = std::hypot(x_off, p.nominal_drop);
    const double cos_knee = (hyp * hyp - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
    const double knee = std::acos(std::min(1.0, std::max(-1.0, cos_knee)));
    const double gamma = std::atan2(x_off, p.nominal_drop);
    const double beta = std::atan2(l2 * std::sin(knee), l1 + l2 * std::cos(knee));
    const double a1 = gamma - beta;   // absolute thigh angle
    const double a2 = a1 + knee;      // absolute shank angle
    return std::array<double, 3>{a1, knee, -a2};  // hip, knee, ankle (flat foot)
  };
  // Shift both ankle targets until the CoM sits exactly over the contact
  // centroid, so standing with equal vertical forces is a true equilibrium.
  double shift = 0.0;
  Vec9 q;
  for (int it = 0; it < 60; ++it) {
    const auto left = leg_angles(shift + p.nominal_stagger);
    const auto right = leg_angles(shift - p.nominal_stagger);
    q << 0.0, p.nominal_height(), 0.0, left[0], left[1], left[2], right[0], right[1], right[2];
    const Kinematics k = compute_kinematics(p, q, Vec9::Zero());
    const double m[7] = {p.torso_mass, p.thigh_mass, p.shank_mass, p.foot_mass,
                         p.thigh_mass, p.shank_mass, p.foot_mass};
    double com_x = 0.0, total = 0.0;
    for (int i = 0; i < 7; ++i) {
      com_x += m[i] * k.com_pos[i][0];
      total += m[i];
    }
    com_x /= total;
    if (std::abs(com_x - shift) < 1e-14) break;
    shift = com_x;
  }
  return q;
}

struct NominalCacheKey {
  double fields[10];
  bool operator==(const NominalCacheKey&) const = default;
};

NominalCacheKey nominal_key(const ModelParams& p) {
  // The pose depends on mass ratios, not the absolute scale, so a uniformly
  // mass-randomized model hits the same cache entry.
  return {{p.thigh_mass / p.torso_mass, p.shank_mass / p.torso_mass,
           p.foot_mass / p.torso_mass, p.torso_len, p.thigh_len, p.shank_len, p.ankle_drop,
           p.nominal_stagger, p.nominal_drop, 0.0}};
}

}  // namespace

Vec9 nominal_pose(const ModelParams& p) {
  thread_local NominalCacheKey cached_key{};
  thread_local Vec9 cached_pose = Vec9::Zero();
  thread_local bool cache_valid = false;
  const NominalCacheKey key = nominal_key(p);
  if (cache_valid && key == cached_key) return cached_pose;
  cached_pose = nominal_pose_uncached(p);
  cached_key = key;
  cache_valid = true;
  return cached_pose;
}

double mechanical_energy(const ModelParams& p, const Vec9& q, const Vec9& qd) {
  const Mat99 M = mass_matrix(p, q);
  const Kinematics k = compute_kinematics(p, q, Vec9::Zero());
  double m[7], I[7];
  link_inertias(p, m, I);
  double pe = 0.0;
  for (int link = 0; link < Kinematics::kNumLinks; ++link)
    pe += m[link] * p.gravity * k.com_pos[link][1];
  return 0.5 * qd.dot(M * qd) + pe;
}

}  // namespace rmpc
