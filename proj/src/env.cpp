#include "rmpc/env.hpp"

#include <algorithm>
#include <cmath>

namespace rmpc {

Terrain::Terrain(const TerrainConfig& cfg) : cfg_(cfg) {
  if (cfg.kind == TerrainConfig::Kind::kHeightfield) {
    const int n = static_cast<int>(cfg.extent / cfg.cell) + 2;
    heights_.resize(n);
    Rng rng(cfg.seed, 0x7e22);
    for (double& h : heights_) h = rng.uniform(-cfg.amplitude, cfg.amplitude);
  }
}

double Terrain::height_at(double x) const {
  if (heights_.empty()) return 0.0;
  const double fx = (x + 0.5 * cfg_.extent) / cfg_.cell;
  const int n = static_cast<int>(heights_.size());
  if (fx <= 0.0) return heights_.front();
  if (fx >= n - 1) return heights_.back();
  const int i = static_cast<int>(fx);
  const double t = fx - i;
  const double s = t * t * (3.0 - 2.0 * t);
  return heights_[i] * (1.0 - s) + heights_[i + 1] * s;
}

std::array<double, 10> RewardBreakdown::weighted(const RewardWeights& w) const {
  const auto t = terms();
  const double ws[10] = {w.lin_vel, w.ang_vel,  w.action_rate1,   w.action_rate2, w.torques,
                         w.orientation, w.height, w.joint_reg, w.self_collision, w.termination};
  std::array<double, 10> out;
  for (int i = 0; i < 10; ++i) out[i] = ws[i] * t[i];
  return out;
}

EnvState physics_step(const EnvState& state, const Vec6& tau, const EnvConfig& config,
                      const ModelParams& model, const Terrain& terrain) {
  EnvState next = state;
  const double dt = config.control_dt / config.substeps;
  Vec9& q = next.robot.q;
  Vec9& qd = next.robot.qd;

  for (int s = 0; s < config.substeps; ++s) {
    const Kinematics kin = compute_kinematics(model, q, qd);
    const Mat99 M = mass_matrix(model, kin);
    Vec9 gen = -bias_forces(model, kin);
    gen.tail<kNumJoints>() += tau;
    for (int c = 0; c < kNumContacts; ++c) {
      const double ground = terrain.height_at(kin.contacts.pos[c][0]);
      const double pen = ground - kin.contacts.pos[c][1];
      if (pen <= 0.0) continue;
      const double fz = std::max(0.0, config.k_n * pen - config.c_n * kin.contacts.vel[c][1]);
      const double fx = -model.mu * fz * std::tanh(kin.contacts.vel[c][0] / config.v_slip);
      gen.noalias() += kin.contacts.jac[c].transpose() * Vec2(fx, fz);
    }
    const Vec9 qdd = M.llt().solve(gen);
    qd += dt * qdd;
    q += dt * qd;
  }
  if (!q.allFinite() || !qd.allFinite())
    throw SimBlowupError("physics_step: non-finite state after step");

  next.time = state.time + config.control_dt;
  next.gait = advance_phase(state.gait, config.control_dt);
  return next;
}

namespace {

double segment_distance(const Vec2& a0, const Vec2& a1, const Vec2& b0, const Vec2& b1) {
  // Closest distance between two planar segments.
  auto point_seg = [](const Vec2& p, const Vec2& s0, const Vec2& s1) {
    const Vec2 d = s1 - s0;
    const double len2 = d.squaredNorm();
    double t = len2 > 0.0 ? (p - s0).dot(d) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return (p - (s0 + t * d)).norm();
  };
  auto orient = [](const Vec2& p, const Vec2& q, const Vec2& r) {
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
  };
  const double o1 = orient(a0, a1, b0), o2 = orient(a0, a1, b1);
  const double o3 = orient(b0, b1, a0), o4 = orient(b0, b1, a1);
  if (((o1 > 0) != (o2 > 0)) && ((o3 > 0) != (o4 > 0))) return 0.0;  // proper intersection
  return std::min(std::min(point_seg(a0, b0, b1), point_seg(a1, b0, b1)),
                  std::min(point_seg(b0, a0, a1), point_seg(b1, a0, a1)));
}

}  // namespace

bool self_collision(const RobotState& state, const ModelParams& model, double radius) {
  const Kinematics k = compute_kinematics(model, state.q, Vec9::Zero());
  // Left/right shank and foot segments.
  const Vec2 shank_l0 = k.knee_l, shank_l1 = k.ankle_l;
  const Vec2 shank_r0 = k.knee_r, shank_r1 = k.ankle_r;
  const Vec2 foot_l0 = k.contacts.pos[3], foot_l1 = k.contacts.pos[2];  // L heel -> L toe
  const Vec2 foot_r0 = k.contacts.pos[1], foot_r1 = k.contacts.pos[0];
  const double dists[4] = {
      segment_distance(shank_l0, shank_l1, shank_r0, shank_r1),
      segment_distance(shank_l0, shank_l1, foot_r0, foot_r1),
      segment_distance(foot_l0, foot_l1, shank_r0, shank_r1),
      segment_distance(foot_l0, foot_l1, foot_r0, foot_r1),
  };
  const double min_dist = *std::min_element(dists, dists + 4);
  return min_dist < radius;
}

TerminationCheck check_termination(const EnvState& state, const EnvConfig& config,
                                   const ModelParams& model) {
  TerminationCheck out;
  if (!state.robot.q.allFinite() || !state.robot.qd.allFinite()) {
    out.terminated = true;
    out.reason = "non_finite";
    return out;
  }
  const double height = state.robot.q[1];
  if (height < config.height_lo || height > config.height_hi) {
    out.terminated = true;
    out.reason = "height";
    return out;
  }
  if (std::abs(state.robot.q[2]) > config.pitch_max) {
    out.terminated = true;
    out.reason = "orientation";
    return out;
  }
  if (std::hypot(state.robot.qd[0], state.robot.qd[1]) > config.vel_max) {
    out.terminated = true;
    out.reason = "velocity";
    return out;
  }
  if (self_collision(state.robot, model, config.collision_radius)) {
    out.terminated = true;
    out.reason = "self_collision";
    return out;
  }
  return out;
}

RewardBreakdown compute_rewards(const EnvState& prev, const EnvState& next, const Vec6& tau,
                                const Vec6& action, const Vec6& action_prev,
                                const Vec6& action_prev2, bool terminated, bool collided,
                                const EnvConfig& config, const ModelParams& model) {
  (void)prev;
  RewardBreakdown r;
  const double sig = config.sigma_r;
  const MpcCommand& cmd = next.cmd;
  const double vx = next.robot.qd[0];
  const double lin_err = (cmd.vx - vx) / (1.0 + std::abs(cmd.vx));
  r.lin_vel = std::exp(-(lin_err * lin_err) / sig);
  const double ang_err = cmd.wpitch - next.robot.qd[2];
  r.ang_vel = std::exp(-(ang_err * ang_err) / sig);

  const double dt = config.control_dt;
  r.action_rate1 = ((action - action_prev) / dt).squaredNorm();
  r.action_rate2 = ((action - 2.0 * action_prev + action_prev2) / dt).squaredNorm();
  r.torques = tau.squaredNorm();

  const double g_x = std::sin(next.robot.q[2]);  // projected gravity, lateral component
  r.orientation = std::exp(-(g_x * g_x) / sig);
  const double h_err = cmd.height - next.robot.q[1];
  r.height = std::exp(-(h_err * h_err) / sig);

  const Vec6 qj = next.robot.q.tail<kNumJoints>();
  const Vec6 qhat = nominal_pose(model).tail<kNumJoints>();
  r.joint_reg = std::exp(-((qj - qhat).squaredNorm() / kNumJoints) / sig);

  r.self_collision = collided ? 1.0 : 0.0;
  r.termination = terminated ? 1.0 : 0.0;

  const RewardWeights& w = config.weights;
  r.total = w.lin_vel * r.lin_vel + w.ang_vel * r.ang_vel + w.action_rate1 * r.action_rate1 +
            w.action_rate2 * r.action_rate2 + w.torques * r.torques +
            w.orientation * r.orientation + w.height * r.height + w.joint_reg * r.joint_reg +
            w.self_collision * r.self_collision + w.termination * r.termination;
  return r;
}

MpcCommand sample_command(Rng& rng, const EnvConfig& config) {
  MpcCommand cmd;
  cmd.height = rng.uniform(config.cmd_height_lo, config.cmd_height_hi);
  cmd.vx = rng.uniform(config.cmd_vx_lo, config.cmd_vx_hi);
  cmd.wpitch = 0.0;
  return cmd;
}

ModelParams randomize_model(Rng& rng, const EnvConfig& config, const ModelParams& base) {
  ModelParams m = base;
  m.mu = rng.uniform(config.friction_lo, config.friction_hi);
  const double scale = rng.uniform(config.mass_scale_lo, config.mass_scale_hi);
  m.torso_mass *= scale;
  m.thigh_mass *= scale;
  m.shank_mass *= scale;
  m.foot_mass *= scale;
  m.torso_inertia *= scale;
  m.thigh_inertia *= scale;
  m.shank_inertia *= scale;
  m.foot_inertia *= scale;
  return m;
}

double total_energy(const ModelParams& model, const RobotState& state, const Terrain& terrain,
                    const EnvConfig& config, bool include_contact_springs) {
  double e = mechanical_energy(model, state.q, state.qd);
  if (include_contact_springs) {
    const ContactSet cs = contact_kinematics(model, state.q, state.qd);
    for (int c = 0; c < kNumContacts; ++c) {
      const double pen = terrain.height_at(cs.pos[c][0]) - cs.pos[c][1];
      if (pen > 0.0) e += 0.5 * config.k_n * pen * pen;
    }
  }
  return e;
}

Env::Env(const ModelParams& base, const EnvConfig& config, uint64_t seed, int env_id)
    : base_model_(base),
      model_(base),
      config_(config),
      terrain_(config.terrain) {
  state_.rng = Rng(seed, static_cast<uint64_t>(env_id));
  reset();
}

void Env::reset() {
  model_ = randomize_model(state_.rng, config_, base_model_);
  state_.robot.q = nominal_pose(model_);
  state_.robot.qd.setZero();
  state_.robot.qd[0] = state_.rng.uniform(-config_.init_vx, config_.init_vx);
  state_.robot.qd[2] = state_.rng.uniform(-config_.init_pitch_rate, config_.init_pitch_rate);
  state_.cmd = sample_command(state_.rng, config_);
  state_.gait = config_.make_gait();
  state_.time = 0.0;
  action_prev_.setZero();
  action_prev2_.setZero();
}

Env::StepResult Env::step(const Vec6& tau, const Vec6& action, bool force_terminate) {
  StepResult out;
  const EnvState prev = state_;
  bool blowup = false;
  try {
    state_ = physics_step(state_, tau, config_, model_, terrain_);
  } catch (const SimBlowupError&) {
    blowup = true;
  }

  bool collided = false;
  if (!blowup) {
    const TerminationCheck term = check_termination(state_, config_, model_);
    collided = term.reason == "self_collision" ||
               self_collision(state_.robot, model_, config_.collision_radius);
    out.done = term.terminated;
    out.reason = term.reason;
    if (!out.done && force_terminate) {
      out.done = true;
      out.reason = "controller_failed";
    }
    if (!out.done && state_.time >= config_.episode_length) {
      out.done = true;
      out.reason = "timeout";
    }
  } else {
    out.done = true;
    out.reason = "sim_blowup";
    state_.time = prev.time + config_.control_dt;
  }

  const bool penalized_termination = out.done && out.reason != "timeout";
  out.rewards = compute_rewards(prev, blowup ? prev : state_, tau, action, action_prev_,
                                action_prev2_, penalized_termination, collided, config_, model_);

  action_prev2_ = action_prev_;
  action_prev_ = action;
  if (out.done) {
    last_episode_length_ = state_.time;
    reset();
  }
  return out;
}

}  // namespace rmpc
