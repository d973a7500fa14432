#include "rmpc/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace rmpc {

namespace {
std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}
}  // namespace

Config Config::from_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw StructuralError("Config: cannot open " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return from_string(ss.str());
}

Config Config::from_string(const std::string& text) {
  Config cfg;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw StructuralError("Config: malformed section at line " + std::to_string(lineno));
      section = trim(line.substr(1, line.size() - 2));
      cfg.sections_[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw StructuralError("Config: missing '=' at line " + std::to_string(lineno));
    cfg.sections_[section][trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return cfg;
}

bool Config::has(const std::string& section, const std::string& key) const {
  const auto s = sections_.find(section);
  return s != sections_.end() && s->second.count(key) > 0;
}

std::string Config::get_str(const std::string& section, const std::string& key,
                            const std::string& fallback) const {
  const auto s = sections_.find(section);
  if (s == sections_.end()) return fallback;
  const auto k = s->second.find(key);
  return k == s->second.end() ? fallback : k->second;
}

double Config::get_double(const std::string& section, const std::string& key,
                          double fallback) const {
  if (!has(section, key)) return fallback;
  return std::stod(get_str(section, key, ""));
}

int Config::get_int(const std::string& section, const std::string& key, int fallback) const {
  if (!has(section, key)) return fallback;
  return std::stoi(get_str(section, key, ""));
}

bool Config::get_bool(const std::string& section, const std::string& key, bool fallback) const {
  if (!has(section, key)) return fallback;
  std::string v = get_str(section, key, "");
  std::transform(v.begin(), v.end(), v.begin(), ::tolower);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw StructuralError("Config: bad boolean '" + v + "' for " + section + "." + key);
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
  sections_[section][key] = value;
}

std::string Config::serialize() const {
  std::ostringstream os;
  for (const auto& [name, kv] : sections_) {
    os << "[" << name << "]\n";
    for (const auto& [k, v] : kv) os << k << " = " << v << "\n";
  }
  return os.str();
}

void Config::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw StructuralError("Config: cannot write " + path);
  os << serialize();
}

uint64_t Config::hash() const {
  const std::string text = serialize();
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

ModelParams model_from_config(const Config& cfg) {
  ModelParams m;
  const std::string s = "model";
  m.torso_mass = cfg.get_double(s, "torso_mass", m.torso_mass);
  m.torso_len = cfg.get_double(s, "torso_len", m.torso_len);
  m.torso_inertia = cfg.get_double(s, "torso_inertia", m.torso_mass * m.torso_len * m.torso_len / 12.0);
  m.thigh_mass = cfg.get_double(s, "thigh_mass", m.thigh_mass);
  m.thigh_len = cfg.get_double(s, "thigh_len", m.thigh_len);
  m.thigh_inertia = cfg.get_double(s, "thigh_inertia", m.thigh_mass * m.thigh_len * m.thigh_len / 12.0);
  m.shank_mass = cfg.get_double(s, "shank_mass", m.shank_mass);
  m.shank_len = cfg.get_double(s, "shank_len", m.shank_len);
  m.shank_inertia = cfg.get_double(s, "shank_inertia", m.shank_mass * m.shank_len * m.shank_len / 12.0);
  m.foot_mass = cfg.get_double(s, "foot_mass", m.foot_mass);
  m.foot_half_len = cfg.get_double(s, "foot_half_len", m.foot_half_len);
  m.foot_inertia = cfg.get_double(s, "foot_inertia", m.foot_mass * 4.0 * m.foot_half_len * m.foot_half_len / 12.0);
  m.ankle_drop = cfg.get_double(s, "ankle_drop", m.ankle_drop);
  m.mu = cfg.get_double(s, "mu", m.mu);
  m.gravity = cfg.get_double(s, "gravity", m.gravity);
  m.nominal_stagger = cfg.get_double(s, "nominal_stagger", m.nominal_stagger);
  m.nominal_drop = cfg.get_double(s, "nominal_drop", m.nominal_drop);
  for (int j = 0; j < kNumJoints; ++j) {
    const std::string idx = std::to_string(j);
    m.joint_lo[j] = cfg.get_double(s, "joint_lo_" + idx, m.joint_lo[j]);
    m.joint_hi[j] = cfg.get_double(s, "joint_hi_" + idx, m.joint_hi[j]);
    m.qd_limit[j] = cfg.get_double(s, "qd_limit_" + idx, m.qd_limit[j]);
    m.tau_limit[j] = cfg.get_double(s, "tau_limit_" + idx, m.tau_limit[j]);
    m.kp[j] = cfg.get_double(s, "kp_" + idx, cfg.get_double("gains", "kp", m.kp[j]));
    m.kd[j] = cfg.get_double(s, "kd_" + idx, cfg.get_double("gains", "kd", m.kd[j]));
  }
  return m;
}

MpcSettings mpc_settings_from_config(const Config& cfg) {
  MpcSettings s;
  const std::string m = "mpc";
  s.horizon = cfg.get_int(m, "horizon", s.horizon);
  const double dt = cfg.get_double(m, "dt", 0.05);
  s.dt_schedule.assign(s.horizon, dt);
  s.w_q[0] = 0.0;  // base-x weight pinned to zero
  s.w_q[1] = cfg.get_double(m, "w_height", s.w_q[1]);
  s.w_q[2] = cfg.get_double(m, "w_pitch", s.w_q[2]);
  const double wj = cfg.get_double(m, "w_joint_pos", s.w_q[3]);
  const double wjd = cfg.get_double(m, "w_joint_vel", s.w_qd[3]);
  for (int j = 0; j < kNumJoints; ++j) {
    s.w_q[3 + j] = wj;
    s.w_qd[3 + j] = wjd;
  }
  s.w_qd[0] = cfg.get_double(m, "w_vx", s.w_qd[0]);
  s.w_qd[1] = cfg.get_double(m, "w_vz", s.w_qd[1]);
  s.w_qd[2] = cfg.get_double(m, "w_pitch_rate", s.w_qd[2]);
  s.w_f.setConstant(cfg.get_double(m, "w_force", s.w_f[0]));
  s.gait_period = cfg.get_double("gait", "period", s.gait_period);
  s.phase_switch = cfg.get_double("gait", "phase_switch", s.phase_switch);
  const double off_r = cfg.get_double("gait", "offset_right", 0.5);
  const double off_l = cfg.get_double("gait", "offset_left", 0.0);
  s.phase_offsets = {off_r, off_r, off_l, off_l};
  s.z_swing = cfg.get_double(m, "z_swing", s.z_swing);
  s.v_to = cfg.get_double(m, "v_to", s.v_to);
  s.v_td = cfg.get_double(m, "v_td", s.v_td);
  s.n_qp = cfg.get_int(m, "n_qp", s.n_qp);
  s.mu = cfg.get_double(m, "mu", s.mu);
  s.sigma = cfg.get_double(m, "sigma", s.sigma);
  s.rho = cfg.get_double(m, "rho", s.rho);
  s.over_relax = cfg.get_double(m, "over_relax", s.over_relax);
  s.warm_start = cfg.get_bool(m, "warm_start", s.warm_start);
  return s;
}

EnvConfig env_config_from_config(const Config& cfg, const ModelParams& model) {
  EnvConfig e;
  const std::string s = "env";
  e.control_dt = cfg.get_double(s, "control_dt", e.control_dt);
  e.substeps = cfg.get_int(s, "substeps", e.substeps);
  e.k_n = cfg.get_double(s, "k_n", e.k_n);
  e.c_n = cfg.get_double(s, "c_n", e.c_n);
  e.v_slip = cfg.get_double(s, "v_slip", e.v_slip);
  const std::string terrain = cfg.get_str(s, "terrain", "flat");
  e.terrain.kind =
      terrain == "heightfield" ? TerrainConfig::Kind::kHeightfield : TerrainConfig::Kind::kFlat;
  e.terrain.amplitude = cfg.get_double(s, "terrain_amplitude", e.terrain.amplitude);
  e.terrain.cell = cfg.get_double(s, "terrain_cell", e.terrain.cell);
  e.terrain.seed = static_cast<uint64_t>(cfg.get_int(s, "terrain_seed", 0));
  const double nominal_h = model.nominal_height();
  e.cmd_height_lo = cfg.get_double(s, "cmd_height_lo", nominal_h);
  e.cmd_height_hi = cfg.get_double(s, "cmd_height_hi", nominal_h);
  e.cmd_vx_lo = cfg.get_double(s, "cmd_vx_lo", e.cmd_vx_lo);
  e.cmd_vx_hi = cfg.get_double(s, "cmd_vx_hi", e.cmd_vx_hi);
  e.episode_length = cfg.get_double(s, "episode_length", e.episode_length);
  e.friction_lo = cfg.get_double(s, "friction_lo", e.friction_lo);
  e.friction_hi = cfg.get_double(s, "friction_hi", e.friction_hi);
  e.mass_scale_lo = cfg.get_double(s, "mass_scale_lo", e.mass_scale_lo);
  e.mass_scale_hi = cfg.get_double(s, "mass_scale_hi", e.mass_scale_hi);
  e.init_vx = cfg.get_double(s, "init_vx", e.init_vx);
  e.init_pitch_rate = cfg.get_double(s, "init_pitch_rate", e.init_pitch_rate);
  e.gait_period = cfg.get_double("gait", "period", e.gait_period);
  e.phase_switch = cfg.get_double("gait", "phase_switch", e.phase_switch);
  const double off_r = cfg.get_double("gait", "offset_right", 0.5);
  const double off_l = cfg.get_double("gait", "offset_left", 0.0);
  e.phase_offsets = {off_r, off_r, off_l, off_l};
  e.sigma_r = cfg.get_double("rewards", "sigma", e.sigma_r);
  e.weights.lin_vel = cfg.get_double("rewards", "lin_vel", e.weights.lin_vel);
  e.weights.ang_vel = cfg.get_double("rewards", "ang_vel", e.weights.ang_vel);
  e.weights.action_rate1 = cfg.get_double("rewards", "action_rate1", e.weights.action_rate1);
  e.weights.action_rate2 = cfg.get_double("rewards", "action_rate2", e.weights.action_rate2);
  e.weights.torques = cfg.get_double("rewards", "torques", e.weights.torques);
  e.weights.orientation = cfg.get_double("rewards", "orientation", e.weights.orientation);
  e.weights.height = cfg.get_double("rewards", "height", e.weights.height);
  e.weights.joint_reg = cfg.get_double("rewards", "joint_reg", e.weights.joint_reg);
  e.weights.self_collision = cfg.get_double("rewards", "self_collision", e.weights.self_collision);
  e.weights.termination = cfg.get_double("rewards", "termination", e.weights.termination);
  e.height_lo = cfg.get_double(s, "term_height_lo", e.height_lo);
  e.height_hi = cfg.get_double(s, "term_height_hi", e.height_hi);
  e.pitch_max = cfg.get_double(s, "term_pitch", e.pitch_max);
  e.vel_max = cfg.get_double(s, "term_vel", e.vel_max);
  e.collision_radius = cfg.get_double(s, "collision_radius", e.collision_radius);
  return e;
}

PpoConfig ppo_config_from_config(const Config& cfg) {
  PpoConfig p;
  const std::string s = "ppo";
  p.gamma = cfg.get_double(s, "gamma", p.gamma);
  p.lam_gae = cfg.get_double(s, "lam_gae", p.lam_gae);
  p.clip_eps = cfg.get_double(s, "clip_eps", p.clip_eps);
  p.epochs = cfg.get_int(s, "epochs", p.epochs);
  p.minibatches = cfg.get_int(s, "minibatches", p.minibatches);
  p.lr = cfg.get_double(s, "lr", p.lr);
  p.entropy_coef = cfg.get_double(s, "entropy_coef", p.entropy_coef);
  p.value_coef = cfg.get_double(s, "value_coef", p.value_coef);
  p.max_grad_norm = cfg.get_double(s, "max_grad_norm", p.max_grad_norm);
  p.n_steps = cfg.get_int(s, "n_steps", p.n_steps);
  p.lambda_blend = cfg.get_double(s, "lambda_blend", p.lambda_blend);
  p.strategy = blend_strategy_from_string(cfg.get_str(s, "strategy", "joint-torque"));
  p.hidden = cfg.get_int(s, "hidden", p.hidden);
  p.obs.v_mpc_scale = cfg.get_double(s, "v_mpc_scale", p.obs.v_mpc_scale);
  p.obs.v_mpc_sentinel = cfg.get_double(s, "v_mpc_sentinel", p.obs.v_mpc_sentinel);
  return p;
}

}  // namespace rmpc
