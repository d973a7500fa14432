#include "rmpc/policy.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace rmpc {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kLogSqrt2Pi = 0.91893853320467274178032973640562;

inline double elu(double x) { return x > 0.0 ? x : std::expm1(x); }

Vec mlp_forward(const MlpParams& net, const Vec& in, std::vector<Vec>* pre,
                std::vector<Vec>* post) {
  Vec h = in;
  const int n_layers = static_cast<int>(net.W.size());
  if (post) post->assign(1, h);
  for (int l = 0; l < n_layers; ++l) {
    Vec z = net.W[l] * h + net.b[l];
    if (pre) pre->push_back(z);
    if (l + 1 < n_layers) {
      h = z.unaryExpr([](double x) { return elu(x); });
      if (post) post->push_back(h);
    } else {
      h = z;
    }
  }
  return h;
}
}  // namespace

int MlpParams::num_params() const {
  int n = 0;
  for (size_t l = 0; l < W.size(); ++l) n += static_cast<int>(W[l].size() + b[l].size());
  return n;
}

void MlpParams::flatten_into(double* out) const {
  for (size_t l = 0; l < W.size(); ++l) {
    std::memcpy(out, W[l].data(), W[l].size() * sizeof(double));
    out += W[l].size();
    std::memcpy(out, b[l].data(), b[l].size() * sizeof(double));
    out += b[l].size();
  }
}

void MlpParams::unflatten_from(const double* in) {
  for (size_t l = 0; l < W.size(); ++l) {
    std::memcpy(W[l].data(), in, W[l].size() * sizeof(double));
    in += W[l].size();
    std::memcpy(b[l].data(), in, b[l].size() * sizeof(double));
    in += b[l].size();
  }
}

PolicyParams init_policy(int obs_dim, int act_dim, int hidden, uint64_t seed) {
  PolicyParams p;
  p.obs_dim = obs_dim;
  p.act_dim = act_dim;
  p.hidden = hidden;
  Rng rng(seed, 0xB0117);

  auto xavier = [&](int rows, int cols) {
    const double limit = std::sqrt(6.0 / (rows + cols));
    Mat W(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) W(i, j) = rng.uniform(-limit, limit);
    return W;
  };
  auto build = [&](MlpParams& net, int out_dim, bool zero_final) {
    const int sizes[5] = {obs_dim, hidden, hidden, hidden, out_dim};
    for (int l = 0; l < 4; ++l) {
      net.W.push_back(xavier(sizes[l + 1], sizes[l]));
      net.b.push_back(Vec::Zero(sizes[l + 1]));
    }
    if (zero_final) net.W.back().setZero();
  };
  build(p.pi, act_dim, /*zero_final=*/true);
  build(p.value, 1, /*zero_final=*/false);
  p.log_std = Vec::Constant(act_dim, std::log(0.5));
  return p;
}

PolicyOutput policy_forward(const PolicyParams& params, const Vec& obs, ForwardCache* cache) {
  if (obs.size() != params.obs_dim) throw StructuralError("policy_forward: obs dim mismatch");
  PolicyOutput out;
  if (cache) {
    cache->pi_pre.clear();
    cache->pi_post.clear();
    cache->v_pre.clear();
    cache->v_post.clear();
    out.mean = mlp_forward(params.pi, obs, &cache->pi_pre, &cache->pi_post);
    out.value = mlp_forward(params.value, obs, &cache->v_pre, &cache->v_post)[0];
  } else {
    out.mean = mlp_forward(params.pi, obs, nullptr, nullptr);
    out.value = mlp_forward(params.value, obs, nullptr, nullptr)[0];
  }
  out.log_std = params.log_std;
  return out;
}

Vec observe(const EnvState& state, const MpcSolution& mpc, const ObsSettings& settings) {
  Vec o(kObsDim);
  const RobotState& r = state.robot;
  o[0] = r.q[1];
  o[1] = std::sin(r.q[2]);
  o[2] = std::cos(r.q[2]);
  o.segment<kNumJoints>(3) = r.q.tail<kNumJoints>();
  o[9] = r.qd[0];
  o[10] = r.qd[1];
  o[11] = r.qd[2];
  o.segment<kNumJoints>(12) = r.qd.tail<kNumJoints>();
  // Per-foot phase features; toe and heel share a phase, right foot first.
  const double phase_r = state.gait.contact_phase(0);
  const double phase_l = state.gait.contact_phase(2);
  o[18] = std::sin(kTwoPi * phase_r);
  o[19] = std::cos(kTwoPi * phase_r);
  o[20] = std::sin(kTwoPi * phase_l);
  o[21] = std::cos(kTwoPi * phase_l);
  o[22] = mpc.status == MpcStatus::kOk ? settings.v_mpc_scale * mpc.v_mpc
                                       : settings.v_mpc_sentinel;
  return o;
}

BlendStrategy blend_strategy_from_string(const std::string& name) {
  if (name == "joint-joint" || name == "joint_joint") return BlendStrategy::kJointJoint;
  if (name == "joint-torque" || name == "joint_torque") return BlendStrategy::kJointTorque;
  if (name == "torque-torque" || name == "torque_torque") return BlendStrategy::kTorqueTorque;
  throw StructuralError("unknown blend strategy: " + name);
}

std::string to_string(BlendStrategy s) {
  switch (s) {
    case BlendStrategy::kJointJoint: return "joint-joint";
    case BlendStrategy::kJointTorque: return "joint-torque";
    case BlendStrategy::kTorqueTorque: return "torque-torque";
  }
  return "unknown";
}

Vec6 blend(const Vec6& tau_mpc, const Vec6& tau_ff, const Vec6& q_set, const Vec6& qd_set,
           const Vec6& action, const RobotState& state, BlendStrategy strategy, double lambda,
           const ModelParams& model) {
  switch (strategy) {
    case BlendStrategy::kJointJoint: {
      const Vec6 q_cmd = q_set + lambda * action;
      return pd_torque(model, q_cmd, qd_set, state, tau_ff);
    }
    case BlendStrategy::kJointTorque: {
      const Vec6 qj = state.q.tail<kNumJoints>();
      const Vec6 qdj = state.qd.tail<kNumJoints>();
      const Vec6 q_hat = nominal_pose(model).tail<kNumJoints>();
      const Vec6 tau_res =
          model.kp.cwiseProduct(action + q_hat - qj) - model.kd.cwiseProduct(qdj);
      const Vec6 tau = tau_mpc + lambda * tau_res;
      return tau.cwiseMax(-model.tau_limit).cwiseMin(model.tau_limit);
    }
    case BlendStrategy::kTorqueTorque: {
      const Vec6 tau = tau_mpc + lambda * action;
      return tau.cwiseMax(-model.tau_limit).cwiseMin(model.tau_limit);
    }
  }
  throw StructuralError("blend: unknown strategy");
}

double gaussian_log_prob(const Vec& action, const Vec& mean, const Vec& log_std) {
  double lp = 0.0;
  for (int i = 0; i < action.size(); ++i) {
    const double s = std::exp(log_std[i]);
    const double z = (action[i] - mean[i]) / s;
    lp += -0.5 * z * z - log_std[i] - kLogSqrt2Pi;
  }
  return lp;
}

namespace {
constexpr char kCkptMagic[8] = {'R', 'M', 'P', 'C', 'C', 'K', '0', '1'};

void write_mlp(std::ofstream& os, const MlpParams& net) {
  const uint32_t layers = static_cast<uint32_t>(net.W.size());
  os.write(reinterpret_cast<const char*>(&layers), sizeof(layers));
  for (size_t l = 0; l < net.W.size(); ++l) {
    const uint32_t rows = static_cast<uint32_t>(net.W[l].rows());
    const uint32_t cols = static_cast<uint32_t>(net.W[l].cols());
    os.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
    os.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
    os.write(reinterpret_cast<const char*>(net.W[l].data()), rows * cols * sizeof(double));
    os.write(reinterpret_cast<const char*>(net.b[l].data()), rows * sizeof(double));
  }
}

MlpParams read_mlp(std::ifstream& is) {
  MlpParams net;
  uint32_t layers = 0;
  is.read(reinterpret_cast<char*>(&layers), sizeof(layers));
  for (uint32_t l = 0; l < layers; ++l) {
    uint32_t rows = 0, cols = 0;
    is.read(reinterpret_cast<char*>(&rows), sizeof(rows));
    is.read(reinterpret_cast<char*>(&cols), sizeof(cols));
    Mat W(rows, cols);
    Vec b(rows);
    is.read(reinterpret_cast<char*>(W.data()), rows * cols * sizeof(double));
    is.read(reinterpret_cast<char*>(b.data()), rows * sizeof(double));
    net.W.push_back(std::move(W));
    net.b.push_back(std::move(b));
  }
  return net;
}
}  // namespace

void save_checkpoint(const std::string& path, const PolicyParams& params, uint64_t config_hash) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw StructuralError("save_checkpoint: cannot open " + path);
  os.write(kCkptMagic, sizeof(kCkptMagic));
  const uint32_t version = 1;
  os.write(reinterpret_cast<const char*>(&version), sizeof(version));
  os.write(reinterpret_cast<const char*>(&config_hash), sizeof(config_hash));
  const int32_t dims[3] = {params.obs_dim, params.act_dim, params.hidden};
  os.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  write_mlp(os, params.pi);
  write_mlp(os, params.value);
  os.write(reinterpret_cast<const char*>(params.log_std.data()),
           params.act_dim * sizeof(double));
}

PolicyParams load_checkpoint(const std::string& path, uint64_t* config_hash) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw StructuralError("load_checkpoint: cannot open " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (std::memcmp(magic, kCkptMagic, sizeof(magic)) != 0)
    throw StructuralError("load_checkpoint: bad magic in " + path);
  uint32_t version = 0;
  is.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (version != 1) throw StructuralError("load_checkpoint: unsupported version");
  uint64_t hash = 0;
  is.read(reinterpret_cast<char*>(&hash), sizeof(hash));
  if (config_hash) *config_hash = hash;
  int32_t dims[3];
  is.read(reinterpret_cast<char*>(dims), sizeof(dims));
  PolicyParams p;
  p.obs_dim = dims[0];
  p.act_dim = dims[1];
  p.hidden = dims[2];
  p.pi = read_mlp(is);
  p.value = read_mlp(is);
  p.log_std.resize(p.act_dim);
  is.read(reinterpret_cast<char*>(p.log_std.data()), p.act_dim * sizeof(double));
  if (!is) throw StructuralError("load_checkpoint: truncated file " + path);
  return p;
}

}  // namespace rmpc
