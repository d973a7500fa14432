#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace rmpc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

// Sentinel for one-sided constraint bounds, clamped during projection.
inline constexpr double kInf = 1e30;

inline constexpr const char* kVersion = "0.1.0";

// Malformed sparse structure, shape mismatch, bad file content.
struct StructuralError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Exact zero pivot or numerically singular map.
struct SingularityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite iterates inside an iterative solver.
struct DivergenceError : std::runtime_error {
  DivergenceError(const std::string& what, int iter)
      : std::runtime_error(what), iteration(iter) {}
  int iteration;
};

// Simulation state became non-finite.
struct SimBlowupError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace rmpc
