#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>

#include "rmpc/csc.hpp"
#include "rmpc/ldl.hpp"
#include "rmpc/ruiz.hpp"
#include "rmpc/types.hpp"

namespace rmpc {

/// Convex QP with two-sided linear constraints:
///   min 1/2 x^T P x + q^T x   s.t.  lo <= A x <= hi
/// P is PSD with only its upper triangle stored. Equalities are encoded as
/// lo == hi, one-sided rows via the +-kInf sentinel.
struct QpProblem {
  CscMatrix P;  // n x n, upper triangle
  Vec q_lin;    // n
  CscMatrix A;  // m x n
  Vec lo, hi;   // m

  int num_vars() const { return P.ncols; }
  int num_cons() const { return A.nrows; }
};

struct AdmmSettings {
  double sigma = 1e-6;
  double rho = 0.1;
  double over_relax = 1.6;  // alpha in (0, 2); 1 disables over-relaxation
  int n_iters = 25;         // fixed iteration budget, no early exit
  int ruiz_iters = 10;      // 0 disables equilibration
  double eps_exit = 0.0;    // >0 enables tolerance-based exit (oracle tests only)
};

struct QpSolution {
  Vec x;      // primal
  Vec y;      // dual
  Vec z_con;  // projected constraint values, within [lo, hi] up to fp noise
  double prim_res = 0.0;
  double dual_res = 0.0;
  double objective = 0.0;
  int iters_run = 0;
};

/// KKT matrix [[P + sigma I, A^T], [A, -1/rho I]], upper triangle in canonical
/// CSC. The pattern is a deterministic function of the patterns of P and A;
/// every diagonal entry is structurally present.
CscMatrix assemble_kkt(const CscMatrix& P, const CscMatrix& A, double sigma, double rho);

/// b_K = [sigma x - q_lin ; z_con - y / rho]
void kkt_rhs(const Vec& x, const Vec& z_con, const Vec& y, const Vec& q_lin, double sigma,
             double rho, Vec& b);

/// 1/2 x^T P x + q_lin^T x
double qp_value(const QpProblem& prob, const Vec& x);

/// Operator-splitting QP solver run for a fixed iteration budget. The problem
/// data are Ruiz-equilibrated, the KKT system is assembled and factorized
/// once, and each iteration is one linear solve plus projections in the
/// scaled space; solutions and residuals are reported unscaled. Stages are
/// split out so callers can time them individually.
class AdmmSolver {
 public:
  AdmmSolver(const QpProblem& prob, const AdmmSettings& settings);

  void equilibrate();
  void assemble();
  void factorize();  // throws SingularityError on a structurally singular KKT
  void warm_start(const Vec& x0, const Vec& y0);
  /// Runs the configured number of iterations; throws DivergenceError if the
  /// iterates become non-finite.
  QpSolution run();

  /// Test instrumentation, called after every iteration.
  std::function<void(int iter, const Vec& x, const Vec& z, const Vec& y)> on_iteration;

 private:
  const QpProblem* prob_;
  AdmmSettings settings_;
  int n_ = 0, m_ = 0;
  CscMatrix kkt_;
  RuizScaling scaling_;
  bool scaled_ = false;
  CscMatrix P_scaled_, A_scaled_;
  Vec q_scaled_, lo_scaled_, hi_scaled_;
  Vec warm_x_, warm_y_;
  bool has_warm_ = false;
  std::unique_ptr<SparseLdl> ldl_;
  LdlWorkspace ws_;
  Vec x_, y_, z_, b_, work_m_;
};

/// One-shot solve per the module contract.
QpSolution admm_solve(const QpProblem& prob, const AdmmSettings& settings,
                      const std::optional<std::pair<Vec, Vec>>& warm = std::nullopt);

/// Single-file text dump for failure reproduction (matrices in Matrix Market
/// blocks, vectors as plain text).
void qp_dump(std::ostream& os, const QpProblem& prob);
QpProblem qp_load(std::istream& is);

}  // namespace rmpc
