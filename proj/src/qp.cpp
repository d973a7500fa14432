#include "rmpc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace rmpc {

CscMatrix assemble_kkt(const CscMatrix& P, const CscMatrix& A, double sigma, double rho) {
  const int n = P.ncols;
  const int m = A.nrows;
  if (P.nrows != n) throw StructuralError("assemble_kkt: P must be square");
  if (A.ncols != n) throw StructuralError("assemble_kkt: A column count != P dimension");

  std::vector<Triplet> ts;
  ts.reserve(P.nnz() + A.nnz() + n + m);
  for (int j = 0; j < n; ++j) {
    for (int p = P.col_ptr[j]; p < P.col_ptr[j + 1]; ++p) {
      if (P.row_idx[p] > j)
        throw StructuralError("assemble_kkt: P has entries below the diagonal");
      ts.push_back({P.row_idx[p], j, P.values[p]});
    }
    ts.push_back({j, j, sigma});
  }
  // A^T goes into the upper-right block; the lower-left block is implied.
  for (int j = 0; j < A.ncols; ++j)
    for (int p = A.col_ptr[j]; p < A.col_ptr[j + 1]; ++p)
      ts.push_back({j, n + A.row_idx[p], A.values[p]});
  for (int i = 0; i < m; ++i) ts.push_back({n + i, n + i, -1.0 / rho});

  return csc_from_triplets(ts, n + m, n + m);
}

void kkt_rhs(const Vec& x, const Vec& z_con, const Vec& y, const Vec& q_lin, double sigma,
             double rho, Vec& b) {
  const int n = static_cast<int>(x.size());
  const int m = static_cast<int>(z_con.size());
  if (y.size() != m || q_lin.size() != n) throw StructuralError("kkt_rhs: dimension mismatch");
  b.resize(n + m);
  b.head(n) = sigma * x - q_lin;
  b.tail(m) = z_con - y / rho;
}

double qp_value(const QpProblem& prob, const Vec& x) {
  Vec px(prob.num_vars());
  csc_symv_upper(prob.P, x, px);
  return 0.5 * x.dot(px) + prob.q_lin.dot(x);
}

AdmmSolver::AdmmSolver(const QpProblem& prob, const AdmmSettings& settings)
    : prob_(&prob), settings_(settings), n_(prob.num_vars()), m_(prob.num_cons()) {
  if (prob.A.ncols != n_ || prob.lo.size() != m_ || prob.hi.size() != m_ ||
      prob.q_lin.size() != n_)
    throw StructuralError("AdmmSolver: inconsistent problem dimensions");
  if (settings.n_iters < 1) throw StructuralError("AdmmSolver: n_iters must be >= 1");
  x_ = Vec::Zero(n_);
  y_ = Vec::Zero(m_);
  z_ = Vec::Zero(m_);
  work_m_.resize(m_);
}

void AdmmSolver::equilibrate() {
  if (settings_.ruiz_iters <= 0) return;
  // Modified Ruiz on [[P, A^T], [A, 0]]: the problem data are scaled so the
  // fixed ADMM penalties act on comparably sized rows.
  std::vector<Triplet> ts;
  ts.reserve(prob_->P.nnz() + prob_->A.nnz());
  for (int j = 0; j < n_; ++j)
    for (int p = prob_->P.col_ptr[j]; p < prob_->P.col_ptr[j + 1]; ++p)
      ts.push_back({prob_->P.row_idx[p], j, prob_->P.values[p]});
  for (int j = 0; j < prob_->A.ncols; ++j)
    for (int p = prob_->A.col_ptr[j]; p < prob_->A.col_ptr[j + 1]; ++p)
      ts.push_back({j, n_ + prob_->A.row_idx[p], prob_->A.values[p]});
  CscMatrix pattern = csc_from_triplets(ts, n_ + m_, n_ + m_);
  Vec dummy = Vec::Zero(n_ + m_);
  scaling_ = ruiz_equilibrate(pattern, dummy, settings_.ruiz_iters);
  scaled_ = true;

  // Scaled copies of the problem data.
  const auto e = scaling_.col_scale.head(n_);
  const auto d = scaling_.col_scale.tail(m_);
  P_scaled_ = prob_->P;
  for (int j = 0; j < n_; ++j)
    for (int p = P_scaled_.col_ptr[j]; p < P_scaled_.col_ptr[j + 1]; ++p)
      P_scaled_.values[p] *= e[P_scaled_.row_idx[p]] * e[j];
  A_scaled_ = prob_->A;
  for (int j = 0; j < A_scaled_.ncols; ++j)
    for (int p = A_scaled_.col_ptr[j]; p < A_scaled_.col_ptr[j + 1]; ++p)
      A_scaled_.values[p] *= d[A_scaled_.row_idx[p]] * e[j];
  q_scaled_ = prob_->q_lin.cwiseProduct(e);
  lo_scaled_ = prob_->lo.cwiseProduct(d);
  hi_scaled_ = prob_->hi.cwiseProduct(d);
}

void AdmmSolver::assemble() {
  kkt_ = scaled_ ? assemble_kkt(P_scaled_, A_scaled_, settings_.sigma, settings_.rho)
                 : assemble_kkt(prob_->P, prob_->A, settings_.sigma, settings_.rho);
}

void AdmmSolver::factorize() { ldl_ = std::make_unique<SparseLdl>(kkt_); }

void AdmmSolver::warm_start(const Vec& x0, const Vec& y0) {
  if (x0.size() != n_ || y0.size() != m_)
    throw StructuralError("AdmmSolver::warm_start: dimension mismatch");
  warm_x_ = x0;
  warm_y_ = y0;
  has_warm_ = true;
}

QpSolution AdmmSolver::run() {
  if (!ldl_) {
    equilibrate();
    assemble();
    factorize();
  }
  if (kkt_.ncols != n_ + m_)
    throw StructuralError("AdmmSolver::run: assemble() must precede run()");
  const CscMatrix& A = scaled_ ? A_scaled_ : prob_->A;
  const CscMatrix& P = scaled_ ? P_scaled_ : prob_->P;
  const Vec& q = scaled_ ? q_scaled_ : prob_->q_lin;
  const Vec& lo = scaled_ ? lo_scaled_ : prob_->lo;
  const Vec& hi = scaled_ ? hi_scaled_ : prob_->hi;

  if (has_warm_) {
    if (scaled_) {
      x_ = warm_x_.cwiseQuotient(scaling_.col_scale.head(n_));
      y_ = warm_y_.cwiseQuotient(scaling_.col_scale.tail(m_));
    } else {
      x_ = warm_x_;
      y_ = warm_y_;
    }
    csc_gemv(A, x_, z_);
    z_ = z_.cwiseMax(lo).cwiseMin(hi);
  }

  const double rho = settings_.rho;
  const double alpha = settings_.over_relax;
  const double rho_inv = 1.0 / rho;

  auto recover = [&](QpSolution& sol) {
    if (scaled_) {
      sol.x = x_.cwiseProduct(scaling_.col_scale.head(n_));
      sol.y = y_.cwiseProduct(scaling_.col_scale.tail(m_));
      sol.z_con = z_.cwiseQuotient(scaling_.col_scale.tail(m_));
    } else {
      sol.x = x_;
      sol.y = y_;
      sol.z_con = z_;
    }
  };

  QpSolution sol;
  int iter = 0;
  for (; iter < settings_.n_iters; ++iter) {
    kkt_rhs(x_, z_, y_, q, settings_.sigma, rho, b_);
    ldl_->solve_inplace(b_, ws_);
    if (!b_.allFinite())
      throw DivergenceError("admm: non-finite iterate at iteration " + std::to_string(iter),
                            iter);

    const auto x_tilde = b_.head(n_);
    const auto nu = b_.tail(m_);
    work_m_ = z_ + rho_inv * (nu - y_);  // z_tilde

    x_ = alpha * x_tilde + (1.0 - alpha) * x_;
    work_m_ = alpha * work_m_ + (1.0 - alpha) * z_;  // relaxed z candidate
    z_ = (work_m_ + rho_inv * y_).cwiseMax(lo).cwiseMin(hi);
    y_ += rho * (work_m_ - z_);

    if (on_iteration) {
      recover(sol);
      on_iteration(iter, sol.x, sol.z_con, sol.y);
    }

    if (settings_.eps_exit > 0.0) {
      recover(sol);
      Vec ax(m_), px(n_), aty(n_);
      csc_gemv(prob_->A, sol.x, ax);
      csc_symv_upper(prob_->P, sol.x, px);
      csc_gemv_t(prob_->A, sol.y, aty);
      const double pr = m_ > 0 ? (ax - sol.z_con).lpNorm<Eigen::Infinity>() : 0.0;
      const double dr = (px + prob_->q_lin + aty).lpNorm<Eigen::Infinity>();
      if (pr < settings_.eps_exit && dr < settings_.eps_exit) {
        ++iter;
        break;
      }
    }
  }

  recover(sol);
  sol.iters_run = iter;
  Vec ax(m_), px(n_), aty(n_);
  csc_gemv(prob_->A, sol.x, ax);
  csc_symv_upper(prob_->P, sol.x, px);
  csc_gemv_t(prob_->A, sol.y, aty);
  sol.prim_res = m_ > 0 ? (ax - sol.z_con).lpNorm<Eigen::Infinity>() : 0.0;
  sol.dual_res = (px + prob_->q_lin + aty).lpNorm<Eigen::Infinity>();
  sol.objective = qp_value(*prob_, sol.x);
  return sol;
}

QpSolution admm_solve(const QpProblem& prob, const AdmmSettings& settings,
                      const std::optional<std::pair<Vec, Vec>>& warm) {
  AdmmSolver solver(prob, settings);
  if (warm) solver.warm_start(warm->first, warm->second);
  return solver.run();
}

void qp_dump(std::ostream& os, const QpProblem& prob) {
  os << "# rmpc qp v1\n";
  os << prob.num_vars() << " " << prob.num_cons() << "\n";
  os.precision(17);
  os << "[P]\n";
  mm_write(os, prob.P);
  os << "[q]\n";
  for (int i = 0; i < prob.q_lin.size(); ++i) os << prob.q_lin[i] << "\n";
  os << "[A]\n";
  mm_write(os, prob.A);
  os << "[lo]\n";
  for (int i = 0; i < prob.lo.size(); ++i) os << prob.lo[i] << "\n";
  os << "[hi]\n";
  for (int i = 0; i < prob.hi.size(); ++i) os << prob.hi[i] << "\n";
}

namespace {
void expect_line(std::istream& is, const std::string& want) {
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line == want) return;
    throw StructuralError("qp_load: expected '" + want + "', got '" + line + "'");
  }
  throw StructuralError("qp_load: unexpected end of file, wanted '" + want + "'");
}

Vec read_vec(std::istream& is, int len) {
  Vec v(len);
  for (int i = 0; i < len; ++i)
    if (!(is >> v[i])) throw StructuralError("qp_load: truncated vector");
  std::string rest;
  std::getline(is, rest);
  return v;
}
}  // namespace

QpProblem qp_load(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("# rmpc qp", 0) != 0)
    throw StructuralError("qp_load: missing header");
  int n = 0, m = 0;
  is >> n >> m;
  std::getline(is, line);
  QpProblem prob;
  expect_line(is, "[P]");
  prob.P = mm_read(is);
  std::getline(is, line);
  expect_line(is, "[q]");
  prob.q_lin = read_vec(is, n);
  expect_line(is, "[A]");
  prob.A = mm_read(is);
  std::getline(is, line);
  expect_line(is, "[lo]");
  prob.lo = read_vec(is, m);
  expect_line(is, "[hi]");
  prob.hi = read_vec(is, m);
  if (prob.P.ncols != n || prob.A.nrows != m)
    throw StructuralError("qp_load: inconsistent dimensions");
  return prob;
}

}  // namespace rmpc
