#include <doctest.h>

#include <Eigen/Dense>
#include <sstream>

#include "oracles.hpp"
#include "rmpc/qp.hpp"
#include "rmpc/rng.hpp"

using namespace rmpc;

TEST_CASE("assemble_kkt: scalar example") {
  const CscMatrix P = CscMatrix::identity(1);
  const CscMatrix A = csc_from_triplets({{0, 0, 1.0}}, 1, 1);
  const Mat K = assemble_kkt(P, A, 1.0, 1.0).to_dense_symmetric();
  Mat expect(2, 2);
  expect << 2, 1, 1, -1;
  CHECK((K - expect).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("assemble_kkt: zero P block example") {
  CscMatrix P;  // structurally empty 2x2
  P.nrows = P.ncols = 2;
  P.col_ptr = {0, 0, 0};
  const CscMatrix A = CscMatrix::identity(2);
  const Mat K = assemble_kkt(P, A, 1e-6, 0.1).to_dense_symmetric();
  Mat expect = Mat::Zero(4, 4);
  expect.topLeftCorner(2, 2) = 1e-6 * Mat::Identity(2, 2);
  expect.topRightCorner(2, 2) = Mat::Identity(2, 2);
  expect.bottomLeftCorner(2, 2) = Mat::Identity(2, 2);
  expect.bottomRightCorner(2, 2) = -10.0 * Mat::Identity(2, 2);
  CHECK((K - expect).lpNorm<Eigen::Infinity>() < 1e-18);
}

TEST_CASE("assemble_kkt: random instance matches the dense oracle") {
  Rng rng(101);
  for (int rep = 0; rep < 10; ++rep) {
    const int n = 3 + rng.uniform_int(20);
    const int m = 2 + rng.uniform_int(25);
    Mat Pd = Mat::Zero(n, n);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i <= j; ++i)
        if (rng.uniform() < 0.3) {
          Pd(i, j) = rng.uniform(-1.0, 1.0);
          Pd(j, i) = Pd(i, j);
        }
    Mat Ad = Mat::Zero(m, n);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j)
        if (rng.uniform() < 0.3) Ad(i, j) = rng.uniform(-1.0, 1.0);
    const double sigma = 1e-6, rho = 0.1;
    const CscMatrix K = assemble_kkt(oracles::dense_to_upper_csc(Pd), oracles::dense_to_csc(Ad),
                                     sigma, rho);
    Mat expect = Mat::Zero(n + m, n + m);
    expect.topLeftCorner(n, n) = Pd + sigma * Mat::Identity(n, n);
    expect.topRightCorner(n, m) = Ad.transpose();
    expect.bottomLeftCorner(m, n) = Ad;
    expect.bottomRightCorner(m, m) = -(1.0 / rho) * Mat::Identity(m, m);
    CHECK((K.to_dense_symmetric() - expect).lpNorm<Eigen::Infinity>() < 1e-15);
    // Diagonal must be structurally present everywhere.
    for (int j = 0; j < n + m; ++j) {
      bool has_diag = false;
      for (int p = K.col_ptr[j]; p < K.col_ptr[j + 1]; ++p)
        if (K.row_idx[p] == j) has_diag = true;
      CHECK(has_diag);
    }
  }
}

TEST_CASE("assemble_kkt: dimension mismatch") {
  const CscMatrix P = CscMatrix::identity(2);
  const CscMatrix A = csc_from_triplets({{0, 0, 1.0}}, 1, 3);
  CHECK_THROWS_AS(assemble_kkt(P, A, 1.0, 1.0), StructuralError);
}

TEST_CASE("kkt_rhs examples") {
  Vec b;
  kkt_rhs(Vec::Zero(2), Vec::Zero(1), Vec::Zero(1), Vec::Zero(2), 1e-6, 0.1, b);
  CHECK(b.lpNorm<Eigen::Infinity>() == 0.0);

  kkt_rhs(Vec::Constant(1, 1.0), Vec::Constant(1, 2.0), Vec::Constant(1, 3.0),
          Vec::Constant(1, 0.0), 1.0, 1.0, b);
  CHECK(b[0] == 1.0);
  CHECK(b[1] == -1.0);

  Rng rng(5);
  Vec x(3), z(2), y(2), q(3);
  for (int i = 0; i < 3; ++i) x[i] = rng.normal(), q[i] = rng.normal();
  for (int i = 0; i < 2; ++i) z[i] = rng.normal(), y[i] = rng.normal();
  kkt_rhs(x, z, y, q, 1e-3, 0.25, b);
  CHECK((b.head(3) - (1e-3 * x - q)).lpNorm<Eigen::Infinity>() < 1e-15);
  CHECK((b.tail(2) - (z - y / 0.25)).lpNorm<Eigen::Infinity>() < 1e-15);
}

TEST_CASE("qp_value examples") {
  QpProblem prob;
  prob.P = oracles::dense_to_upper_csc(Mat::Identity(2, 2));
  prob.q_lin = Vec::Zero(2);
  prob.A = csc_from_triplets({{0, 0, 1.0}}, 1, 2);
  prob.lo = Vec::Constant(1, -kInf);
  prob.hi = Vec::Constant(1, kInf);
  CHECK(qp_value(prob, Vec::Zero(2)) == 0.0);
  CHECK(qp_value(prob, Vec::Ones(2)) == doctest::Approx(1.0));

  Rng rng(7);
  const auto qp = oracles::random_strictly_convex_qp(rng, 5, 3);
  const QpProblem sp = oracles::to_sparse_problem(qp);
  Vec x(5);
  for (int i = 0; i < 5; ++i) x[i] = rng.normal();
  CHECK(qp_value(sp, x) ==
        doctest::Approx(0.5 * x.dot(qp.P * x) + qp.q.dot(x)).epsilon(1e-12));
}

TEST_CASE("admm: projection onto a one-sided bound") {
  // min 1/2 x^2  s.t.  x >= 1  ->  x* = 1
  QpProblem prob;
  prob.P = CscMatrix::identity(1);
  prob.q_lin = Vec::Zero(1);
  prob.A = CscMatrix::identity(1);
  prob.lo = Vec::Constant(1, 1.0);
  prob.hi = Vec::Constant(1, kInf);
  AdmmSettings settings;
  settings.n_iters = 200;
  const QpSolution sol = admm_solve(prob, settings);
  CHECK(std::abs(sol.x[0] - 1.0) < 1e-4);
  CHECK(sol.z_con[0] >= 1.0 - 1e-6);
}

TEST_CASE("admm: unconstrained problem reaches the analytic optimum") {
  Rng rng(11);
  const int n = 6;
  QpProblem prob;
  prob.P = oracles::dense_to_upper_csc(Mat::Identity(n, n));
  prob.q_lin.resize(n);
  for (int i = 0; i < n; ++i) prob.q_lin[i] = rng.uniform(-1.0, 1.0);
  prob.A.nrows = 0;
  prob.A.ncols = n;
  prob.A.col_ptr.assign(n + 1, 0);
  prob.lo.resize(0);
  prob.hi.resize(0);
  AdmmSettings settings;
  settings.n_iters = 100;
  const QpSolution sol = admm_solve(prob, settings);
  CHECK((sol.x + prob.q_lin).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("admm: matches the active-set enumeration oracle") {
  Rng rng(2024);
  int checked = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 2 + rng.uniform_int(7);
    const int m = 1 + rng.uniform_int(8);
    const auto qp = oracles::random_strictly_convex_qp(rng, n, m);
    Vec x_star;
    if (!oracles::active_set_enumerate(qp, x_star)) continue;
    ++checked;
    AdmmSettings settings;
    settings.n_iters = 2000;
    const QpSolution sol = admm_solve(oracles::to_sparse_problem(qp), settings);
    CHECK((sol.x - x_star).lpNorm<Eigen::Infinity>() <= 1e-4);
  }
  CHECK(checked >= 40);
}

TEST_CASE("admm: primal residual shrinks between iteration 10 and 2000") {
  Rng rng(77);
  for (int rep = 0; rep < 10; ++rep) {
    const auto qp = oracles::random_strictly_convex_qp(rng, 5, 6);
    const QpProblem prob = oracles::to_sparse_problem(qp);
    AdmmSettings settings;
    settings.n_iters = 2000;
    AdmmSolver solver(prob, settings);
    double res10 = -1.0, res_last = -1.0;
    Vec ax(prob.num_cons());
    solver.on_iteration = [&](int iter, const Vec& x, const Vec& z, const Vec&) {
      if (iter == 10 || iter == 1999) {
        csc_gemv(prob.A, x, ax);
        const double r = (ax - z).lpNorm<Eigen::Infinity>();
        (iter == 10 ? res10 : res_last) = r;
      }
    };
    solver.run();
    CHECK(res_last <= res10 + 1e-15);
  }
}

TEST_CASE("admm: warm start at the solution barely moves") {
  Rng rng(99);
  const auto qp = oracles::random_strictly_convex_qp(rng, 4, 4);
  const QpProblem prob = oracles::to_sparse_problem(qp);
  AdmmSettings settings;
  settings.n_iters = 20000;
  const QpSolution converged = admm_solve(prob, settings);

  settings.n_iters = 10;
  AdmmSolver solver(prob, settings);
  solver.warm_start(converged.x, converged.y);
  Vec x_prev = converged.x;
  double max_step = 0.0;
  solver.on_iteration = [&](int, const Vec& x, const Vec&, const Vec&) {
    max_step = std::max(max_step, (x - x_prev).lpNorm<Eigen::Infinity>());
    x_prev = x;
  };
  solver.run();
  CHECK(max_step <= 1e-9);
}

TEST_CASE("admm: projected iterates stay within bounds at every iteration") {
  Rng rng(123);
  const auto qp = oracles::random_strictly_convex_qp(rng, 5, 5);
  const QpProblem prob = oracles::to_sparse_problem(qp);
  AdmmSettings settings;
  settings.n_iters = 300;
  AdmmSolver solver(prob, settings);
  bool ok = true;
  solver.on_iteration = [&](int, const Vec&, const Vec& z, const Vec&) {
    for (int i = 0; i < z.size(); ++i)
      if (z[i] < prob.lo[i] - 1e-6 || z[i] > prob.hi[i] + 1e-6) ok = false;
  };
  const QpSolution sol = solver.run();
  CHECK(ok);
  for (int i = 0; i < sol.z_con.size(); ++i) {
    CHECK(sol.z_con[i] >= prob.lo[i] - 1e-6);
    CHECK(sol.z_con[i] <= prob.hi[i] + 1e-6);
  }
}

TEST_CASE("admm: equilibration on/off agree on well-conditioned problems") {
  Rng rng(321);
  for (int rep = 0; rep < 10; ++rep) {
    const auto qp = oracles::random_strictly_convex_qp(rng, 5, 5);
    const QpProblem prob = oracles::to_sparse_problem(qp);
    AdmmSettings with;
    with.n_iters = 3000;
    AdmmSettings without = with;
    without.ruiz_iters = 0;
    const QpSolution a = admm_solve(prob, with);
    const QpSolution b = admm_solve(prob, without);
    CHECK((a.x - b.x).lpNorm<Eigen::Infinity>() <= 1e-6);
  }
}

TEST_CASE("admm: optional tolerance exit stops early") {
  Rng rng(55);
  const auto qp = oracles::random_strictly_convex_qp(rng, 4, 3);
  const QpProblem prob = oracles::to_sparse_problem(qp);
  AdmmSettings settings;
  settings.n_iters = 5000;
  settings.eps_exit = 1e-9;
  const QpSolution sol = admm_solve(prob, settings);
  CHECK(sol.iters_run < 5000);
  CHECK(sol.prim_res < 1e-8);
}

TEST_CASE("admm: non-finite data raises DivergenceError with the iteration") {
  QpProblem prob;
  prob.P = CscMatrix::identity(1);
  prob.q_lin = Vec::Constant(1, std::numeric_limits<double>::quiet_NaN());
  prob.A = CscMatrix::identity(1);
  prob.lo = Vec::Constant(1, -1.0);
  prob.hi = Vec::Constant(1, 1.0);
  AdmmSettings settings;
  settings.n_iters = 10;
  try {
    admm_solve(prob, settings);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(e.iteration == 0);
  }
}

TEST_CASE("qp dump/load reproduces the problem") {
  Rng rng(888);
  const auto qp = oracles::random_strictly_convex_qp(rng, 6, 5);
  QpProblem prob = oracles::to_sparse_problem(qp);
  prob.lo[0] = -kInf;  // exercise the sentinel
  std::stringstream ss;
  qp_dump(ss, prob);
  const QpProblem loaded = qp_load(ss);
  CHECK(loaded.P.values == prob.P.values);
  CHECK(loaded.A.values == prob.A.values);
  CHECK(loaded.q_lin == prob.q_lin);
  CHECK(loaded.lo == prob.lo);
  CHECK(loaded.hi == prob.hi);

  AdmmSettings settings;
  settings.n_iters = 50;
  const QpSolution a = admm_solve(prob, settings);
  const QpSolution b = admm_solve(loaded, settings);
  CHECK(a.x == b.x);
}
