#include <doctest.h>

#include <Eigen/Dense>
#include <sstream>

#include "oracles.hpp"
#include "rmpc/csc.hpp"
#include "rmpc/ldl.hpp"
#include "rmpc/rng.hpp"
#include "rmpc/ruiz.hpp"

using namespace rmpc;

TEST_CASE("csc identity from triplets") {
  const CscMatrix m = csc_from_triplets({{0, 0, 1.0}, {1, 1, 1.0}}, 2, 2);
  CHECK(m.to_dense() == Mat::Identity(2, 2));
  csc_validate(m);
}

TEST_CASE("csc duplicate entries are summed") {
  const CscMatrix m = csc_from_triplets({{0, 0, 1.0}, {0, 0, 2.0}}, 1, 1);
  CHECK(m.nnz() == 1);
  CHECK(m.values[0] == 3.0);
}

TEST_CASE("csc random triplets match dense accumulation") {
  Rng rng(7);
  std::vector<Triplet> ts;
  Mat dense = Mat::Zero(10, 10);
  for (int k = 0; k < 60; ++k) {
    const int i = rng.uniform_int(10), j = rng.uniform_int(10);
    const double v = rng.uniform(-2.0, 2.0);
    ts.push_back({i, j, v});
    dense(i, j) += v;
  }
  const CscMatrix m = csc_from_triplets(ts, 10, 10);
  csc_validate(m);
  CHECK((m.to_dense() - dense).lpNorm<Eigen::Infinity>() == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("csc out-of-range index is a structural error") {
  CHECK_THROWS_AS(csc_from_triplets({{2, 0, 1.0}}, 2, 2), StructuralError);
  CHECK_THROWS_AS(csc_from_triplets({{0, -1, 1.0}}, 2, 2), StructuralError);
}

TEST_CASE("csc to_triplets roundtrip is identity on canonical matrices") {
  Rng rng(11);
  std::vector<Triplet> ts;
  for (int k = 0; k < 40; ++k)
    ts.push_back({rng.uniform_int(8), rng.uniform_int(8), rng.uniform(-1.0, 1.0)});
  const CscMatrix a = csc_from_triplets(ts, 8, 8);
  const CscMatrix b = csc_from_triplets(csc_to_triplets(a), 8, 8);
  CHECK(a.col_ptr == b.col_ptr);
  CHECK(a.row_idx == b.row_idx);
  CHECK(a.values == b.values);
}

TEST_CASE("matrix market roundtrip") {
  Rng rng(3);
  std::vector<Triplet> ts;
  for (int k = 0; k < 25; ++k)
    ts.push_back({rng.uniform_int(6), rng.uniform_int(5), rng.uniform(-1.0, 1.0)});
  const CscMatrix a = csc_from_triplets(ts, 6, 5);
  std::stringstream ss;
  mm_write(ss, a);
  const CscMatrix b = mm_read(ss);
  CHECK(a.same_pattern(b));
  CHECK(a.values == b.values);
}

TEST_CASE("gemv and symv against dense") {
  Rng rng(5);
  const Mat K = oracles::random_quasi_definite(rng, 6, 4);
  const CscMatrix upper = oracles::dense_to_upper_csc(K);
  const CscMatrix full = oracles::dense_to_csc(K);
  Vec x(10);
  for (int i = 0; i < 10; ++i) x[i] = rng.normal();
  Vec y1, y2, y3;
  csc_symv_upper(upper, x, y1);
  csc_gemv(full, x, y2);
  csc_gemv_t(full, x, y3);
  CHECK((y1 - K * x).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK((y2 - K * x).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK((y3 - K.transpose() * x).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("ruiz: identity matrix is already equilibrated") {
  CscMatrix eye = CscMatrix::identity(4);
  Vec b = Vec::Ones(4);
  const RuizScaling s = ruiz_equilibrate(eye, b);
  CHECK((s.row_scale - Vec::Ones(4)).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(eye.to_dense() == Mat::Identity(4, 4));
  CHECK(b == Vec::Ones(4));
}

TEST_CASE("ruiz: diag(1, 10000) -> diag(1, 1) with scales (1, 0.01)") {
  CscMatrix a = csc_from_triplets({{0, 0, 1.0}, {1, 1, 10000.0}}, 2, 2);
  Vec b = Vec::Zero(2);
  const RuizScaling s = ruiz_equilibrate(a, b);
  CHECK(a.values[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(a.values[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.row_scale[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.row_scale[1] == doctest::Approx(0.01).epsilon(1e-12));
}

TEST_CASE("ruiz: random symmetric 20x20 lands in [0.5, 2] norms") {
  Rng rng(13);
  Mat K(20, 20);
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j <= i; ++j) {
      K(i, j) = rng.uniform(-5.0, 5.0) * std::pow(10.0, rng.uniform(-3.0, 3.0));
      K(j, i) = K(i, j);
    }
  CscMatrix a = oracles::dense_to_upper_csc(K);
  Vec b = Vec::Zero(20);
  ruiz_equilibrate(a, b);
  const Mat S = a.to_dense_symmetric();
  for (int i = 0; i < 20; ++i) {
    const double norm = S.row(i).lpNorm<Eigen::Infinity>();
    CHECK(norm >= 0.5);
    CHECK(norm <= 2.0);
  }
}

TEST_CASE("ruiz: idempotent on an equilibrated matrix") {
  Rng rng(17);
  Mat K = oracles::random_quasi_definite(rng, 8, 5);
  CscMatrix a = oracles::dense_to_upper_csc(K);
  Vec b = Vec::Zero(13);
  ruiz_equilibrate(a, b);
  CscMatrix a2 = a;
  const RuizScaling s2 = ruiz_equilibrate(a2, b);
  CHECK((s2.row_scale - Vec::Ones(13)).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("ruiz: structurally zero row keeps scale 1") {
  CscMatrix a = csc_from_triplets({{0, 0, 4.0}, {2, 2, 9.0}}, 3, 3);
  Vec b = Vec::Zero(3);
  const RuizScaling s = ruiz_equilibrate(a, b);
  CHECK(s.row_scale[1] == 1.0);
  CHECK(std::isfinite(s.row_scale[0]));
}

TEST_CASE("ldl: identity factors trivially") {
  const LdlFactors f = ldl_factorize(oracles::dense_to_upper_csc(Mat::Identity(4, 4)));
  CHECK(f.L.to_dense() == Mat::Identity(4, 4));
  CHECK((f.D - Vec::Ones(4)).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("ldl: hand-checked 2x2") {
  // A = [[2, 1], [1, -1]]: L = [[1, 0], [0.5, 1]], D = (2, -1.5).
  const CscMatrix a = csc_from_triplets({{0, 0, 2.0}, {0, 1, 1.0}, {1, 1, -1.0}}, 2, 2);
  const SparseLdl ldl(a, /*use_amd=*/false);
  const LdlFactors f = ldl.factors();
  CHECK(f.L.to_dense()(1, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(f.D[0] == doctest::Approx(2.0));
  CHECK(f.D[1] == doctest::Approx(-1.5));

  // Dense inverse oracle for the solve.
  Mat A(2, 2);
  A << 2, 1, 1, -1;
  const Vec b = (Vec(2) << 1.0, 0.0).finished();
  const Vec expect = A.inverse() * b;
  const Vec x = ldl.solve(b);
  CHECK((x - expect).lpNorm<Eigen::Infinity>() < 1e-14);
}

TEST_CASE("ldl: quasi-definite KKT inertia is (n, m)") {
  Rng rng(23);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 2 + rng.uniform_int(10);
    const int m = 1 + rng.uniform_int(8);
    const Mat K = oracles::random_quasi_definite(rng, n, m);
    const SparseLdl ldl(oracles::dense_to_upper_csc(K));
    const auto [pos, neg] = ldl.inertia();
    CHECK(pos == n);
    CHECK(neg == m);
  }
}

TEST_CASE("ldl: factor-reconstruct roundtrip on random quasi-definite matrices") {
  Rng rng(29);
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 2 + rng.uniform_int(20);
    const int m = 1 + rng.uniform_int(20);
    const Mat K = oracles::random_quasi_definite(rng, n, m);
    const SparseLdl ldl(oracles::dense_to_upper_csc(K));
    const LdlFactors f = ldl.factors();
    const int dim = n + m;
    Mat permuted(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) permuted(i, j) = K(f.perm[i], f.perm[j]);
    const Mat recon = f.L.to_dense() * f.D.asDiagonal() * f.L.to_dense().transpose();
    const double scale = K.lpNorm<Eigen::Infinity>();
    CHECK((permuted - recon).lpNorm<Eigen::Infinity>() <= 1e-10 * scale);
  }
}

TEST_CASE("ldl: solve residual within the scaled bound") {
  Rng rng(31);
  for (int rep = 0; rep < 20; ++rep) {
    const Mat K = oracles::random_quasi_definite(rng, 30, 20);
    const SparseLdl ldl(oracles::dense_to_upper_csc(K));
    Vec b(50);
    for (int i = 0; i < 50; ++i) b[i] = rng.normal();
    const Vec x = ldl.solve(b);
    const double resid = (K * x - b).lpNorm<Eigen::Infinity>();
    const double bound = 1e-8 * (K.lpNorm<Eigen::Infinity>() * x.lpNorm<Eigen::Infinity>() +
                                 b.lpNorm<Eigen::Infinity>());
    CHECK(resid <= bound);
  }
}

TEST_CASE("ldl: free-function solve agrees with the class path") {
  Rng rng(37);
  const Mat K = oracles::random_quasi_definite(rng, 12, 7);
  const CscMatrix a = oracles::dense_to_upper_csc(K);
  const SparseLdl ldl(a);
  const LdlFactors f = ldl_factorize(a);
  Vec b(19);
  for (int i = 0; i < 19; ++i) b[i] = rng.normal();
  CHECK((ldl.solve(b) - ldl_solve(f, b)).lpNorm<Eigen::Infinity>() < 1e-13);
}

TEST_CASE("ldl: exact zero pivot names the column") {
  const CscMatrix a =
      csc_from_triplets({{0, 0, 1.0}, {0, 1, 1.0}, {1, 1, 1.0}}, 2, 2);  // singular
  try {
    SparseLdl ldl(a, /*use_amd=*/false);
    FAIL("expected SingularityError");
  } catch (const SingularityError& e) {
    CHECK(std::string(e.what()).find("column 1") != std::string::npos);
  }
}

TEST_CASE("ldl: refactor requires the identical pattern") {
  Rng rng(41);
  const Mat K = oracles::random_quasi_definite(rng, 6, 3);
  const CscMatrix a = oracles::dense_to_upper_csc(K);
  SparseLdl ldl(a);
  CscMatrix scaled = a;
  for (double& v : scaled.values) v *= 2.0;
  ldl.refactor(scaled);
  const Vec b = Vec::Ones(9);
  CHECK(((2.0 * K) * ldl.solve(b) - b).lpNorm<Eigen::Infinity>() < 1e-9);

  const CscMatrix other = csc_from_triplets({{0, 0, 1.0}}, 9, 9);
  CHECK_THROWS_AS(ldl.refactor(other), StructuralError);
}

TEST_CASE("ldl: rectangular or lower-triangle input is rejected") {
  CHECK_THROWS_AS(SparseLdl(csc_from_triplets({{0, 0, 1.0}}, 2, 3)), StructuralError);
  CHECK_THROWS_AS(SparseLdl(csc_from_triplets({{1, 0, 1.0}, {0, 0, 1.0}, {1, 1, 1.0}}, 2, 2)),
                  StructuralError);
}

TEST_CASE("ldl: solve dimension mismatch") {
  const SparseLdl ldl(oracles::dense_to_upper_csc(Mat::Identity(3, 3)));
  CHECK_THROWS_AS(ldl.solve(Vec::Ones(4)), StructuralError);
}

TEST_CASE("ldl: amd ordering reduces arrow-matrix fill") {
  const int n = 40;
  std::vector<Triplet> ts;
  for (int i = 0; i < n; ++i) ts.push_back({i, i, 10.0});
  for (int j = 1; j < n; ++j) ts.push_back({0, j, 1.0});  // dense first row
  const CscMatrix a = csc_from_triplets(ts, n, n);
  const SparseLdl natural(a, /*use_amd=*/false);
  const SparseLdl amd(a, /*use_amd=*/true);
  CHECK(amd.factors().L.nnz() < natural.factors().L.nnz());
  Vec b = Vec::Ones(n);
  const Mat K = a.to_dense_symmetric();
  CHECK((K * amd.solve(b) - b).lpNorm<Eigen::Infinity>() < 1e-10);
}
