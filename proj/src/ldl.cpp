#include "rmpc/ldl.hpp"

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rmpc {

namespace {

std::vector<int> amd_ordering(const CscMatrix& a_upper) {
  using SpMat = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
  std::vector<Eigen::Triplet<double>> ts;
  ts.reserve(static_cast<size_t>(a_upper.nnz()) * 2);
  for (int j = 0; j < a_upper.ncols; ++j)
    for (int p = a_upper.col_ptr[j]; p < a_upper.col_ptr[j + 1]; ++p) {
      const int i = a_upper.row_idx[p];
      ts.emplace_back(i, j, 1.0);
      if (i != j) ts.emplace_back(j, i, 1.0);
    }
  SpMat sym(a_upper.nrows, a_upper.ncols);
  sym.setFromTriplets(ts.begin(), ts.end());

  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> p;
  Eigen::AMDOrdering<int> amd;
  amd(sym, p);
  // AMD returns the inverse of the factorization order (as in
  // SimplicialCholesky); its indices give old = perm[new].
  std::vector<int> perm(a_upper.ncols);
  for (int k = 0; k < a_upper.ncols; ++k) perm[k] = p.indices()[k];
  return perm;
}

}  // namespace

SparseLdl::SparseLdl(const CscMatrix& a_upper, bool use_amd) {
  csc_validate(a_upper);
  if (a_upper.nrows != a_upper.ncols)
    throw StructuralError("SparseLdl: matrix must be square (upper triangle stored)");
  for (int j = 0; j < a_upper.ncols; ++j)
    for (int p = a_upper.col_ptr[j]; p < a_upper.col_ptr[j + 1]; ++p)
      if (a_upper.row_idx[p] > j)
        throw StructuralError("SparseLdl: entries below the diagonal; store the upper triangle");

  n_ = a_upper.ncols;
  if (use_amd && n_ > 1) {
    perm_ = amd_ordering(a_upper);
  } else {
    perm_.resize(n_);
    for (int k = 0; k < n_; ++k) perm_[k] = k;
  }
  iperm_.resize(n_);
  for (int k = 0; k < n_; ++k) iperm_[perm_[k]] = k;
  in_col_ptr_ = a_upper.col_ptr;
  in_row_idx_ = a_upper.row_idx;

  permute_pattern(a_upper);
  symbolic(b_);
  numeric(a_upper);
}

void SparseLdl::permute_pattern(const CscMatrix& a_upper) {
  // B = P A P^T, upper triangle, with a source map for fast refactorization.
  struct Entry {
    int row, col, src;
  };
  std::vector<Entry> entries;
  entries.reserve(a_upper.nnz());
  for (int j = 0; j < a_upper.ncols; ++j)
    for (int p = a_upper.col_ptr[j]; p < a_upper.col_ptr[j + 1]; ++p) {
      int bi = iperm_[a_upper.row_idx[p]];
      int bj = iperm_[j];
      if (bi > bj) std::swap(bi, bj);
      entries.push_back({bi, bj, p});
    }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.col != b.col ? a.col < b.col : a.row < b.row;
  });

  b_.nrows = b_.ncols = n_;
  b_.col_ptr.assign(n_ + 1, 0);
  b_.row_idx.resize(entries.size());
  b_.values.assign(entries.size(), 0.0);
  b_src_.resize(entries.size());
  for (size_t k = 0; k < entries.size(); ++k) {
    ++b_.col_ptr[entries[k].col + 1];
    b_.row_idx[k] = entries[k].row;
    b_src_[k] = entries[k].src;
  }
  for (int j = 0; j < n_; ++j) b_.col_ptr[j + 1] += b_.col_ptr[j];
}

void SparseLdl::symbolic(const CscMatrix& b) {
  parent_.assign(n_, -1);
  flag_.assign(n_, 0);
  lnz_.assign(n_, 0);
  for (int k = 0; k < n_; ++k) {
    parent_[k] = -1;
    flag_[k] = k;
    for (int p = b.col_ptr[k]; p < b.col_ptr[k + 1]; ++p) {
      int i = b.row_idx[p];
      if (i >= k) continue;
      for (; flag_[i] != k; i = parent_[i]) {
        if (parent_[i] == -1) parent_[i] = k;
        ++lnz_[i];
        flag_[i] = k;
      }
    }
  }
  lp_.assign(n_ + 1, 0);
  for (int k = 0; k < n_; ++k) lp_[k + 1] = lp_[k] + lnz_[k];
  li_.assign(lp_[n_], 0);
  lx_.assign(lp_[n_], 0.0);
  pattern_.assign(n_, 0);
  y_.assign(n_, 0.0);
  d_.setZero(n_);
  dinv_.setZero(n_);
}

void SparseLdl::numeric(const CscMatrix& a_upper) {
  // Scatter input values into the permuted copy, then factor up-looking.
  for (size_t k = 0; k < b_src_.size(); ++k) b_.values[k] = a_upper.values[b_src_[k]];

  std::vector<int>& pat = pattern_;
  std::vector<double>& y = y_;
  std::fill(lnz_.begin(), lnz_.end(), 0);
  for (int k = 0; k < n_; ++k) {
    y[k] = 0.0;
    int top = n_;
    flag_[k] = k;
    for (int p = b_.col_ptr[k]; p < b_.col_ptr[k + 1]; ++p) {
      int i = b_.row_idx[p];
      if (i > k) continue;
      y[i] += b_.values[p];
      int len = 0;
      for (; flag_[i] != k; i = parent_[i]) {
        pat[len++] = i;
        flag_[i] = k;
      }
      while (len > 0) pat[--top] = pat[--len];
    }
    d_[k] = y[k];
    y[k] = 0.0;
    for (; top < n_; ++top) {
      const int i = pat[top];
      const double yi = y[i];
      y[i] = 0.0;
      const int p2 = lp_[i] + lnz_[i];
      for (int p = lp_[i]; p < p2; ++p) y[li_[p]] -= lx_[p] * yi;
      const double lki = yi / d_[i];
      d_[k] -= lki * yi;
      li_[p2] = k;
      lx_[p2] = lki;
      ++lnz_[i];
    }
    if (d_[k] == 0.0) {
      std::ostringstream msg;
      msg << "SparseLdl: exact zero pivot at column " << perm_[k]
          << " (permuted column " << k << ")";
      throw SingularityError(msg.str());
    }
    dinv_[k] = 1.0 / d_[k];
  }
}

void SparseLdl::refactor(const CscMatrix& a_upper) {
  if (a_upper.nrows != n_ || a_upper.ncols != n_ || a_upper.col_ptr != in_col_ptr_ ||
      a_upper.row_idx != in_row_idx_)
    throw StructuralError("SparseLdl::refactor: pattern mismatch");
  numeric(a_upper);
}

void SparseLdl::solve_inplace(Vec& bx, LdlWorkspace& ws) const {
  if (bx.size() != n_) throw StructuralError("SparseLdl::solve: dimension mismatch");
  ws.w.resize(n_);
  double* w = ws.w.data();
  for (int k = 0; k < n_; ++k) w[k] = bx[perm_[k]];
  for (int k = 0; k < n_; ++k) {
    const double wk = w[k];
    for (int p = lp_[k]; p < lp_[k + 1]; ++p) w[li_[p]] -= lx_[p] * wk;
  }
  for (int k = 0; k < n_; ++k) w[k] *= dinv_[k];
  for (int k = n_ - 1; k >= 0; --k) {
    double acc = w[k];
    for (int p = lp_[k]; p < lp_[k + 1]; ++p) acc -= lx_[p] * w[li_[p]];
    w[k] = acc;
  }
  for (int k = 0; k < n_; ++k) bx[perm_[k]] = w[k];
}

Vec SparseLdl::solve(const Vec& b) const {
  Vec x = b;
  LdlWorkspace ws;
  solve_inplace(x, ws);
  return x;
}

std::pair<int, int> SparseLdl::inertia() const {
  int pos = 0, neg = 0;
  for (int k = 0; k < n_; ++k) {
    if (d_[k] > 0.0) ++pos;
    if (d_[k] < 0.0) ++neg;
  }
  return {pos, neg};
}

LdlFactors SparseLdl::factors() const {
  LdlFactors f;
  f.D = d_;
  f.Dinv = dinv_;
  f.perm = perm_;
  // Strictly-lower storage plus an explicit unit diagonal.
  f.L.nrows = f.L.ncols = n_;
  f.L.col_ptr.assign(n_ + 1, 0);
  f.L.row_idx.reserve(lp_[n_] + n_);
  f.L.values.reserve(lp_[n_] + n_);
  for (int k = 0; k < n_; ++k) {
    f.L.col_ptr[k] = static_cast<int>(f.L.row_idx.size());
    f.L.row_idx.push_back(k);
    f.L.values.push_back(1.0);
    for (int p = lp_[k]; p < lp_[k + 1]; ++p) {
      f.L.row_idx.push_back(li_[p]);
      f.L.values.push_back(lx_[p]);
    }
  }
  f.L.col_ptr[n_] = static_cast<int>(f.L.row_idx.size());
  return f;
}

LdlFactors ldl_factorize(const CscMatrix& a_upper) {
  return SparseLdl(a_upper).factors();
}

Vec ldl_solve(const LdlFactors& f, const Vec& b) {
  const int n = f.L.ncols;
  if (b.size() != n) throw StructuralError("ldl_solve: dimension mismatch");
  Vec w(n);
  for (int k = 0; k < n; ++k) w[k] = b[f.perm[k]];
  for (int k = 0; k < n; ++k) {
    const double wk = w[k];
    for (int p = f.L.col_ptr[k] + 1; p < f.L.col_ptr[k + 1]; ++p)
      w[f.L.row_idx[p]] -= f.L.values[p] * wk;
  }
  w.array() *= f.Dinv.array();
  for (int k = n - 1; k >= 0; --k) {
    double acc = w[k];
    for (int p = f.L.col_ptr[k] + 1; p < f.L.col_ptr[k + 1]; ++p)
      acc -= f.L.values[p] * w[f.L.row_idx[p]];
    w[k] = acc;
  }
  Vec x(n);
  for (int k = 0; k < n; ++k) x[f.perm[k]] = w[k];
  return x;
}

}  // namespace rmpc
