#pragma once

#include <vector>

#include "rmpc/csc.hpp"
#include "rmpc/types.hpp"

namespace rmpc {

/// L D L^T factors of a permuted symmetric matrix: P_s A P_s^T = L diag(D) L^T,
/// where (P_s x)[k] = x[perm[k]].
struct LdlFactors {
  CscMatrix L;  // unit lower triangular, unit diagonal stored explicitly
  Vec D;
  Vec Dinv;
  std::vector<int> perm;  // old index = perm[new index]
};

/// Scratch owned by the caller so factor objects can be shared read-only
/// across workers.
struct LdlWorkspace {
  std::vector<double> w;
};

/// Sparse LDL^T for symmetric quasi-definite matrices, upper triangle stored.
///
/// The fill-reducing ordering (AMD) and symbolic analysis are computed once in
/// the constructor and reused by refactor() for matrices with the identical
/// sparsity pattern. No pivoting: an exact zero pivot throws SingularityError.
class SparseLdl {
 public:
  explicit SparseLdl(const CscMatrix& a_upper, bool use_amd = true);

  /// Refactorizes a matrix with the same pattern as the constructor argument.
  void refactor(const CscMatrix& a_upper);

  /// Solves A x = b in place. Allocation-free given a warm workspace.
  void solve_inplace(Vec& bx, LdlWorkspace& ws) const;

  Vec solve(const Vec& b) const;

  int dim() const { return n_; }
  const Vec& d() const { return d_; }
  const std::vector<int>& perm() const { return perm_; }

  /// Number of (positive, negative) pivots; quasi-definite KKT matrices have
  /// exactly (n_primal, n_dual).
  std::pair<int, int> inertia() const;

  LdlFactors factors() const;

 private:
  void symbolic(const CscMatrix& a_upper);
  void numeric(const CscMatrix& a_upper);
  void permute_pattern(const CscMatrix& a_upper);

  int n_ = 0;
  std::vector<int> perm_;      // old = perm_[new]
  std::vector<int> iperm_;     // new = iperm_[old]
  std::vector<int> in_col_ptr_, in_row_idx_;  // constructor-input pattern
  CscMatrix b_;                // permuted upper-triangular copy of A
  std::vector<int> b_src_;     // b_.values[k] = a.values[b_src_[k]]
  std::vector<int> parent_;    // elimination tree
  std::vector<int> lp_, li_;   // strictly lower L in CSC
  std::vector<double> lx_;
  Vec d_, dinv_;
  // workspaces for symbolic/numeric passes
  std::vector<int> flag_, lnz_, pattern_;
  std::vector<double> y_;
  std::vector<int> pattern_nnz_;  // column pointers template (copy of lp_)
};

/// One-shot factorization per the module contract.
LdlFactors ldl_factorize(const CscMatrix& a_upper);

/// Solves A x = b from exported factors (convenience path; the SparseLdl
/// object is the allocation-free path).
Vec ldl_solve(const LdlFactors& f, const Vec& b);

}  // namespace rmpc
