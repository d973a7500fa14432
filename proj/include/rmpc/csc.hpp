#pragma once

#include <iosfwd>
#include <vector>

#include "rmpc/types.hpp"

namespace rmpc {

/// Compressed sparse column matrix, canonical form: col_ptr non-decreasing,
/// row indices strictly increasing within each column, no duplicates.
///
/// Symmetric matrices (KKT systems, cost Hessians) store the upper triangle
/// only; rectangular constraint Jacobians store all entries.
struct CscMatrix {
  int nrows = 0;
  int ncols = 0;
  std::vector<int> col_ptr;  // size ncols + 1
  std::vector<int> row_idx;
  std::vector<double> values;

  int nnz() const { return static_cast<int>(values.size()); }
  bool same_pattern(const CscMatrix& other) const {
    return nrows == other.nrows && ncols == other.ncols && col_ptr == other.col_ptr &&
           row_idx == other.row_idx;
  }

  static CscMatrix identity(int n);

  Mat to_dense() const;
  /// Expands upper-triangle storage into the full symmetric dense matrix.
  Mat to_dense_symmetric() const;
};

struct Triplet {
  int row;
  int col;
  double value;
};

/// Builds a canonical CSC matrix from (row, col, value) triplets.
/// Duplicate entries are summed. Out-of-range indices throw StructuralError.
CscMatrix csc_from_triplets(const std::vector<Triplet>& triplets, int nrows, int ncols);

CscMatrix csc_from_triplets(const std::vector<int>& rows, const std::vector<int>& cols,
                            const std::vector<double>& vals, int nrows, int ncols);

std::vector<Triplet> csc_to_triplets(const CscMatrix& a);

/// Checks all CscMatrix invariants; throws StructuralError with a description.
void csc_validate(const CscMatrix& a);

CscMatrix csc_transpose(const CscMatrix& a);

/// y = A x for rectangular A.
void csc_gemv(const CscMatrix& a, const Vec& x, Vec& y);
/// y = A^T x.
void csc_gemv_t(const CscMatrix& a, const Vec& x, Vec& y);
/// y = S x where S is symmetric and only its upper triangle is stored.
void csc_symv_upper(const CscMatrix& upper, const Vec& x, Vec& y);

/// Matrix Market coordinate-real-general I/O (debug dumps).
void mm_write(std::ostream& os, const CscMatrix& a);
CscMatrix mm_read(std::istream& is);

}  // namespace rmpc
