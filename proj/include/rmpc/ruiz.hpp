#pragma once

#include "rmpc/csc.hpp"
#include "rmpc/types.hpp"

namespace rmpc {

/// Diagonal scaling from Ruiz equilibration. For the symmetric KKT matrix the
/// row and column scalings coincide.
struct RuizScaling {
  Vec row_scale;
  Vec col_scale;
  double cost_scale = 1.0;

  /// y = S x (apply the symmetric diagonal scaling).
  void apply(Vec& x) const { x.array() *= col_scale.array(); }
};

/// Modified Ruiz iteration on a symmetric matrix stored as its upper triangle:
/// each pass divides every row/column by the square root of its infinity norm.
/// Scales the matrix and right-hand side in place and returns the accumulated
/// scaling, so unscaled solutions can be recovered as x = S x_scaled.
/// Structurally empty rows keep a scale of 1.
RuizScaling ruiz_equilibrate(CscMatrix& a_upper, Vec& b, int max_iters = 10);

}  // namespace rmpc
