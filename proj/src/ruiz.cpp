#include "rmpc/ruiz.hpp"

#include <cmath>

namespace rmpc {

RuizScaling ruiz_equilibrate(CscMatrix& a_upper, Vec& b, int max_iters) {
  if (a_upper.nrows != a_upper.ncols)
    throw StructuralError("ruiz_equilibrate: matrix must be square");
  if (max_iters < 1) throw StructuralError("ruiz_equilibrate: max_iters must be >= 1");
  const int n = a_upper.ncols;

  RuizScaling s;
  s.row_scale = Vec::Ones(n);
  Vec norm(n), delta(n);

  for (int pass = 0; pass < max_iters; ++pass) {
    norm.setZero();
    for (int j = 0; j < n; ++j)
      for (int p = a_upper.col_ptr[j]; p < a_upper.col_ptr[j + 1]; ++p) {
        const double v = std::abs(a_upper.values[p]);
        const int i = a_upper.row_idx[p];
        if (v > norm[i]) norm[i] = v;
        if (v > norm[j]) norm[j] = v;
      }
    for (int i = 0; i < n; ++i) delta[i] = norm[i] > 0.0 ? 1.0 / std::sqrt(norm[i]) : 1.0;
    for (int j = 0; j < n; ++j)
      for (int p = a_upper.col_ptr[j]; p < a_upper.col_ptr[j + 1]; ++p)
        a_upper.values[p] *= delta[a_upper.row_idx[p]] * delta[j];
    s.row_scale.array() *= delta.array();
  }

  s.col_scale = s.row_scale;
  b.array() *= s.row_scale.array();
  return s;
}

}  // namespace rmpc
