#include "rmpc/csc.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>

namespace rmpc {

CscMatrix CscMatrix::identity(int n) {
  CscMatrix m;
  m.nrows = m.ncols = n;
  m.col_ptr.resize(n + 1);
  m.row_idx.resize(n);
  m.values.assign(n, 1.0);
  for (int j = 0; j <= n; ++j) m.col_ptr[j] = j;
  for (int j = 0; j < n; ++j) m.row_idx[j] = j;
  return m;
}

Mat CscMatrix::to_dense() const {
  Mat d = Mat::Zero(nrows, ncols);
  for (int j = 0; j < ncols; ++j)
    for (int p = col_ptr[j]; p < col_ptr[j + 1]; ++p) d(row_idx[p], j) = values[p];
  return d;
}

Mat CscMatrix::to_dense_symmetric() const {
  Mat d = to_dense();
  for (int j = 0; j < ncols; ++j)
    for (int i = 0; i < j; ++i) d(j, i) = d(i, j);
  return d;
}

CscMatrix csc_from_triplets(const std::vector<Triplet>& triplets, int nrows, int ncols) {
  for (const auto& t : triplets) {
    if (t.row < 0 || t.row >= nrows || t.col < 0 || t.col >= ncols) {
      std::ostringstream msg;
      msg << "csc_from_triplets: entry (" << t.row << ", " << t.col << ") outside " << nrows
          << "x" << ncols;
      throw StructuralError(msg.str());
    }
  }

  CscMatrix m;
  m.nrows = nrows;
  m.ncols = ncols;
  m.col_ptr.assign(ncols + 1, 0);

  std::vector<int> count(ncols, 0);
  for (const auto& t : triplets) ++count[t.col];
  for (int j = 0; j < ncols; ++j) m.col_ptr[j + 1] = m.col_ptr[j] + count[j];

  const int nnz_raw = static_cast<int>(triplets.size());
  std::vector<int> rows(nnz_raw);
  std::vector<double> vals(nnz_raw);
  std::vector<int> next(m.col_ptr.begin(), m.col_ptr.end() - 1);
  for (const auto& t : triplets) {
    const int p = next[t.col]++;
    rows[p] = t.row;
    vals[p] = t.value;
  }

  // Sort each column by row and fold duplicates.
  m.row_idx.reserve(nnz_raw);
  m.values.reserve(nnz_raw);
  std::vector<int> order;
  int write = 0;
  for (int j = 0; j < ncols; ++j) {
    const int begin = m.col_ptr[j];
    order.resize(count[j]);
    for (int k = 0; k < count[j]; ++k) order[k] = begin + k;
    std::sort(order.begin(), order.end(), [&](int a, int b) { return rows[a] < rows[b]; });
    const int col_start = write;
    for (int k = 0; k < count[j]; ++k) {
      const int p = order[k];
      if (write > col_start && m.row_idx[write - 1] == rows[p]) {
        m.values[write - 1] += vals[p];
      } else {
        m.row_idx.resize(write + 1);
        m.values.resize(write + 1);
        m.row_idx[write] = rows[p];
        m.values[write] = vals[p];
        ++write;
      }
    }
    m.col_ptr[j] = col_start;
  }
  m.col_ptr[ncols] = write;
  return m;
}

CscMatrix csc_from_triplets(const std::vector<int>& rows, const std::vector<int>& cols,
                            const std::vector<double>& vals, int nrows, int ncols) {
  if (rows.size() != cols.size() || rows.size() != vals.size())
    throw StructuralError("csc_from_triplets: index/value lists differ in length");
  std::vector<Triplet> ts(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) ts[i] = {rows[i], cols[i], vals[i]};
  return csc_from_triplets(ts, nrows, ncols);
}

std::vector<Triplet> csc_to_triplets(const CscMatrix& a) {
  std::vector<Triplet> ts;
  ts.reserve(a.nnz());
  for (int j = 0; j < a.ncols; ++j)
    for (int p = a.col_ptr[j]; p < a.col_ptr[j + 1]; ++p)
      ts.push_back({a.row_idx[p], j, a.values[p]});
  return ts;
}

void csc_validate(const CscMatrix& a) {
  if (a.nrows < 0 || a.ncols < 0) throw StructuralError("csc: negative dimension");
  if (static_cast<int>(a.col_ptr.size()) != a.ncols + 1)
    throw StructuralError("csc: col_ptr size != ncols + 1");
  if (a.col_ptr[0] != 0) throw StructuralError("csc: col_ptr[0] != 0");
  if (a.col_ptr[a.ncols] != a.nnz() ||
      a.row_idx.size() != a.values.size())
    throw StructuralError("csc: col_ptr[ncols] != nnz");
  for (int j = 0; j < a.ncols; ++j) {
    if (a.col_ptr[j + 1] < a.col_ptr[j]) throw StructuralError("csc: col_ptr decreasing");
    for (int p = a.col_ptr[j]; p < a.col_ptr[j + 1]; ++p) {
      if (a.row_idx[p] < 0 || a.row_idx[p] >= a.nrows)
        throw StructuralError("csc: row index out of range");
      if (p > a.col_ptr[j] && a.row_idx[p] <= a.row_idx[p - 1])
        throw StructuralError("csc: row indices not strictly increasing in column");
    }
  }
}

CscMatrix csc_transpose(const CscMatrix& a) {
  CscMatrix t;
  t.nrows = a.ncols;
  t.ncols = a.nrows;
  t.col_ptr.assign(a.nrows + 1, 0);
  t.row_idx.resize(a.nnz());
  t.values.resize(a.nnz());
  for (int p = 0; p < a.nnz(); ++p) ++t.col_ptr[a.row_idx[p] + 1];
  for (int i = 0; i < a.nrows; ++i) t.col_ptr[i + 1] += t.col_ptr[i];
  std::vector<int> next(t.col_ptr.begin(), t.col_ptr.end() - 1);
  for (int j = 0; j < a.ncols; ++j)
    for (int p = a.col_ptr[j]; p < a.col_ptr[j + 1]; ++p) {
      const int q = next[a.row_idx[p]]++;
      t.row_idx[q] = j;
      t.values[q] = a.values[p];
    }
  return t;
}

void csc_gemv(const CscMatrix& a, const Vec& x, Vec& y) {
  y.setZero(a.nrows);
  for (int j = 0; j < a.ncols; ++j) {
    const double xj = x[j];
    for (int p = a.col_ptr[j]; p < a.col_ptr[j + 1]; ++p) y[a.row_idx[p]] += a.values[p] * xj;
  }
}

void csc_gemv_t(const CscMatrix& a, const Vec& x, Vec& y) {
  y.setZero(a.ncols);
  for (int j = 0; j < a.ncols; ++j) {
    double acc = 0.0;
    for (int p = a.col_ptr[j]; p < a.col_ptr[j + 1]; ++p) acc += a.values[p] * x[a.row_idx[p]];
    y[j] = acc;
  }
}

void csc_symv_upper(const CscMatrix& upper, const Vec& x, Vec& y) {
  y.setZero(upper.nrows);
  for (int j = 0; j < upper.ncols; ++j) {
    const double xj = x[j];
    for (int p = upper.col_ptr[j]; p < upper.col_ptr[j + 1]; ++p) {
      const int i = upper.row_idx[p];
      const double v = upper.values[p];
      y[i] += v * xj;
      if (i != j) y[j] += v * x[i];
    }
  }
}

void mm_write(std::ostream& os, const CscMatrix& a) {
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << a.nrows << " " << a.ncols << " " << a.nnz() << "\n";
  os.precision(17);
  for (int j = 0; j < a.ncols; ++j)
    for (int p = a.col_ptr[j]; p < a.col_ptr[j + 1]; ++p)
      os << a.row_idx[p] + 1 << " " << j + 1 << " " << a.values[p] << "\n";
}

CscMatrix mm_read(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("%%MatrixMarket", 0) != 0)
    throw StructuralError("mm_read: missing MatrixMarket header");
  while (std::getline(is, line)) {
    if (!line.empty() && line[0] != '%') break;
  }
  std::istringstream dims(line);
  int nrows = 0, ncols = 0, nnz = 0;
  if (!(dims >> nrows >> ncols >> nnz)) throw StructuralError("mm_read: bad size line");
  std::vector<Triplet> ts;
  ts.reserve(nnz);
  for (int k = 0; k < nnz; ++k) {
    int i = 0, j = 0;
    double v = 0.0;
    if (!(is >> i >> j >> v)) throw StructuralError("mm_read: truncated entries");
    ts.push_back({i - 1, j - 1, v});
  }
  return csc_from_triplets(ts, nrows, ncols);
}

}  // namespace rmpc
