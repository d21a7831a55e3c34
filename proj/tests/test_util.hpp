#pragma once

#include <functional>

#include "yono/geometry.hpp"

namespace yono::testutil {

/// Central finite differences of a scalar function over a flat vector.
inline Vector finite_diff(const std::function<double(const Vector&)>& f, const Vector& x,
                          double h = 1e-5) {
  Vector g(x.size());
  Vector xp = x;
  for (Index i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    xp[i] = orig + h;
    const double fp = f(xp);
    xp[i] = orig - h;
    const double fm = f(xp);
    xp[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// ||a - b|| / max(||b||, floor): the gradient-check error measure.
inline double rel_error(const Vector& analytic, const Vector& numeric) {
  return (analytic - numeric).norm() / std::max(numeric.norm(), 1e-8);
}

inline Vector flatten(const Matrix& m) {
  Vector v(m.size());
  Index k = 0;
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) v[k++] = m(r, c);
  }
  return v;
}

inline Matrix unflatten(const Vector& v, Index rows, Index cols) {
  Matrix m(rows, cols);
  Index k = 0;
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) m(r, c) = v[k++];
  }
  return m;
}

}  // namespace yono::testutil
