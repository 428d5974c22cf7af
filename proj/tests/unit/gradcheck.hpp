#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "vw/ad/tape.hpp"

namespace vw::testing {

using ScalarFn = std::function<ad::Var(ad::Tape&, ad::Var)>;

/// Largest relative discrepancy between the tape gradient of f at x0 and a
/// central finite-difference estimate, relative to max(1, |g|_inf).
inline double gradient_error(const ScalarFn& f, const Matrix& x0, double h = 1e-6) {
  ad::Tape tape;
  ad::Var x = tape.variable(x0);
  ad::Var y = f(tape, x);
  tape.backward(y);
  const Matrix analytic = x.grad();

  Matrix numeric(x0.rows(), x0.cols());
  for (Eigen::Index i = 0; i < x0.rows(); ++i) {
    for (Eigen::Index j = 0; j < x0.cols(); ++j) {
      Matrix xp = x0, xm = x0;
      xp(i, j) += h;
      xm(i, j) -= h;
      ad::Tape tp, tm;
      const double fp = f(tp, tp.constant(xp)).scalar();
      const double fm = f(tm, tm.constant(xm)).scalar();
      numeric(i, j) = (fp - fm) / (2 * h);
    }
  }
  const double scale = std::max(1.0, numeric.cwiseAbs().maxCoeff());
  return (analytic - numeric).cwiseAbs().maxCoeff() / scale;
}

}  // namespace vw::testing
