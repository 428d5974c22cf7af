#pragma once

#include <Eigen/Dense>

namespace vw {

/// Dense row-major matrix. One row per token, pixel, or sample throughout.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

}  // namespace vw
