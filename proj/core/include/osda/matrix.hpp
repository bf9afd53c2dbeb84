#pragma once

#include <Eigen/Core>

namespace osda {

// Working precision is double throughout; files store float32.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

}  // namespace osda
