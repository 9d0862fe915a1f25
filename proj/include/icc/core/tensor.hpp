#pragma once

#include <Eigen/Dense>

namespace icc {

/// Frame-major 2-D array: rows are time steps, columns are channels.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace icc
