#pragma once

#include <Eigen/Dense>

namespace cotq {

using Vector = Eigen::VectorXd;
/// Point sets are stored one point per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace cotq
