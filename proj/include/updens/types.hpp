#pragma once

#include <Eigen/Core>

namespace updens {

using Vector = Eigen::VectorXd;
//! Dense row-major storage; rows are observations.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

} // namespace updens
