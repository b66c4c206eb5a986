#pragma once

#include <Eigen/Dense>

namespace graphik {

/// Row-major dense matrix; rows index batch items (edges, nodes, samples).
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace graphik
