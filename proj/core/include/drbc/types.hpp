#pragma once

#include <Eigen/Dense>

namespace drbc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

}  // namespace drbc
