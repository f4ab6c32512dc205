#pragma once

#include <Eigen/Dense>

namespace mgsim {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

}  // namespace mgsim
