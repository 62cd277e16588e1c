#pragma once

#include <Eigen/Dense>

namespace cgc {

// Dense row-major doubles. Every quantity flowing through the model is a Mat;
// scalars are 1x1 so a single storage convention covers the whole pipeline.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace cgc
