#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace sast {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Input that violates a binary or text file format.
class MalformedFile : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Tensor or vector dimensions that do not line up.
class ShapeError : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace sast
