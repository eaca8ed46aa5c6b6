#pragma once

#include <cstdint>

#include <Eigen/Core>

namespace mimi {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
/// Observation mask; 1 where the entry is observed.
using Mask = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

}  // namespace mimi
