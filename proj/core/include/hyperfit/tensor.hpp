#pragma once

#include <Eigen/Dense>

namespace hyperfit {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

/// Frobenius inner product A : B.
inline double ddot(const Mat3& a, const Mat3& b) { return (a.array() * b.array()).sum(); }

}  // namespace hyperfit
