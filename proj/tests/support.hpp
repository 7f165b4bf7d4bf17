#pragma once

#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hyperfit/kinematics.hpp"
#include "hyperfit/tensor.hpp"

namespace hftest {

using hyperfit::Mat2;
using hyperfit::Mat3;
using hyperfit::Vec2;

inline double rel_err(double a, double b, double floor = 1e-12) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double rel_err(const Mat3& a, const Mat3& b, double floor = 1e-12) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), floor});
}

/// Uniformly random rotation of the plane embedded in 3D (rotates x-y, keeps e3).
inline Mat3 planar_rotation(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
  const double t = angle(rng);
  Mat3 q = Mat3::Identity();
  q(0, 0) = std::cos(t);
  q(0, 1) = -std::sin(t);
  q(1, 0) = std::sin(t);
  q(1, 1) = std::cos(t);
  return q;
}

/// Random proper rotation in 3D from a normalized quaternion.
inline Mat3 rotation3(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q.toRotationMatrix();
}

/// Random 3D F = I + perturbation with det F > 0.
inline Mat3 random_f3(std::mt19937_64& rng, double amplitude = 0.3) {
  std::uniform_real_distribution<double> d(-amplitude, amplitude);
  for (;;) {
    Mat3 f = Mat3::Identity();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) f(i, j) += d(rng);
    if (f.determinant() > 0.2) return f;
  }
}

/// Random plane F (F33 = 1, zero off-plane shear) with det > 0.
inline Mat3 random_f2(std::mt19937_64& rng, double amplitude = 0.3) {
  std::uniform_real_distribution<double> d(-amplitude, amplitude);
  for (;;) {
    Mat3 f = Mat3::Identity();
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) f(i, j) += d(rng);
    if (f.topLeftCorner<2, 2>().determinant() > 0.2) return f;
  }
}

inline hyperfit::Mesh unit_square(double thickness = 1.0) {
  hyperfit::Mesh m;
  m.nodes = {Vec2(0, 0), Vec2(1, 0), Vec2(1, 1), Vec2(0, 1)};
  m.kind = hyperfit::ElementKind::Quad4;
  m.connectivity = {0, 1, 2, 3};
  m.thickness = thickness;
  hyperfit::normalize_mesh(m);
  return m;
}

inline hyperfit::Mesh parse_mesh(const std::string& json) {
  std::istringstream in(json);
  return hyperfit::load_mesh(in);
}

/// Random nodal field with amplitude small enough to keep every element admissible.
inline std::vector<Vec2> random_field(std::size_t n, std::mt19937_64& rng, double amplitude) {
  std::uniform_real_distribution<double> d(-amplitude, amplitude);
  std::vector<Vec2> u(n);
  for (auto& v : u) v = Vec2(d(rng), d(rng));
  return u;
}

}  // namespace hftest
