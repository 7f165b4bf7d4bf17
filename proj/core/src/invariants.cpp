#include "hyperfit/invariants.hpp"

#include "hyperfit/error.hpp"

namespace hyperfit {

std::string to_string(Feature f) {
  switch (f) {
    case Feature::I1: return "I1";
    case Feature::I2: return "I2";
    case Feature::J: return "J";
    case Feature::NegJ: return "-J";
  }
  return "?";
}

Feature parse_feature(const std::string& name) {
  if (name == "I1") return Feature::I1;
  if (name == "I2") return Feature::I2;
  if (name == "J") return Feature::J;
  if (name == "-J") return Feature::NegJ;
  throw ConfigError("unknown invariant feature '" + name + "'");
}

InvariantVector invariants(const Mat3& f) {
  const double j = f.determinant();
  if (!(j > 0.0)) throw DomainError("invariants: det F must be positive");
  const Mat3 c = f.transpose() * f;
  const double i1 = c.trace();
  const double i2 = 0.5 * (i1 * i1 - (c * c).trace());
  return {i1, i2, j, -j};
}

InvariantDerivatives invariant_derivatives(const Mat3& f) {
  const double j = f.determinant();
  if (!(j > 0.0)) throw DomainError("invariant_derivatives: det F must be positive");
  const Mat3 c = f.transpose() * f;
  const double i1 = c.trace();
  const Mat3 cof = j * f.inverse().transpose();
  return {2.0 * f, 2.0 * (i1 * f - f * c), cof, -cof};
}

}  // namespace hyperfit
