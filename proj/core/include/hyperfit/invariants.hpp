#pragma once

#include <array>
#include <string>

#include "hyperfit/tensor.hpp"

namespace hyperfit {

/// Features fed to the convex energy network: I1 = tr C, I2 = ((tr C)^2 - tr C^2)/2, J, -J.
enum class Feature { I1 = 0, I2 = 1, J = 2, NegJ = 3 };

constexpr std::size_t kFeatureCount = 4;

std::string to_string(Feature f);
Feature parse_feature(const std::string& name);

using InvariantVector = std::array<double, kFeatureCount>;
using InvariantDerivatives = std::array<Mat3, kFeatureCount>;

/// Feature values at the undeformed state F = I.
inline constexpr InvariantVector kReferenceInvariants{3.0, 3.0, 1.0, -1.0};

/// d x_k / dF at F = I equals kReferenceSlopes[k] * I.
inline constexpr InvariantVector kReferenceSlopes{2.0, 4.0, 1.0, -1.0};

/// Throws DomainError when det F <= 0.
InvariantVector invariants(const Mat3& f);

/// Closed-form dI1/dF = 2F, dI2/dF = 2(I1 F - F C), dJ/dF = J F^{-T}, d(-J)/dF = -J F^{-T}.
InvariantDerivatives invariant_derivatives(const Mat3& f);

}  // namespace hyperfit
