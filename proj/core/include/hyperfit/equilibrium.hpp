#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hyperfit/execution.hpp"
#include "hyperfit/kinematics.hpp"
#include "hyperfit/material.hpp"

namespace hyperfit {

/// Node roles in the equilibrium gap: free nodes must carry zero net force, the summed
/// force on each reaction set must match the measured load, fixed nodes are ignored.
struct DofPartition {
  struct ReactionSet {
    std::string name;
    std::vector<int> nodes;
  };
  std::vector<int> free;
  std::vector<ReactionSet> reactions;
  std::vector<int> fixed;
};

/// Builds the partition from mesh node sets. Throws ConfigError when sets overlap or
/// when no free node remains.
DofPartition make_partition(const Mesh& mesh, std::span<const std::string> reaction_sets,
                            std::span<const std::string> fixed_sets);

struct EquilibriumReport {
  int step_id = 0;
  double inner_residual = 0.0;     ///< mean squared free-node force (N^2)
  double boundary_residual = 0.0;  ///< squared masked reaction mismatch summed over sets (N^2)
  double inner_term = 0.0;         ///< sum of squared free-node forces / s^2
  double boundary_term = 0.0;      ///< squared reaction mismatch / s^2
  double loss = 0.0;               ///< inner_term + lambda_r * boundary_term
  std::vector<Vec2> forces;        ///< internal nodal forces (N)
};

inline constexpr double kDefaultReactionWeight = 100.0;

/// f_a = sum_q w_q P(F_q) dN_a/dX, the derivative of the stored energy with respect to u_a.
std::vector<Vec2> internal_forces(const Mesh& mesh, std::span<const QuadPoint> quad, const Law& law,
                                  std::span<const Vec2> u);
std::vector<Vec2> internal_forces(const Mesh& mesh, std::span<const QuadPoint> quad, const Model& model,
                                  std::span<const Vec2> u);

/// Pi(u) = sum_q w_q W(F_q) in mJ.
double stored_energy(const Mesh& mesh, std::span<const QuadPoint> quad, const Law& law, std::span<const Vec2> u);

/// Force normalization: largest measured reaction magnitude, floored at 1 N.
double reaction_scale(const LoadStep& step, const DofPartition& part);

EquilibriumReport equilibrium_loss(const Mesh& mesh, std::span<const QuadPoint> quad, const Law& law,
                                   const LoadStep& step, const DofPartition& part,
                                   double lambda_r = kDefaultReactionWeight);
EquilibriumReport equilibrium_loss(const Mesh& mesh, std::span<const QuadPoint> quad, const Model& model,
                                   const LoadStep& step, const DofPartition& part,
                                   double lambda_r = kDefaultReactionWeight);

struct LossGradient {
  double loss = 0.0;
  std::vector<double> gradient;
};

/// Summed loss over `steps` and its exact gradient with respect to the raw model parameters.
/// Per-step contributions are reduced in step order, then element, then quadrature point.
LossGradient loss_gradient(const Mesh& mesh, std::span<const QuadPoint> quad, const Model& model,
                           std::span<const LoadStep* const> steps, const DofPartition& part,
                           double lambda_r = kDefaultReactionWeight, const Execution& exec = {});

/// CSV with header `node,x,y,fx,fy`.
void write_force_csv(const Mesh& mesh, std::span<const Vec2> forces, std::ostream& out);

}  // namespace hyperfit
