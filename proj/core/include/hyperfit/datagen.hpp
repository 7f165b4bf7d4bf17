#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "hyperfit/error.hpp"
#include "hyperfit/kinematics.hpp"
#include "hyperfit/material.hpp"

namespace hyperfit {

/// Ground-truth laws used only to synthesize experiments.
struct NeoHookeanTruth {
  double mu = 0.4;
  double lambda = 4.0;
};

/// W = c10 (I1 - 3) + c01 (I2 - 3) - 2 (c10 + 2 c01) ln J + lambda/2 (J - 1)^2.
struct MooneyRivlinTruth {
  double c10 = 0.15;
  double c01 = 0.1;
  double lambda = 4.0;
};

using GroundTruthMaterial = std::variant<NeoHookeanTruth, MooneyRivlinTruth>;

void validate(const GroundTruthMaterial& material);
double truth_energy(const GroundTruthMaterial& material, const Mat3& f);
/// Full 3D first Piola-Kirchhoff stress.
Mat3 truth_stress(const GroundTruthMaterial& material, const Mat3& f);
Law make_law(const GroundTruthMaterial& material, KinematicMode mode);

/// Structured quad4 strip of width x height mm split into nx x ny elements.
struct StripGeometry {
  double width = 10.0;
  double height = 30.0;
  int nx = 8;
  int ny = 24;
  double thickness = 1.0;
};

/// Strip with the listed (column, row) elements removed.
struct NotchedStripGeometry {
  StripGeometry strip;
  std::vector<std::pair<int, int>> removed;
};

using Geometry = std::variant<StripGeometry, NotchedStripGeometry>;

/// Mirrors a notched strip about its vertical mid-line (notch moves to the other edge).
NotchedStripGeometry mirrored(const NotchedStripGeometry& geometry);

/// Structured quad4 mesh with node sets "bottom" (y = 0) and "top" (y = height).
/// Nodes not used by any remaining element are dropped. Throws ConfigError when the
/// removed elements disconnect the mesh or empty a grip.
Mesh generate_mesh(const Geometry& geometry);

/// Uniaxial program: "bottom" held, "top" held and moved axially by (stretch - 1) * height.
struct LoadProgram {
  Geometry geometry;
  std::vector<double> stretches;
};

/// Throws ConfigError unless stretches are strictly increasing and >= 1.
void validate(const LoadProgram& program);

/// n evenly spaced stretch targets in (1, last].
std::vector<double> uniform_stretches(double last, int n);

struct NamedProgram {
  std::string name;
  LoadProgram program;
};

/// Shipped two-experiment design: an 8 x 24 strip ("strip") and the same strip with a
/// 3 x 2 element edge notch at mid-height ("notched"), both pulled to stretch 1.5 in 26 steps.
std::vector<NamedProgram> default_programs();

struct SolverOptions {
  double tolerance = 1e-9;  ///< free-residual infinity norm (N)
  int max_iterations = 30;
  int max_bisections = 6;   ///< each target may be split into up to 2^max_bisections increments
  double max_increment = 0.05;  ///< largest stretch increment attempted in one Newton solve
  int max_increments = 200;     ///< budget of Newton solves (converged or not) per stretch target
  double fd_step = 1e-6;    ///< displacement perturbation for the tangent (mm)
  bool clamp_lateral = true;  ///< false: grips only hold the axial component (one bottom node pinned in x)
};

/// Total-Lagrangian Newton solve of the load program. Tangent columns are central differences
/// of element internal forces. Each emitted step carries the summed "top" force as its reaction.
/// Throws SolverError with the last converged stretch when bisection or the increment budget
/// is exhausted.
Dataset forward_solve(const Mesh& mesh, const Law& law, const std::vector<double>& stretches,
                      const SolverOptions& options = {});
Dataset forward_solve(const Mesh& mesh, const GroundTruthMaterial& material, KinematicMode mode,
                      const std::vector<double>& stretches, const SolverOptions& options = {});

struct NoiseSpec {
  double sigma_u = 0.0;  ///< mm
  double sigma_r = 0.0;  ///< N
  std::uint64_t seed = 0;
};

/// Adds i.i.d. Gaussian noise to every displacement and reaction component.
Dataset add_noise(const Dataset& data, const NoiseSpec& spec);

/// Largest principal in-plane stretch over all quadrature points of all steps.
double max_principal_stretch(const Mesh& mesh, const Dataset& data, KinematicMode mode);

}  // namespace hyperfit
