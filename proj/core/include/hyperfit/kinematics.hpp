#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hyperfit/tensor.hpp"

namespace hyperfit {

enum class ElementKind { Quad4, Tri3 };

/// How the out-of-plane stretch F33 is obtained from the in-plane block.
enum class KinematicMode { PlaneStrain, IncompressiblePlaneStress };

constexpr int nodes_per_element(ElementKind kind) { return kind == ElementKind::Quad4 ? 4 : 3; }

std::string to_string(ElementKind kind);
std::string to_string(KinematicMode mode);
KinematicMode parse_kinematic_mode(const std::string& name);

/// 2D reference geometry in mm. Connectivity is stored flat, counter-clockwise per element.
struct Mesh {
  std::vector<Vec2> nodes;
  ElementKind kind = ElementKind::Quad4;
  std::vector<int> connectivity;
  std::map<std::string, std::vector<int>> node_sets;
  double thickness = 1.0;

  std::size_t node_count() const { return nodes.size(); }
  std::size_t element_count() const {
    return connectivity.size() / static_cast<std::size_t>(nodes_per_element(kind));
  }
  std::span<const int> element(std::size_t e) const {
    const auto n = static_cast<std::size_t>(nodes_per_element(kind));
    return std::span<const int>(connectivity).subspan(e * n, n);
  }
  const std::vector<int>& node_set(const std::string& name) const;
};

struct Reaction {
  Vec2 force = Vec2::Zero();
  std::array<bool, 2> mask{true, true};
};

/// One quasi-static increment: nodal displacements (mm) and measured grip forces (N).
struct LoadStep {
  int step_id = 0;
  std::vector<Vec2> displacements;
  std::map<std::string, Reaction> reactions;
};

struct Dataset {
  std::vector<LoadStep> steps;
};

/// Gauss point with reference shape-function gradients and its integration weight
/// (Gauss weight * det J * thickness, in mm^3).
struct QuadPoint {
  int element = 0;
  std::array<Vec2, 4> grad{};
  double weight = 0.0;
};

/// Checks every mesh invariant, sorts/dedupes node sets and reorders clockwise
/// elements to counter-clockwise. Throws ConfigError / DomainError.
void normalize_mesh(Mesh& mesh);

/// Throws ConfigError if the step does not fit the mesh.
void validate_step(const Mesh& mesh, const LoadStep& step);

Mesh load_mesh(std::istream& in);
void save_mesh(const Mesh& mesh, std::ostream& out);
Dataset load_dataset(std::istream& in);
void save_dataset(const Dataset& data, std::ostream& out);

/// quad4: 2x2 Gauss points per element, tri3: one centroid point.
std::vector<QuadPoint> precompute_quadrature(const Mesh& mesh);

/// Sum of integration weights (reference volume in mm^3).
double reference_volume(std::span<const QuadPoint> quad);

/// Fills F33 (and zeroes the off-plane shear entries) from the in-plane block.
Mat3 complete_out_of_plane(const Mat2& f2d, KinematicMode mode);

/// Deformation gradient at one quadrature point. Throws InvertedDeformation.
Mat3 deformation_gradient(const Mesh& mesh, const QuadPoint& qp, std::span<const Vec2> u,
                          KinematicMode mode);

/// Deformation gradient at every quadrature point.
std::vector<Mat3> deformation_gradient(const Mesh& mesh, std::span<const QuadPoint> quad,
                                       std::span<const Vec2> u, KinematicMode mode);

}  // namespace hyperfit
