#include "hyperfit/kinematics.hpp"

#include <algorithm>
#include <cmath>

#include "hyperfit/error.hpp"

namespace hyperfit {

namespace {

constexpr double kGauss = 0.57735026918962576451;  // 1/sqrt(3)
constexpr std::array<std::array<double, 2>, 4> kQuadPoints{{
    {-kGauss, -kGauss}, {kGauss, -kGauss}, {kGauss, kGauss}, {-kGauss, kGauss}}};

// Parent-domain gradients of the bilinear shape functions at (xi, eta).
std::array<Vec2, 4> quad4_parent_gradients(double xi, double eta) {
  return {Vec2(-0.25 * (1.0 - eta), -0.25 * (1.0 - xi)), Vec2(0.25 * (1.0 - eta), -0.25 * (1.0 + xi)),
          Vec2(0.25 * (1.0 + eta), 0.25 * (1.0 + xi)), Vec2(-0.25 * (1.0 + eta), 0.25 * (1.0 - xi))};
}

double signed_area(const Mesh& mesh, std::span<const int> element) {
  double twice = 0.0;
  for (std::size_t a = 0; a < element.size(); ++a) {
    const Vec2& p = mesh.nodes[static_cast<std::size_t>(element[a])];
    const Vec2& q = mesh.nodes[static_cast<std::size_t>(element[(a + 1) % element.size()])];
    twice += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * twice;
}

// Appends the quadrature points of element e; returns false on a non-positive Jacobian.
bool element_quadrature(const Mesh& mesh, std::size_t e, std::vector<QuadPoint>& out) {
  const auto conn = mesh.element(e);
  if (mesh.kind == ElementKind::Tri3) {
    const Vec2& p0 = mesh.nodes[static_cast<std::size_t>(conn[0])];
    const Vec2& p1 = mesh.nodes[static_cast<std::size_t>(conn[1])];
    const Vec2& p2 = mesh.nodes[static_cast<std::size_t>(conn[2])];
    Mat2 jac;
    jac.col(0) = p1 - p0;
    jac.col(1) = p2 - p0;
    const double det = jac.determinant();
    if (!(det > 0.0)) return false;
    // Parent gradients of (1-r-s, r, s) mapped through J^{-T}.
    const Mat2 inv_t = jac.inverse().transpose();
    QuadPoint qp;
    qp.element = static_cast<int>(e);
    qp.grad[0] = inv_t * Vec2(-1.0, -1.0);
    qp.grad[1] = inv_t * Vec2(1.0, 0.0);
    qp.grad[2] = inv_t * Vec2(0.0, 1.0);
    qp.grad[3] = Vec2::Zero();
    qp.weight = 0.5 * det * mesh.thickness;
    out.push_back(qp);
    return true;
  }
  for (const auto& [xi, eta] : kQuadPoints) {
    const auto parent = quad4_parent_gradients(xi, eta);
    Mat2 jac = Mat2::Zero();  // jac(i, j) = dX_i / dxi_j
    for (int a = 0; a < 4; ++a) {
      jac += mesh.nodes[static_cast<std::size_t>(conn[static_cast<std::size_t>(a)])] *
             parent[static_cast<std::size_t>(a)].transpose();
    }
    const double det = jac.determinant();
    if (!(det > 0.0)) return false;
    const Mat2 inv_t = jac.inverse().transpose();
    QuadPoint qp;
    qp.element = static_cast<int>(e);
    for (std::size_t a = 0; a < 4; ++a) qp.grad[a] = inv_t * parent[a];
    qp.weight = det * mesh.thickness;
    out.push_back(qp);
  }
  return true;
}

}  // namespace

std::string to_string(ElementKind kind) { return kind == ElementKind::Quad4 ? "quad4" : "tri3"; }

std::string to_string(KinematicMode mode) {
  return mode == KinematicMode::PlaneStrain ? "plane_strain" : "incompressible_plane_stress";
}

KinematicMode parse_kinematic_mode(const std::string& name) {
  if (name == "plane_strain") return KinematicMode::PlaneStrain;
  if (name == "incompressible_plane_stress") return KinematicMode::IncompressiblePlaneStress;
  throw ConfigError("unknown kinematic mode '" + name + "'");
}

const std::vector<int>& Mesh::node_set(const std::string& name) const {
  const auto it = node_sets.find(name);
  if (it == node_sets.end()) throw ConfigError("unknown node set '" + name + "'");
  return it->second;
}

void normalize_mesh(Mesh& mesh) {
  const auto n_nodes = static_cast<int>(mesh.nodes.size());
  const auto npe = static_cast<std::size_t>(nodes_per_element(mesh.kind));
  if (mesh.nodes.empty()) throw ConfigError("mesh has no nodes");
  if (mesh.connectivity.empty() || mesh.connectivity.size() % npe != 0) {
    throw ConfigError("connectivity size is not a positive multiple of " + std::to_string(npe));
  }
  if (!(mesh.thickness > 0.0)) throw ConfigError("thickness must be positive");
  for (const Vec2& p : mesh.nodes) {
    if (!p.allFinite()) throw ConfigError("non-finite node coordinate");
  }

  std::vector<QuadPoint> scratch;
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    int* conn = mesh.connectivity.data() + e * npe;
    for (std::size_t a = 0; a < npe; ++a) {
      if (conn[a] < 0 || conn[a] >= n_nodes) {
        throw ConfigError("element " + std::to_string(e) + " references node " +
                          std::to_string(conn[a]) + " out of range");
      }
      for (std::size_t b = 0; b < a; ++b) {
        if (conn[a] == conn[b]) {
          throw ConfigError("element " + std::to_string(e) + " repeats node " + std::to_string(conn[a]));
        }
      }
    }
    if (signed_area(mesh, mesh.element(e)) < 0.0) std::reverse(conn + 1, conn + npe);
    scratch.clear();
    if (!element_quadrature(mesh, e, scratch)) {
      throw DomainError("inverted element " + std::to_string(e));
    }
  }

  for (auto& [name, ids] : mesh.node_sets) {
    if (name.empty()) throw ConfigError("empty node-set name");
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    for (int id : ids) {
      if (id < 0 || id >= n_nodes) {
        throw ConfigError("dangling node-set index " + std::to_string(id) + " in set '" + name + "'");
      }
    }
  }
}

void validate_step(const Mesh& mesh, const LoadStep& step) {
  const std::string where = "step " + std::to_string(step.step_id) + ": ";
  if (step.displacements.size() != mesh.node_count()) {
    throw ConfigError(where + "displacement count " + std::to_string(step.displacements.size()) +
                      " does not match node count " + std::to_string(mesh.node_count()));
  }
  for (const Vec2& u : step.displacements) {
    if (!u.allFinite()) throw ConfigError(where + "non-finite displacement");
  }
  for (const auto& [name, reaction] : step.reactions) {
    if (!mesh.node_sets.contains(name)) throw ConfigError(where + "reaction set '" + name + "' not in mesh");
    if (!reaction.mask[0] && !reaction.mask[1]) {
      throw ConfigError(where + "reaction set '" + name + "' has an all-false mask");
    }
    if (!reaction.force.allFinite()) throw ConfigError(where + "non-finite reaction");
  }
}

std::vector<QuadPoint> precompute_quadrature(const Mesh& mesh) {
  std::vector<QuadPoint> quad;
  quad.reserve(mesh.element_count() * (mesh.kind == ElementKind::Quad4 ? 4 : 1));
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    if (!element_quadrature(mesh, e, quad)) throw DomainError("inverted element " + std::to_string(e));
  }
  return quad;
}

double reference_volume(std::span<const QuadPoint> quad) {
  double v = 0.0;
  for (const auto& qp : quad) v += qp.weight;
  return v;
}

Mat3 complete_out_of_plane(const Mat2& f2d, KinematicMode mode) {
  Mat3 f = Mat3::Zero();
  f.topLeftCorner<2, 2>() = f2d;
  f(2, 2) = mode == KinematicMode::PlaneStrain ? 1.0 : 1.0 / f2d.determinant();
  return f;
}

Mat3 deformation_gradient(const Mesh& mesh, const QuadPoint& qp, std::span<const Vec2> u,
                          KinematicMode mode) {
  const auto conn = mesh.element(static_cast<std::size_t>(qp.element));
  Mat2 f2d = Mat2::Identity();
  for (std::size_t a = 0; a < conn.size(); ++a) {
    f2d += u[static_cast<std::size_t>(conn[a])] * qp.grad[a].transpose();
  }
  const double det = f2d.determinant();
  if (!(det > 0.0)) {
    throw InvertedDeformation(qp.element, "locally inverted deformation in element " +
                                              std::to_string(qp.element));
  }
  return complete_out_of_plane(f2d, mode);
}

std::vector<Mat3> deformation_gradient(const Mesh& mesh, std::span<const QuadPoint> quad,
                                       std::span<const Vec2> u, KinematicMode mode) {
  if (u.size() != mesh.node_count()) throw ConfigError("displacement count does not match node count");
  std::vector<Mat3> out;
  out.reserve(quad.size());
  for (const auto& qp : quad) out.push_back(deformation_gradient(mesh, qp, u, mode));
  return out;
}

}  // namespace hyperfit
