#include "hyperfit/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "hyperfit/error.hpp"

namespace hyperfit {

namespace {

const Reaction& measured(const LoadStep& step, const std::string& name) {
  const auto it = step.reactions.find(name);
  if (it == step.reactions.end()) {
    throw ConfigError("step " + std::to_string(step.step_id) + " has no reaction for set '" + name + "'");
  }
  return it->second;
}

Vec2 masked(const Vec2& v, const std::array<bool, 2>& mask) {
  return {mask[0] ? v.x() : 0.0, mask[1] ? v.y() : 0.0};
}

// Assembles nodal forces from per-point stresses already evaluated.
std::vector<Vec2> assemble(const Mesh& mesh, std::span<const QuadPoint> quad, std::span<const Mat3> stresses) {
  std::vector<Vec2> f(mesh.node_count(), Vec2::Zero());
  for (std::size_t q = 0; q < quad.size(); ++q) {
    const auto& qp = quad[q];
    const Mat2 p = stresses[q].topLeftCorner<2, 2>();
    const auto conn = mesh.element(static_cast<std::size_t>(qp.element));
    for (std::size_t a = 0; a < conn.size(); ++a) {
      f[static_cast<std::size_t>(conn[a])] += qp.weight * (p * qp.grad[a]);
    }
  }
  return f;
}

std::vector<Mat3> evaluate_stresses(const Mesh& mesh, std::span<const QuadPoint> quad, const Law& law,
                                    std::span<const Vec2> u, int step_id) {
  std::vector<Mat3> stresses;
  stresses.reserve(quad.size());
  for (const auto& qp : quad) {
    const Mat3 p = law.stress(deformation_gradient(mesh, qp, u, law.mode));
    if (!p.allFinite()) {
      throw NumericalError(step_id, qp.element,
                           "non-finite stress in step " + std::to_string(step_id) + ", element " +
                               std::to_string(qp.element));
    }
    stresses.push_back(p);
  }
  return stresses;
}

// Fills the report and the co-gradient d loss / d f_a for every node.
EquilibriumReport score(const LoadStep& step, const DofPartition& part, double lambda_r, std::vector<Vec2> forces,
                        std::vector<Vec2>* cograd) {
  EquilibriumReport report;
  report.step_id = step.step_id;
  const double s = reaction_scale(step, part);
  const double s2 = s * s;
  if (cograd) cograd->assign(forces.size(), Vec2::Zero());

  double inner = 0.0;
  for (int a : part.free) {
    const Vec2& f = forces[static_cast<std::size_t>(a)];
    inner += f.squaredNorm();
    if (cograd) (*cograd)[static_cast<std::size_t>(a)] = (2.0 / s2) * f;
  }
  double boundary = 0.0;
  for (const auto& set : part.reactions) {
    const Reaction& r = measured(step, set.name);
    Vec2 sum = Vec2::Zero();
    for (int a : set.nodes) sum += forces[static_cast<std::size_t>(a)];
    const Vec2 mismatch = masked(sum - r.force, r.mask);
    boundary += mismatch.squaredNorm();
    if (cograd) {
      for (int a : set.nodes) (*cograd)[static_cast<std::size_t>(a)] = (2.0 * lambda_r / s2) * mismatch;
    }
  }
  report.inner_residual = inner / static_cast<double>(part.free.size());
  report.boundary_residual = boundary;
  report.inner_term = inner / s2;
  report.boundary_term = boundary / s2;
  report.loss = report.inner_term + lambda_r * report.boundary_term;
  if (!std::isfinite(report.loss)) throw NumericalError(step.step_id, -1, "non-finite loss in step " + std::to_string(step.step_id));
  report.forces = std::move(forces);
  return report;
}

struct StepGradient {
  double loss = 0.0;
  double offset_weight = 0.0;
  std::vector<double> gradient;
};

StepGradient step_gradient(const Mesh& mesh, std::span<const QuadPoint> quad, const Model& model, const Law& law,
                           const LoadStep& step, const DofPartition& part, double lambda_r) {
  std::vector<Mat3> deformation;
  deformation.reserve(quad.size());
  for (const auto& qp : quad) deformation.push_back(deformation_gradient(mesh, qp, step.displacements, law.mode));
  std::vector<Mat3> stresses;
  stresses.reserve(quad.size());
  for (std::size_t q = 0; q < quad.size(); ++q) {
    const Mat3 p = law.stress(deformation[q]);
    if (!p.allFinite()) {
      throw NumericalError(step.step_id, quad[q].element,
                           "non-finite stress in step " + std::to_string(step.step_id) + ", element " +
                               std::to_string(quad[q].element));
    }
    stresses.push_back(p);
  }
  std::vector<Vec2> cograd;
  const auto report = score(step, part, lambda_r, assemble(mesh, quad, stresses), &cograd);

  StepGradient out;
  out.loss = report.loss;
  out.gradient.assign(parameter_count(model), 0.0);
  const auto* pann = std::get_if<PannModel>(&model);
  const auto* nh = std::get_if<NeoHookeanModel>(&model);
  for (std::size_t q = 0; q < quad.size(); ++q) {
    const auto& qp = quad[q];
    const auto conn = mesh.element(static_cast<std::size_t>(qp.element));
    Mat3 upstream = Mat3::Zero();
    for (std::size_t a = 0; a < conn.size(); ++a) {
      upstream.topLeftCorner<2, 2>() += cograd[static_cast<std::size_t>(conn[a])] * qp.grad[a].transpose();
    }
    if (upstream.isZero(0.0)) continue;
    upstream *= qp.weight;
    if (pann) {
      pann->accumulate_weight_gradient(deformation[q], upstream, out.gradient, out.offset_weight);
    } else {
      nh->accumulate_weight_gradient(deformation[q], upstream, out.gradient);
    }
  }
  return out;
}

}  // namespace

DofPartition make_partition(const Mesh& mesh, std::span<const std::string> reaction_sets,
                            std::span<const std::string> fixed_sets) {
  enum class Role { Free, Reaction, Fixed };
  std::vector<Role> role(mesh.node_count(), Role::Free);
  DofPartition part;
  for (const auto& name : reaction_sets) {
    DofPartition::ReactionSet set{name, mesh.node_set(name)};
    for (int a : set.nodes) {
      if (role[static_cast<std::size_t>(a)] != Role::Free) {
        throw ConfigError("node " + std::to_string(a) + " belongs to more than one reaction/fixed set");
      }
      role[static_cast<std::size_t>(a)] = Role::Reaction;
    }
    part.reactions.push_back(std::move(set));
  }
  for (const auto& name : fixed_sets) {
    for (int a : mesh.node_set(name)) {
      if (role[static_cast<std::size_t>(a)] == Role::Reaction) {
        throw ConfigError("node " + std::to_string(a) + " is both fixed and in a reaction set");
      }
      role[static_cast<std::size_t>(a)] = Role::Fixed;
    }
  }
  for (std::size_t a = 0; a < role.size(); ++a) {
    if (role[a] == Role::Free) part.free.push_back(static_cast<int>(a));
    if (role[a] == Role::Fixed) part.fixed.push_back(static_cast<int>(a));
  }
  if (part.free.empty()) throw ConfigError("partition has no free nodes");
  return part;
}

std::vector<Vec2> internal_forces(const Mesh& mesh, std::span<const QuadPoint> quad, const Law& law,
                                  std::span<const Vec2> u) {
  if (u.size() != mesh.node_count()) throw ConfigError("displacement count does not match node count");
  const auto stresses = evaluate_stresses(mesh, quad, law, u, -1);
  return assemble(mesh, quad, stresses);
}

std::vector<Vec2> internal_forces(const Mesh& mesh, std::span<const QuadPoint> quad, const Model& model,
                                  std::span<const Vec2> u) {
  return internal_forces(mesh, quad, make_law(model), u);
}

double stored_energy(const Mesh& mesh, std::span<const QuadPoint> quad, const Law& law, std::span<const Vec2> u) {
  double total = 0.0;
  for (const auto& qp : quad) total += qp.weight * law.energy(deformation_gradient(mesh, qp, u, law.mode));
  return total;
}

double reaction_scale(const LoadStep& step, const DofPartition& part) {
  double s = 1.0;
  for (const auto& set : part.reactions) s = std::max(s, measured(step, set.name).force.norm());
  return s;
}

EquilibriumReport equilibrium_loss(const Mesh& mesh, std::span<const QuadPoint> quad, const Law& law,
                                   const LoadStep& step, const DofPartition& part, double lambda_r) {
  if (part.free.empty()) throw ConfigError("partition has no free nodes");
  if (step.displacements.size() != mesh.node_count()) throw ConfigError("displacement count does not match node count");
  const auto stresses = evaluate_stresses(mesh, quad, law, step.displacements, step.step_id);
  return score(step, part, lambda_r, assemble(mesh, quad, stresses), nullptr);
}

EquilibriumReport equilibrium_loss(const Mesh& mesh, std::span<const QuadPoint> quad, const Model& model,
                                   const LoadStep& step, const DofPartition& part, double lambda_r) {
  return equilibrium_loss(mesh, quad, make_law(model), step, part, lambda_r);
}

LossGradient loss_gradient(const Mesh& mesh, std::span<const QuadPoint> quad, const Model& model,
                           std::span<const LoadStep* const> steps, const DofPartition& part, double lambda_r,
                           const Execution& exec) {
  if (steps.empty()) throw ConfigError("loss_gradient needs at least one step");
  if (part.free.empty()) throw ConfigError("partition has no free nodes");
  const Law law = make_law(model);
  std::vector<StepGradient> per_step(steps.size());
  parallel_for(steps.size(), exec, [&](std::size_t i) {
    if (steps[i]->displacements.size() != mesh.node_count()) {
      throw ConfigError("displacement count does not match node count");
    }
    per_step[i] = step_gradient(mesh, quad, model, law, *steps[i], part, lambda_r);
  });

  LossGradient out;
  out.gradient.assign(parameter_count(model), 0.0);
  double offset_weight = 0.0;
  for (const auto& s : per_step) {
    out.loss += s.loss;
    offset_weight += s.offset_weight;
    for (std::size_t k = 0; k < s.gradient.size(); ++k) out.gradient[k] += s.gradient[k];
  }
  if (const auto* pann = std::get_if<PannModel>(&model)) pann->finish_weight_gradient(offset_weight, out.gradient);
  return out;
}

void write_force_csv(const Mesh& mesh, std::span<const Vec2> forces, std::ostream& out) {
  out << "node,x,y,fx,fy\n" << std::setprecision(17);
  for (std::size_t a = 0; a < mesh.node_count(); ++a) {
    out << a << ',' << mesh.nodes[a].x() << ',' << mesh.nodes[a].y() << ',' << forces[a].x() << ',' << forces[a].y()
        << '\n';
  }
}

}  // namespace hyperfit
