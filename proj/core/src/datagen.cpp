#include "hyperfit/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "hyperfit/equilibrium.hpp"
#include "hyperfit/error.hpp"

namespace hyperfit {

// ---------------------------------------------------------------------------
// Ground-truth materials

void validate(const GroundTruthMaterial& material) {
  std::visit(
      [](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, NeoHookeanTruth>) {
          if (!(m.mu > 0.0) || !(m.lambda >= 0.0)) throw ConfigError("neo-hookean truth needs mu > 0, lambda >= 0");
        } else {
          if (!(m.c10 > 0.0) || !(m.c01 >= 0.0) || !(m.lambda >= 0.0)) {
            throw ConfigError("mooney-rivlin truth needs c10 > 0, c01 >= 0, lambda >= 0");
          }
        }
      },
      material);
}

double truth_energy(const GroundTruthMaterial& material, const Mat3& f) {
  const double j = f.determinant();
  if (!(j > 0.0)) throw DomainError("truth_energy: det F must be positive");
  const Mat3 c = f.transpose() * f;
  const double i1 = c.trace();
  if (const auto* nh = std::get_if<NeoHookeanTruth>(&material)) {
    return 0.5 * nh->mu * (i1 - 3.0 - 2.0 * std::log(j)) + 0.5 * nh->lambda * (j - 1.0) * (j - 1.0);
  }
  const auto& mr = std::get<MooneyRivlinTruth>(material);
  const double i2 = 0.5 * (i1 * i1 - (c * c).trace());
  return mr.c10 * (i1 - 3.0) + mr.c01 * (i2 - 3.0) - 2.0 * (mr.c10 + 2.0 * mr.c01) * std::log(j) +
         0.5 * mr.lambda * (j - 1.0) * (j - 1.0);
}

Mat3 truth_stress(const GroundTruthMaterial& material, const Mat3& f) {
  const double j = f.determinant();
  if (!(j > 0.0)) throw DomainError("truth_stress: det F must be positive");
  const Mat3 f_inv_t = f.inverse().transpose();
  if (const auto* nh = std::get_if<NeoHookeanTruth>(&material)) {
    return nh->mu * (f - f_inv_t) + nh->lambda * j * (j - 1.0) * f_inv_t;
  }
  const auto& mr = std::get<MooneyRivlinTruth>(material);
  const Mat3 c = f.transpose() * f;
  const double i1 = c.trace();
  return 2.0 * mr.c10 * f + 2.0 * mr.c01 * (i1 * f - f * c) - 2.0 * (mr.c10 + 2.0 * mr.c01) * f_inv_t +
         mr.lambda * j * (j - 1.0) * f_inv_t;
}

Law make_law(const GroundTruthMaterial& material, KinematicMode mode) {
  validate(material);
  return Law{mode,
             [material, mode](const Mat3& f) { return truth_energy(material, admissible_deformation(f, mode)); },
             [material, mode](const Mat3& f) {
               const Mat3 fa = admissible_deformation(f, mode);
               return reduce_stress(truth_stress(material, fa), fa, mode);
             }};
}

// ---------------------------------------------------------------------------
// Geometry

NotchedStripGeometry mirrored(const NotchedStripGeometry& geometry) {
  NotchedStripGeometry out = geometry;
  for (auto& [i, j] : out.removed) i = geometry.strip.nx - 1 - i;
  return out;
}

Mesh generate_mesh(const Geometry& geometry) {
  const StripGeometry& strip = std::visit(
      [](const auto& g) -> const StripGeometry& {
        if constexpr (std::is_same_v<std::decay_t<decltype(g)>, StripGeometry>) {
          return g;
        } else {
          return g.strip;
        }
      },
      geometry);
  if (strip.nx < 1 || strip.ny < 1) throw ConfigError("strip needs nx, ny >= 1");
  if (!(strip.width > 0.0) || !(strip.height > 0.0) || !(strip.thickness > 0.0)) {
    throw ConfigError("strip dimensions must be positive");
  }
  const int nx = strip.nx;
  const int ny = strip.ny;
  std::vector<bool> keep(static_cast<std::size_t>(nx * ny), true);
  if (const auto* notched = std::get_if<NotchedStripGeometry>(&geometry)) {
    for (const auto& [i, j] : notched->removed) {
      if (i < 0 || i >= nx || j < 0 || j >= ny) throw ConfigError("notch element outside the strip");
      keep[static_cast<std::size_t>(j * nx + i)] = false;
    }
  }

  // Connectivity of the remaining elements through shared edges.
  std::vector<int> parent(keep.size());
  std::iota(parent.begin(), parent.end(), 0);
  const auto find = [&parent](int e) {
    while (parent[static_cast<std::size_t>(e)] != e) {
      parent[static_cast<std::size_t>(e)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(e)])];
      e = parent[static_cast<std::size_t>(e)];
    }
    return e;
  };
  const auto kept = [&](int i, int j) { return keep[static_cast<std::size_t>(j * nx + i)]; };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      if (!kept(i, j)) continue;
      if (i + 1 < nx && kept(i + 1, j)) parent[static_cast<std::size_t>(find(j * nx + i))] = find(j * nx + i + 1);
      if (j + 1 < ny && kept(i, j + 1)) parent[static_cast<std::size_t>(find(j * nx + i))] = find((j + 1) * nx + i);
    }
  }
  int root = -1;
  for (int e = 0; e < nx * ny; ++e) {
    if (!keep[static_cast<std::size_t>(e)]) continue;
    if (root < 0) root = find(e);
    if (find(e) != root) throw ConfigError("notch removal leaves the mesh disconnected");
  }
  if (root < 0) throw ConfigError("notch removal leaves no elements");

  const auto grid = [nx](int i, int j) { return j * (nx + 1) + i; };
  std::vector<int> new_id(static_cast<std::size_t>((nx + 1) * (ny + 1)), -1);
  std::vector<int> raw_conn;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      if (!kept(i, j)) continue;
      for (int node : {grid(i, j), grid(i + 1, j), grid(i + 1, j + 1), grid(i, j + 1)}) {
        raw_conn.push_back(node);
        new_id[static_cast<std::size_t>(node)] = 0;
      }
    }
  }

  Mesh mesh;
  mesh.kind = ElementKind::Quad4;
  mesh.thickness = strip.thickness;
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      auto& id = new_id[static_cast<std::size_t>(grid(i, j))];
      if (id < 0) continue;
      id = static_cast<int>(mesh.nodes.size());
      mesh.nodes.emplace_back(strip.width * i / nx, strip.height * j / ny);
      if (j == 0) mesh.node_sets["bottom"].push_back(id);
      if (j == ny) mesh.node_sets["top"].push_back(id);
    }
  }
  mesh.connectivity.reserve(raw_conn.size());
  for (int node : raw_conn) mesh.connectivity.push_back(new_id[static_cast<std::size_t>(node)]);
  if (mesh.node_sets["bottom"].empty() || mesh.node_sets["top"].empty()) {
    throw ConfigError("notch removal empties a grip");
  }
  normalize_mesh(mesh);
  return mesh;
}

void validate(const LoadProgram& program) {
  if (program.stretches.empty()) throw ConfigError("load program has no stretch targets");
  double prev = 1.0;
  for (std::size_t k = 0; k < program.stretches.size(); ++k) {
    const double s = program.stretches[k];
    if (!std::isfinite(s) || s < 1.0) throw ConfigError("stretch targets must be >= 1");
    if (k > 0 && !(s > prev)) throw ConfigError("stretch targets must be strictly increasing");
    prev = s;
  }
}

std::vector<double> uniform_stretches(double last, int n) {
  if (n < 1 || !(last > 1.0)) throw ConfigError("uniform_stretches needs n >= 1 and last > 1");
  std::vector<double> s(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) s[static_cast<std::size_t>(k)] = 1.0 + (last - 1.0) * (k + 1) / n;
  return s;
}

std::vector<NamedProgram> default_programs() {
  const StripGeometry strip{};
  NotchedStripGeometry notched{strip, {}};
  for (int i = 0; i < 3; ++i) {
    for (int j = 11; j <= 12; ++j) notched.removed.emplace_back(i, j);
  }
  const auto stretches = uniform_stretches(1.5, 26);
  return {{"strip", {strip, stretches}}, {"notched", {notched, stretches}}};
}

// ---------------------------------------------------------------------------
// Forward solve

namespace {

class NewtonSolver {
 public:
  NewtonSolver(const Mesh& mesh, const Law& law, const SolverOptions& options)
      : mesh_(mesh), law_(law), options_(options), quad_(precompute_quadrature(mesh)) {
    const auto& bottom = mesh.node_set("bottom");
    const auto& top = mesh.node_set("top");
    dof_of_.assign(2 * mesh.node_count(), -1);
    std::vector<bool> held(2 * mesh.node_count(), false);
    for (const auto* grip : {&bottom, &top}) {
      for (int a : *grip) {
        held[2 * static_cast<std::size_t>(a) + 1] = true;
        if (options.clamp_lateral) held[2 * static_cast<std::size_t>(a)] = true;
      }
    }
    held[2 * static_cast<std::size_t>(bottom.front())] = true;
    for (std::size_t d = 0; d < held.size(); ++d) {
      if (held[d]) continue;
      dof_of_[d] = static_cast<int>(free_dofs_.size());
      free_dofs_.push_back(d);
    }
    top_ = top;
    bottom_y_ = mesh.nodes[static_cast<std::size_t>(bottom.front())].y();
    height_ = mesh.nodes[static_cast<std::size_t>(top.front())].y() - bottom_y_;
    first_qp_.assign(mesh.element_count() + 1, 0);
    for (const auto& qp : quad_) ++first_qp_[static_cast<std::size_t>(qp.element) + 1];
    std::partial_sum(first_qp_.begin(), first_qp_.end(), first_qp_.begin());
  }

  // Newton iterations at `stretch` starting from `u` (updated in place on success).
  bool solve(std::vector<Vec2>& u, double prev_stretch, double stretch) const {
    std::vector<Vec2> trial = u;
    for (std::size_t a = 0; a < trial.size(); ++a) {
      trial[a].y() += (stretch - prev_stretch) * (mesh_.nodes[a].y() - bottom_y_);
    }
    for (int a : top_) trial[static_cast<std::size_t>(a)].y() = (stretch - 1.0) * height_;
    for (int a : mesh_.node_set("bottom")) trial[static_cast<std::size_t>(a)].y() = 0.0;

    Eigen::VectorXd r;
    if (!residual(trial, r)) return false;
    for (int it = 0; it < options_.max_iterations; ++it) {
      if (free_dofs_.empty() || r.lpNorm<Eigen::Infinity>() < options_.tolerance) {
        u = std::move(trial);
        return true;
      }
      Eigen::MatrixXd k;
      if (!tangent(trial, k)) return false;
      Eigen::PartialPivLU<Eigen::MatrixXd> lu(k);
      const Eigen::VectorXd delta = lu.solve(-r);
      if (!delta.allFinite()) return false;

      // Backtrack only to keep every element uninverted.
      double alpha = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 12 && !accepted; ++ls, alpha *= 0.5) {
        std::vector<Vec2> candidate = trial;
        for (std::size_t d = 0; d < free_dofs_.size(); ++d) {
          candidate[free_dofs_[d] / 2][static_cast<Eigen::Index>(free_dofs_[d] % 2)] +=
              alpha * delta[static_cast<Eigen::Index>(d)];
        }
        Eigen::VectorXd r_candidate;
        if (residual(candidate, r_candidate)) {
          trial = std::move(candidate);
          r = std::move(r_candidate);
          accepted = true;
        }
      }
      if (!accepted) return false;
    }
    if (r.lpNorm<Eigen::Infinity>() < options_.tolerance) {
      u = std::move(trial);
      return true;
    }
    return false;
  }

  LoadStep record(const std::vector<Vec2>& u, int step_id) const {
    const auto f = internal_forces(mesh_, quad_, law_, u);
    LoadStep step;
    step.step_id = step_id;
    step.displacements = u;
    Vec2 sum = Vec2::Zero();
    for (int a : top_) sum += f[static_cast<std::size_t>(a)];
    step.reactions["top"] = Reaction{sum, {true, true}};
    return step;
  }

 private:
  bool residual(const std::vector<Vec2>& u, Eigen::VectorXd& r) const {
    std::vector<Vec2> f;
    try {
      f = internal_forces(mesh_, quad_, law_, u);
    } catch (const DomainError&) {
      return false;
    } catch (const NumericalError&) {
      return false;
    }
    r.resize(static_cast<Eigen::Index>(free_dofs_.size()));
    for (std::size_t d = 0; d < free_dofs_.size(); ++d) {
      r[static_cast<Eigen::Index>(d)] = f[free_dofs_[d] / 2][static_cast<Eigen::Index>(free_dofs_[d] % 2)];
    }
    return r.allFinite();
  }

  // Element force vector (8 entries for quad4) at local displacements.
  Eigen::VectorXd element_forces(std::size_t e, const std::vector<Vec2>& local) const {
    const auto conn = mesh_.element(e);
    Eigen::VectorXd fe = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 * conn.size()));
    for (std::size_t q = first_qp_[e]; q < first_qp_[e + 1]; ++q) {
      const auto& qp = quad_[q];
      Mat2 f2d = Mat2::Identity();
      for (std::size_t a = 0; a < conn.size(); ++a) f2d += local[a] * qp.grad[a].transpose();
      if (!(f2d.determinant() > 0.0)) throw InvertedDeformation(static_cast<int>(e), "inverted");
      const Mat2 p = law_.stress(complete_out_of_plane(f2d, law_.mode)).topLeftCorner<2, 2>();
      for (std::size_t a = 0; a < conn.size(); ++a) {
        fe.segment<2>(static_cast<Eigen::Index>(2 * a)) += qp.weight * (p * qp.grad[a]);
      }
    }
    return fe;
  }

  bool tangent(const std::vector<Vec2>& u, Eigen::MatrixXd& k) const {
    const auto n = static_cast<Eigen::Index>(free_dofs_.size());
    k = Eigen::MatrixXd::Zero(n, n);
    const double h = options_.fd_step;
    try {
      for (std::size_t e = 0; e < mesh_.element_count(); ++e) {
        const auto conn = mesh_.element(e);
        std::vector<Vec2> local(conn.size());
        for (std::size_t a = 0; a < conn.size(); ++a) local[a] = u[static_cast<std::size_t>(conn[a])];
        for (std::size_t b = 0; b < conn.size(); ++b) {
          for (Eigen::Index j = 0; j < 2; ++j) {
            const int col = dof_of_[2 * static_cast<std::size_t>(conn[b]) + static_cast<std::size_t>(j)];
            if (col < 0) continue;
            std::vector<Vec2> plus = local, minus = local;
            plus[b][j] += h;
            minus[b][j] -= h;
            const Eigen::VectorXd column = (element_forces(e, plus) - element_forces(e, minus)) / (2.0 * h);
            for (std::size_t a = 0; a < conn.size(); ++a) {
              for (std::size_t i = 0; i < 2; ++i) {
                const int row = dof_of_[2 * static_cast<std::size_t>(conn[a]) + i];
                if (row >= 0) k(row, col) += column[static_cast<Eigen::Index>(2 * a + i)];
              }
            }
          }
        }
      }
    } catch (const DomainError&) {
      return false;
    }
    return k.allFinite();
  }

  const Mesh& mesh_;
  const Law& law_;
  SolverOptions options_;
  std::vector<QuadPoint> quad_;
  std::vector<std::size_t> free_dofs_;
  std::vector<int> dof_of_;
  std::vector<int> top_;
  std::vector<std::size_t> first_qp_;
  double bottom_y_ = 0.0;
  double height_ = 0.0;
};

std::string format_stretch(double s) {
  std::ostringstream os;
  os.precision(6);
  os << s;
  return os.str();
}

}  // namespace

Dataset forward_solve(const Mesh& mesh, const Law& law, const std::vector<double>& stretches,
                      const SolverOptions& options) {
  validate(LoadProgram{StripGeometry{}, stretches});
  if (!(options.max_increment > 0.0)) throw ConfigError("max_increment must be positive");
  if (options.max_increments < 1) throw ConfigError("max_increments must be positive");
  const NewtonSolver solver(mesh, law, options);

  Dataset data;
  std::vector<Vec2> u(mesh.node_count(), Vec2::Zero());
  double current = 1.0;
  for (std::size_t k = 0; k < stretches.size(); ++k) {
    const double target = stretches[k];
    int attempts = 0;
    double increment = options.max_increment;
    int depth = 0;
    while (current < target) {
      double goal = current + increment;
      if (goal >= target - 1e-12 * target) goal = target;
      if (++attempts > options.max_increments) {
        throw SolverError(current, "forward solve exhausted its increment budget at stretch " +
                                       format_stretch(current) + " (target " + format_stretch(target) + ")");
      }
      if (solver.solve(u, current, goal)) {
        current = goal;
        if (depth > 0) {
          --depth;
          increment *= 2.0;
        }
      } else {
        if (++depth > options.max_bisections) {
          throw SolverError(current, "forward solve failed to converge beyond stretch " + format_stretch(current) +
                                         " (target " + format_stretch(target) + ")");
        }
        increment *= 0.5;
      }
    }
    data.steps.push_back(solver.record(u, static_cast<int>(k)));
  }
  return data;
}

Dataset forward_solve(const Mesh& mesh, const GroundTruthMaterial& material, KinematicMode mode,
                      const std::vector<double>& stretches, const SolverOptions& options) {
  return forward_solve(mesh, make_law(material, mode), stretches, options);
}

Dataset add_noise(const Dataset& data, const NoiseSpec& spec) {
  if (!(spec.sigma_u >= 0.0) || !(spec.sigma_r >= 0.0)) throw ConfigError("noise std must be >= 0");
  if (spec.sigma_u == 0.0 && spec.sigma_r == 0.0) return data;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset noisy = data;
  for (auto& step : noisy.steps) {
    for (auto& u : step.displacements) {
      u.x() += spec.sigma_u * normal(rng);
      u.y() += spec.sigma_u * normal(rng);
    }
    for (auto& [name, r] : step.reactions) {
      r.force.x() += spec.sigma_r * normal(rng);
      r.force.y() += spec.sigma_r * normal(rng);
    }
  }
  return noisy;
}

double max_principal_stretch(const Mesh& mesh, const Dataset& data, KinematicMode mode) {
  const auto quad = precompute_quadrature(mesh);
  double largest = 1.0;
  for (const auto& step : data.steps) {
    for (const auto& f : deformation_gradient(mesh, quad, step.displacements, mode)) {
      const Mat2 c = f.topLeftCorner<2, 2>().transpose() * f.topLeftCorner<2, 2>();
      const Eigen::SelfAdjointEigenSolver<Mat2> eig(c, Eigen::EigenvaluesOnly);
      largest = std::max(largest, std::sqrt(eig.eigenvalues().maxCoeff()));
    }
  }
  return largest;
}

}  // namespace hyperfit
