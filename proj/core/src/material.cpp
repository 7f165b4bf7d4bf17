#include "hyperfit/material.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "hyperfit/error.hpp"

namespace hyperfit {

namespace {

void require_positive_det(double j, const char* who) {
  if (!(j > 0.0)) throw DomainError(std::string(who) + ": det F must be positive");
}

}  // namespace

Mat3 admissible_deformation(const Mat3& f, KinematicMode mode) {
  if (mode == KinematicMode::PlaneStrain) return f;
  const Mat2 f2d = f.topLeftCorner<2, 2>();
  require_positive_det(f2d.determinant(), "plane stress");
  return complete_out_of_plane(f2d, mode);
}

Mat3 reduce_stress(const Mat3& p3, const Mat3& f, KinematicMode mode) {
  if (mode == KinematicMode::PlaneStrain) return p3;
  // dF33/dF_2D = -F33 F_2D^{-T}
  const Mat2 f2d_inv_t = f.topLeftCorner<2, 2>().inverse().transpose();
  Mat3 p = Mat3::Zero();
  p.topLeftCorner<2, 2>() = p3.topLeftCorner<2, 2>() - p3(2, 2) * f(2, 2) * f2d_inv_t;
  return p;
}

Mat3 lift_upstream(const Mat3& upstream, const Mat3& f, KinematicMode mode) {
  if (mode == KinematicMode::PlaneStrain) return upstream;
  const Mat2 f2d_inv_t = f.topLeftCorner<2, 2>().inverse().transpose();
  Mat3 lifted = Mat3::Zero();
  lifted.topLeftCorner<2, 2>() = upstream.topLeftCorner<2, 2>();
  lifted(2, 2) = -f(2, 2) * (upstream.topLeftCorner<2, 2>().array() * f2d_inv_t.array()).sum();
  return lifted;
}

// ---------------------------------------------------------------------------
// PANN

PannModel::PannModel(IcnnArch arch, std::vector<double> theta, KinematicMode mode, std::vector<Feature> features)
    : net_(std::move(arch), std::move(theta)), mode_(mode), features_(std::move(features)) {
  if (features_.empty() || features_.size() > kFeatureCount) throw ConfigError("pann: invalid feature list");
  if (static_cast<std::size_t>(net_.arch().n_in) != features_.size()) {
    throw ConfigError("pann: network input width must equal the number of invariant features");
  }
  x0_ = std::vector<double>(features_.size());
  for (std::size_t i = 0; i < features_.size(); ++i) {
    x0_[i] = kReferenceInvariants[static_cast<std::size_t>(features_[i])];
  }
  Icnn::Vector g0;
  nn0_ = net_.forward_and_grad(x0_, g0);
  n0_ = 0.0;
  for (std::size_t i = 0; i < features_.size(); ++i) {
    n0_ += kReferenceSlopes[static_cast<std::size_t>(features_[i])] * g0[static_cast<Eigen::Index>(i)];
  }
}

PannModel PannModel::initialized(const IcnnArch& arch, std::uint64_t seed, KinematicMode mode) {
  return PannModel(arch, init_params(arch, seed), mode);
}

std::array<double, kFeatureCount> PannModel::select(const InvariantVector& all) const {
  std::array<double, kFeatureCount> x{};
  for (std::size_t i = 0; i < features_.size(); ++i) x[i] = all[static_cast<std::size_t>(features_[i])];
  return x;
}

double PannModel::energy(const Mat3& f) const {
  const Mat3 fa = admissible_deformation(f, mode_);
  const auto x = select(invariants(fa));
  const double j = fa.determinant();
  return net_.forward(std::span<const double>(x.data(), features_.size())) - nn0_ - n0_ * (j - 1.0);
}

Mat3 PannModel::stress3(const Mat3& f) const {
  const auto x = select(invariants(f));
  const auto d = invariant_derivatives(f);
  Icnn::Vector g;
  net_.forward_and_grad(std::span<const double>(x.data(), features_.size()), g);
  Mat3 p = -n0_ * d[static_cast<std::size_t>(Feature::J)];
  for (std::size_t i = 0; i < features_.size(); ++i) {
    p += g[static_cast<Eigen::Index>(i)] * d[static_cast<std::size_t>(features_[i])];
  }
  return p;
}

Mat3 PannModel::stress(const Mat3& f) const {
  const Mat3 fa = admissible_deformation(f, mode_);
  return reduce_stress(stress3(fa), fa, mode_);
}

void PannModel::accumulate_weight_gradient(const Mat3& f, const Mat3& upstream, std::span<double> grad,
                                           double& offset_weight) const {
  const Mat3 fa = admissible_deformation(f, mode_);
  const Mat3 lifted = lift_upstream(upstream, fa, mode_);
  const auto x = select(invariants(fa));
  const auto d = invariant_derivatives(fa);
  std::array<double, kFeatureCount> c{};
  for (std::size_t i = 0; i < features_.size(); ++i) {
    c[i] = ddot(lifted, d[static_cast<std::size_t>(features_[i])]);
  }
  const auto n = features_.size();
  net_.backward_params(std::span<const double>(x.data(), n), 0.0, std::span<const double>(c.data(), n), grad);
  offset_weight -= ddot(lifted, d[static_cast<std::size_t>(Feature::J)]);
}

void PannModel::finish_weight_gradient(double offset_weight, std::span<double> grad) const {
  if (offset_weight == 0.0) return;
  std::vector<double> c(features_.size());
  for (std::size_t i = 0; i < features_.size(); ++i) {
    c[i] = offset_weight * kReferenceSlopes[static_cast<std::size_t>(features_[i])];
  }
  net_.backward_params(x0_, 0.0, c, grad);
}

double pann_energy(const PannModel& model, const Mat3& f) { return model.energy(f); }
Mat3 pann_stress(const PannModel& model, const Mat3& f) { return model.stress(f); }

std::vector<double> stress_and_weight_gradient(const PannModel& model, const Mat3& f, const Mat3& upstream) {
  std::vector<double> grad(model.theta().size(), 0.0);
  double offset_weight = 0.0;
  model.accumulate_weight_gradient(f, upstream, grad, offset_weight);
  model.finish_weight_gradient(offset_weight, grad);
  return grad;
}

// ---------------------------------------------------------------------------
// Neo-Hookean

NeoHookeanModel NeoHookeanModel::from_moduli(double mu, double lambda, KinematicMode mode) {
  return {{softplus_inverse(mu), softplus_inverse(lambda)}, mode};
}

double NeoHookeanModel::energy(const Mat3& f) const {
  const Mat3 fa = admissible_deformation(f, mode);
  const double j = fa.determinant();
  require_positive_det(j, "neo-hookean");
  const double i1 = (fa.transpose() * fa).trace();
  return 0.5 * mu() * (i1 - 3.0 - 2.0 * std::log(j)) + 0.5 * lambda() * (j - 1.0) * (j - 1.0);
}

Mat3 NeoHookeanModel::stress(const Mat3& f) const {
  const Mat3 fa = admissible_deformation(f, mode);
  const double j = fa.determinant();
  require_positive_det(j, "neo-hookean");
  const Mat3 f_inv_t = fa.inverse().transpose();
  const Mat3 p3 = mu() * (fa - f_inv_t) + lambda() * j * (j - 1.0) * f_inv_t;
  return reduce_stress(p3, fa, mode);
}

void NeoHookeanModel::accumulate_weight_gradient(const Mat3& f, const Mat3& upstream, std::span<double> grad) const {
  const Mat3 fa = admissible_deformation(f, mode);
  const double j = fa.determinant();
  require_positive_det(j, "neo-hookean");
  const Mat3 lifted = lift_upstream(upstream, fa, mode);
  const Mat3 f_inv_t = fa.inverse().transpose();
  grad[0] += sigmoid(theta[0]) * ddot(lifted, fa - f_inv_t);
  grad[1] += sigmoid(theta[1]) * j * (j - 1.0) * ddot(lifted, f_inv_t);
}

double nh_energy(const NeoHookeanModel& model, const Mat3& f) { return model.energy(f); }
Mat3 nh_stress(const NeoHookeanModel& model, const Mat3& f) { return model.stress(f); }

std::vector<double> stress_and_weight_gradient(const NeoHookeanModel& model, const Mat3& f, const Mat3& upstream) {
  std::vector<double> grad(2, 0.0);
  model.accumulate_weight_gradient(f, upstream, grad);
  return grad;
}

// ---------------------------------------------------------------------------
// Model variant

double energy(const Model& model, const Mat3& f) {
  return std::visit([&](const auto& m) { return m.energy(f); }, model);
}

Mat3 stress(const Model& model, const Mat3& f) {
  return std::visit([&](const auto& m) { return m.stress(f); }, model);
}

KinematicMode mode(const Model& model) {
  if (const auto* pann = std::get_if<PannModel>(&model)) return pann->mode();
  return std::get<NeoHookeanModel>(model).mode;
}

std::vector<double> parameters(const Model& model) {
  if (const auto* pann = std::get_if<PannModel>(&model)) {
    return {pann->theta().begin(), pann->theta().end()};
  }
  const auto& nh = std::get<NeoHookeanModel>(model);
  return {nh.theta.begin(), nh.theta.end()};
}

std::size_t parameter_count(const Model& model) {
  if (const auto* pann = std::get_if<PannModel>(&model)) return pann->theta().size();
  return 2;
}

Model with_parameters(const Model& model, std::span<const double> theta) {
  if (theta.size() != parameter_count(model)) throw ConfigError("with_parameters: wrong parameter count");
  if (const auto* pann = std::get_if<PannModel>(&model)) {
    return PannModel(pann->arch(), {theta.begin(), theta.end()}, pann->mode(), pann->features());
  }
  NeoHookeanModel nh = std::get<NeoHookeanModel>(model);
  nh.theta = {theta[0], theta[1]};
  return nh;
}

Law make_law(const Model& model) {
  return std::visit(
      [](const auto& m) {
        return Law{hyperfit::mode(Model(m)), [m](const Mat3& f) { return m.energy(f); },
                   [m](const Mat3& f) { return m.stress(f); }};
      },
      model);
}

double min_energy_on_grid(const Model& model, int points_per_axis) {
  const int n = std::max(points_per_axis, 2);
  double lowest = std::numeric_limits<double>::infinity();
  const auto lerp = [n](double lo, double hi, int i) { return lo + (hi - lo) * i / (n - 1); };
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      for (int c = 0; c < n; ++c) {
        Mat2 f2d;
        f2d << lerp(0.6, 2.0, a), lerp(-0.5, 0.5, c), 0.0, lerp(0.6, 2.0, b);
        lowest = std::min(lowest, energy(model, complete_out_of_plane(f2d, mode(model))));
      }
    }
  }
  return lowest;
}

// ---------------------------------------------------------------------------
// JSON

using nlohmann::json;

Model load_model(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("parse error in model: ") + e.what());
  }
  try {
    const auto kind = doc.at("kind").get<std::string>();
    const KinematicMode mode = parse_kinematic_mode(doc.at("mode").get<std::string>());
    const auto theta = doc.at("theta").get<std::vector<double>>();
    if (kind == "neo_hookean") {
      if (theta.size() != 2) throw ConfigError("neo_hookean model needs exactly 2 raw parameters");
      return NeoHookeanModel{{theta[0], theta[1]}, mode};
    }
    if (kind == "pann") {
      const auto& a = doc.at("arch");
      IcnnArch arch;
      arch.n_in = a.at("n_in").get<int>();
      arch.widths = a.at("widths").get<std::vector<int>>();
      arch.passthrough = a.at("passthrough").get<bool>();
      std::vector<Feature> features = kDefaultFeatures;
      if (doc.contains("features")) {
        features.clear();
        for (const auto& name : doc.at("features")) features.push_back(parse_feature(name.get<std::string>()));
      }
      return PannModel(arch, theta, mode, features);
    }
    throw ConfigError("unknown model kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("parse error in model: ") + e.what());
  }
}

void save_model(const Model& model, std::ostream& out) {
  json doc;
  if (const auto* pann = std::get_if<PannModel>(&model)) {
    doc["kind"] = "pann";
    doc["arch"] = {{"n_in", pann->arch().n_in}, {"widths", pann->arch().widths},
                   {"passthrough", pann->arch().passthrough}};
    if (pann->features() != kDefaultFeatures) {
      json names = json::array();
      for (Feature f : pann->features()) names.push_back(to_string(f));
      doc["features"] = names;
    }
  } else {
    doc["kind"] = "neo_hookean";
  }
  doc["mode"] = to_string(mode(model));
  doc["theta"] = parameters(model);
  out << doc.dump(2) << '\n';
}

}  // namespace hyperfit
