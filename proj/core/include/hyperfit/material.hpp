#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <span>
#include <variant>
#include <vector>

#include "hyperfit/icnn.hpp"
#include "hyperfit/invariants.hpp"
#include "hyperfit/kinematics.hpp"
#include "hyperfit/tensor.hpp"

namespace hyperfit {

/// Energy density and first Piola-Kirchhoff stress of one constitutive law, in the
/// kinematic mode of the mesh evaluation. `stress` returns the mode-reduced tensor:
/// for IncompressiblePlaneStress the in-plane block already carries the F33(F_2D)
/// chain term and P33 is reported as zero.
struct Law {
  KinematicMode mode = KinematicMode::PlaneStrain;
  std::function<double(const Mat3&)> energy;
  std::function<Mat3(const Mat3&)> stress;
};

/// Rebuilds the admissible F for `mode`: unchanged for plane strain, F33 = 1/det(F_2D)
/// and zero off-plane shear for incompressible plane stress.
Mat3 admissible_deformation(const Mat3& f, KinematicMode mode);

/// Converts a 3D stress P(F) into the mode-reduced stress of the in-plane kinematics.
Mat3 reduce_stress(const Mat3& p3, const Mat3& f, KinematicMode mode);

/// Maps an upstream co-gradient on the reduced stress to one on the 3D stress, so that
/// <upstream, reduce_stress(P3)> = <result, P3>.
Mat3 lift_upstream(const Mat3& upstream, const Mat3& f, KinematicMode mode);

inline const std::vector<Feature> kDefaultFeatures{Feature::I1, Feature::I2, Feature::J, Feature::NegJ};

/// Physics-augmented network energy
///   W(F) = NN(x(F)) - NN(x0) - n0 (J - 1),  n0 = sum_k s_k dNN/dx_k(x0),
/// with x0 the invariants at F = I and s_k their identity slopes, so W(I) = 0 and P(I) = 0.
class PannModel {
 public:
  PannModel(IcnnArch arch, std::vector<double> theta, KinematicMode mode = KinematicMode::PlaneStrain,
            std::vector<Feature> features = kDefaultFeatures);

  static PannModel initialized(const IcnnArch& arch, std::uint64_t seed,
                               KinematicMode mode = KinematicMode::PlaneStrain);

  const IcnnArch& arch() const { return net_.arch(); }
  std::span<const double> theta() const { return net_.theta(); }
  KinematicMode mode() const { return mode_; }
  const std::vector<Feature>& features() const { return features_; }
  const Icnn& network() const { return net_; }
  double stress_offset() const { return n0_; }

  double energy(const Mat3& f) const;
  Mat3 stress(const Mat3& f) const;

  /// Adds d<upstream, P(F)>/dtheta to `grad` except for the n0 branch, whose scalar weight is
  /// accumulated into `offset_weight`; call finish_weight_gradient once after summing points.
  void accumulate_weight_gradient(const Mat3& f, const Mat3& upstream, std::span<double> grad,
                                  double& offset_weight) const;
  void finish_weight_gradient(double offset_weight, std::span<double> grad) const;

 private:
  std::array<double, kFeatureCount> select(const InvariantVector& all) const;
  Mat3 stress3(const Mat3& f) const;

  Icnn net_;
  KinematicMode mode_;
  std::vector<Feature> features_;
  std::vector<double> x0_;
  double nn0_ = 0.0;
  double n0_ = 0.0;
};

/// Compressible Neo-Hookean W = mu/2 (I1 - 3 - 2 ln J) + lambda/2 (J - 1)^2 with
/// mu = softplus(theta[0]) and lambda = softplus(theta[1]) in MPa.
struct NeoHookeanModel {
  std::array<double, 2> theta{0.0, 0.0};
  KinematicMode mode = KinematicMode::PlaneStrain;

  static NeoHookeanModel from_moduli(double mu, double lambda, KinematicMode mode = KinematicMode::PlaneStrain);
  double mu() const { return softplus(theta[0]); }
  double lambda() const { return softplus(theta[1]); }

  double energy(const Mat3& f) const;
  Mat3 stress(const Mat3& f) const;
  void accumulate_weight_gradient(const Mat3& f, const Mat3& upstream, std::span<double> grad) const;
};

using Model = std::variant<NeoHookeanModel, PannModel>;

double pann_energy(const PannModel& model, const Mat3& f);
Mat3 pann_stress(const PannModel& model, const Mat3& f);
/// Gradient of <upstream, P(F; theta)> with respect to the raw network parameters.
std::vector<double> stress_and_weight_gradient(const PannModel& model, const Mat3& f, const Mat3& upstream);

double nh_energy(const NeoHookeanModel& model, const Mat3& f);
Mat3 nh_stress(const NeoHookeanModel& model, const Mat3& f);
std::vector<double> stress_and_weight_gradient(const NeoHookeanModel& model, const Mat3& f,
                                               const Mat3& upstream);

double energy(const Model& model, const Mat3& f);
Mat3 stress(const Model& model, const Mat3& f);
KinematicMode mode(const Model& model);
std::vector<double> parameters(const Model& model);
std::size_t parameter_count(const Model& model);
Model with_parameters(const Model& model, std::span<const double> theta);
Law make_law(const Model& model);

/// Smallest energy over a grid of in-plane stretches and shears (positivity diagnostic).
double min_energy_on_grid(const Model& model, int points_per_axis = 9);

/// Model JSON: {"kind":"pann","arch":{...},"mode":...,"theta":[...]} or
/// {"kind":"neo_hookean","mode":...,"theta":[mu_raw, lambda_raw]}.
Model load_model(std::istream& in);
void save_model(const Model& model, std::ostream& out);

}  // namespace hyperfit
