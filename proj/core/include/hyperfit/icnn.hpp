#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace hyperfit {

/// Fully input-convex network with softplus activations.
///
/// Raw parameter layout (row-major weight blocks), layer l = 1..L:
///   W_l  [h_l x h_{l-1}]  (h_0 = n_in)
///   U_l  [h_l x n_in]     only for l >= 2 when passthrough is set
///   b_l  [h_l]
/// followed by the output weights w_out [h_L] and the output bias b_out.
/// Effective weights are softplus(raw) >= 0; biases are used raw.
struct IcnnArch {
  int n_in = 4;
  std::vector<int> widths;
  bool passthrough = true;

  bool operator==(const IcnnArch&) const = default;
};

/// Throws ConfigError on an empty width list or non-positive sizes.
void validate(const IcnnArch& arch);

std::size_t count_parameters(const IcnnArch& arch);

/// Deterministic initialization: effective weights of scale 1/sqrt(fan_in), zero biases.
std::vector<double> init_params(const IcnnArch& arch, std::uint64_t seed);

/// Numerically stable softplus, ln(1 + e^{-|t|}) + max(t, 0).
double softplus(double t);
double sigmoid(double t);
/// Inverse of softplus for y > 0 (returns -inf for y == 0).
double softplus_inverse(double y);

/// Evaluator holding the effective (softplus-mapped) weights of one parameter vector.
/// Immutable after construction, so concurrent evaluation is safe.
class Icnn {
 public:
  using Vector = Eigen::VectorXd;

  Icnn() = default;
  Icnn(IcnnArch arch, std::vector<double> theta);

  const IcnnArch& arch() const { return arch_; }
  std::span<const double> theta() const { return theta_; }
  std::size_t parameter_count() const { return theta_.size(); }

  double forward(std::span<const double> x) const;

  /// dNN/dx; every component is non-negative.
  Vector grad_input(std::span<const double> x) const;

  /// Forward value and input gradient from a single pass.
  double forward_and_grad(std::span<const double> x, Vector& grad) const;

  /// Accumulates into `grad_theta` the gradient with respect to the raw parameters of
  ///   G = a * NN(x) + sum_k c_k dNN/dx_k.
  /// The input-gradient term is handled by propagating the tangent of the forward pass along c
  /// and reverse-differentiating the primal and tangent graphs together.
  void backward_params(std::span<const double> x, double a, std::span<const double> c,
                       std::span<double> grad_theta) const;

 private:
  struct Layer {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w, w_slope;
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> u, u_slope;
    Vector b;
    std::size_t w_offset = 0, u_offset = 0, b_offset = 0;
    bool has_u = false;
  };

  IcnnArch arch_;
  std::vector<double> theta_;
  std::vector<Layer> layers_;
  Vector w_out_, w_out_slope_;
  std::size_t w_out_offset_ = 0;
  std::size_t b_out_offset_ = 0;
  double b_out_ = 0.0;
};

}  // namespace hyperfit
