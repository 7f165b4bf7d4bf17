#include "hyperfit/icnn.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "hyperfit/error.hpp"

namespace hyperfit {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMatrix>;
using RowMap = Eigen::Map<RowMatrix>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;

Eigen::VectorXd softplus(const Eigen::VectorXd& t) { return t.unaryExpr([](double v) { return hyperfit::softplus(v); }); }
Eigen::VectorXd sigmoid(const Eigen::VectorXd& t) { return t.unaryExpr([](double v) { return hyperfit::sigmoid(v); }); }

}  // namespace

double softplus(double t) { return std::log1p(std::exp(-std::abs(t))) + std::max(t, 0.0); }

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double softplus_inverse(double y) {
  if (y < 0.0) throw DomainError("softplus_inverse: negative argument");
  if (y == 0.0) return -std::numeric_limits<double>::infinity();
  // ln(e^y - 1), rearranged to stay accurate for large y.
  return y + std::log(-std::expm1(-y));
}

void validate(const IcnnArch& arch) {
  if (arch.n_in < 1) throw ConfigError("icnn: n_in must be >= 1");
  if (arch.widths.empty()) throw ConfigError("icnn: at least one hidden layer is required");
  for (int w : arch.widths) {
    if (w < 1) throw ConfigError("icnn: hidden widths must be positive");
  }
}

std::size_t count_parameters(const IcnnArch& arch) {
  validate(arch);
  const auto n_in = static_cast<std::size_t>(arch.n_in);
  std::size_t count = 0;
  std::size_t prev = n_in;
  for (std::size_t l = 0; l < arch.widths.size(); ++l) {
    const auto h = static_cast<std::size_t>(arch.widths[l]);
    count += h * prev + h;
    if (l > 0 && arch.passthrough) count += h * n_in;
    prev = h;
  }
  return count + prev + 1;
}

std::vector<double> init_params(const IcnnArch& arch, std::uint64_t seed) {
  validate(arch);
  std::vector<double> theta(count_parameters(arch), 0.0);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(0.5, 1.5);
  const auto fill = [&](std::size_t offset, std::size_t count, std::size_t fan_in) {
    const double scale = 1.0 / static_cast<double>(fan_in);
    for (std::size_t i = 0; i < count; ++i) theta[offset + i] = softplus_inverse(scale * jitter(rng));
  };

  const auto n_in = static_cast<std::size_t>(arch.n_in);
  std::size_t offset = 0;
  std::size_t prev = n_in;
  for (std::size_t l = 0; l < arch.widths.size(); ++l) {
    const auto h = static_cast<std::size_t>(arch.widths[l]);
    const bool has_u = l > 0 && arch.passthrough;
    const std::size_t fan_in = prev + (has_u ? n_in : 0);
    fill(offset, h * prev, fan_in);
    offset += h * prev;
    if (has_u) {
      fill(offset, h * n_in, fan_in);
      offset += h * n_in;
    }
    offset += h;  // biases stay zero
    prev = h;
  }
  fill(offset, prev, prev);
  return theta;
}

Icnn::Icnn(IcnnArch arch, std::vector<double> theta) : arch_(std::move(arch)), theta_(std::move(theta)) {
  if (theta_.size() != count_parameters(arch_)) {
    throw ConfigError("icnn: expected " + std::to_string(count_parameters(arch_)) + " parameters, got " +
                      std::to_string(theta_.size()));
  }
  const auto n_in = static_cast<Eigen::Index>(arch_.n_in);
  Eigen::Index prev = n_in;
  std::size_t offset = 0;
  const auto effective = [this](std::size_t off, Eigen::Index rows, Eigen::Index cols, RowMatrix& value,
                                RowMatrix& slope) {
    const ConstRowMap raw(theta_.data() + off, rows, cols);
    value = raw.unaryExpr([](double v) { return hyperfit::softplus(v); });
    slope = raw.unaryExpr([](double v) { return hyperfit::sigmoid(v); });
  };
  for (std::size_t l = 0; l < arch_.widths.size(); ++l) {
    const auto h = static_cast<Eigen::Index>(arch_.widths[l]);
    Layer layer;
    layer.w_offset = offset;
    effective(offset, h, prev, layer.w, layer.w_slope);
    offset += static_cast<std::size_t>(h * prev);
    layer.has_u = l > 0 && arch_.passthrough;
    if (layer.has_u) {
      layer.u_offset = offset;
      effective(offset, h, n_in, layer.u, layer.u_slope);
      offset += static_cast<std::size_t>(h * n_in);
    }
    layer.b_offset = offset;
    layer.b = ConstVectorMap(theta_.data() + offset, h);
    offset += static_cast<std::size_t>(h);
    layers_.push_back(std::move(layer));
    prev = h;
  }
  w_out_offset_ = offset;
  const ConstVectorMap raw_out(theta_.data() + offset, prev);
  w_out_ = softplus(raw_out);
  w_out_slope_ = sigmoid(raw_out);
  b_out_offset_ = offset + static_cast<std::size_t>(prev);
  b_out_ = theta_[b_out_offset_];
}

double Icnn::forward(std::span<const double> x) const {
  const ConstVectorMap xv(x.data(), arch_.n_in);
  Vector z;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    Vector s = layer.b;
    if (l == 0) {
      s.noalias() += layer.w * xv;
    } else {
      s.noalias() += layer.w * z;
    }
    if (layer.has_u) s.noalias() += layer.u * xv;
    z = softplus(s);
  }
  return w_out_.dot(z) + b_out_;
}

double Icnn::forward_and_grad(std::span<const double> x, Vector& grad) const {
  const ConstVectorMap xv(x.data(), arch_.n_in);
  std::vector<Vector> slope(layers_.size());
  Vector z;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    Vector s = layer.b;
    if (l == 0) {
      s.noalias() += layer.w * xv;
    } else {
      s.noalias() += layer.w * z;
    }
    if (layer.has_u) s.noalias() += layer.u * xv;
    z = softplus(s);
    slope[l] = sigmoid(s);
  }
  const double value = w_out_.dot(z) + b_out_;

  grad = Vector::Zero(arch_.n_in);
  Vector delta = w_out_;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Layer& layer = layers_[l];
    const Vector e = delta.cwiseProduct(slope[l]);
    if (l == 0) {
      grad.noalias() += layer.w.transpose() * e;
    } else {
      if (layer.has_u) grad.noalias() += layer.u.transpose() * e;
      delta = layer.w.transpose() * e;
    }
  }
  return value;
}

Icnn::Vector Icnn::grad_input(std::span<const double> x) const {
  Vector g;
  forward_and_grad(x, g);
  return g;
}

void Icnn::backward_params(std::span<const double> x, double a, std::span<const double> c,
                           std::span<double> grad_theta) const {
  if (grad_theta.size() != theta_.size()) throw ConfigError("icnn: gradient buffer has wrong size");
  if (c.size() != static_cast<std::size_t>(arch_.n_in)) throw ConfigError("icnn: co-gradient has wrong size");
  const ConstVectorMap xv(x.data(), arch_.n_in);
  const ConstVectorMap cv(c.data(), arch_.n_in);
  const bool tangent = (cv.array() != 0.0).any();
  if (a == 0.0 && !tangent) return;

  const std::size_t depth = layers_.size();
  std::vector<Vector> z(depth), zdot(depth), sdot(depth), slope(depth);
  for (std::size_t l = 0; l < depth; ++l) {
    const Layer& layer = layers_[l];
    Vector s = layer.b;
    if (l == 0) {
      s.noalias() += layer.w * xv;
    } else {
      s.noalias() += layer.w * z[l - 1];
    }
    if (layer.has_u) s.noalias() += layer.u * xv;
    z[l] = softplus(s);
    slope[l] = sigmoid(s);
    if (tangent) {
      sdot[l] = l == 0 ? Vector(layer.w * cv) : Vector(layer.w * zdot[l - 1]);
      if (layer.has_u) sdot[l].noalias() += layer.u * cv;
      zdot[l] = slope[l].cwiseProduct(sdot[l]);
    }
  }

  // Output layer: G = a (w . z_L + b) + w . zdot_L.
  VectorMap g_w_out(grad_theta.data() + w_out_offset_, w_out_.size());
  Vector wbar = a * z[depth - 1];
  if (tangent) wbar += zdot[depth - 1];
  g_w_out += wbar.cwiseProduct(w_out_slope_);
  grad_theta[b_out_offset_] += a;

  Vector zbar = a * w_out_;
  Vector zdotbar = tangent ? Vector(w_out_) : Vector();
  for (std::size_t l = depth; l-- > 0;) {
    const Layer& layer = layers_[l];
    Vector sbar = zbar.cwiseProduct(slope[l]);
    Vector sdotbar;
    if (tangent) {
      sdotbar = zdotbar.cwiseProduct(slope[l]);
      const Vector curvature = slope[l].cwiseProduct((1.0 - slope[l].array()).matrix());
      sbar += zdotbar.cwiseProduct(curvature).cwiseProduct(sdot[l]);
    }

    RowMap g_w(grad_theta.data() + layer.w_offset, layer.w.rows(), layer.w.cols());
    RowMatrix wbar_l = l == 0 ? RowMatrix(sbar * xv.transpose()) : RowMatrix(sbar * z[l - 1].transpose());
    if (tangent) {
      if (l == 0) {
        wbar_l.noalias() += sdotbar * cv.transpose();
      } else {
        wbar_l.noalias() += sdotbar * zdot[l - 1].transpose();
      }
    }
    g_w += wbar_l.cwiseProduct(layer.w_slope);

    if (layer.has_u) {
      RowMap g_u(grad_theta.data() + layer.u_offset, layer.u.rows(), layer.u.cols());
      RowMatrix ubar = sbar * xv.transpose();
      if (tangent) ubar.noalias() += sdotbar * cv.transpose();
      g_u += ubar.cwiseProduct(layer.u_slope);
    }

    VectorMap(grad_theta.data() + layer.b_offset, layer.b.size()) += sbar;

    if (l > 0) {
      zbar = layer.w.transpose() * sbar;
      if (tangent) zdotbar = layer.w.transpose() * sdotbar;
    }
  }
}

}  // namespace hyperfit
