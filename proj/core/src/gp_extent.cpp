#include "eotrack/gp_extent.hpp"

#include <cmath>

#include <Eigen/Cholesky>

#include "eotrack/error.hpp"

namespace eotrack {

double wrap_angle(double a) noexcept {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double r = std::remainder(a, kTwoPi);  // [-pi, pi]
  if (r <= -std::numbers::pi) r += kTwoPi;
  return r;
}

std::vector<double> GpConfig::test_angles() const {
  std::vector<double> out(static_cast<std::size_t>(num_test_angles));
  for (int i = 0; i < num_test_angles; ++i) {
    out[static_cast<std::size_t>(i)] = 2.0 * std::numbers::pi * i / num_test_angles;
  }
  return out;
}

void validate(const GpConfig& cfg) {
  if (cfg.num_test_angles < 3) {
    throw Error(ErrorKind::kInvalidArgument, "gp num_test_angles must be >= 3");
  }
  if (!(cfg.sigma_f > 0.0 && cfg.sigma_r > 0.0 && cfg.sigma_n > 0.0 && cfg.length_scale > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "gp hyperparameters must be positive");
  }
  if (!(cfg.forgetting > 0.0 && cfg.forgetting < 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "gp forgetting factor must lie in (0, 1)");
  }
}

double gp_kernel(double a, double b, const GpConfig& cfg) {
  const double s = std::sin(0.5 * (a - b));
  const double l2 = cfg.length_scale * cfg.length_scale;
  return cfg.sigma_f * cfg.sigma_f * std::exp(-2.0 * s * s / l2) + cfg.sigma_r * cfg.sigma_r;
}

double gp_kernel_derivative(double a, double b, const GpConfig& cfg) {
  const double d = a - b;
  const double s = std::sin(0.5 * d);
  const double l2 = cfg.length_scale * cfg.length_scale;
  // d/dd [2 sin^2(d/2)] = sin(d)
  return -cfg.sigma_f * cfg.sigma_f * std::exp(-2.0 * s * s / l2) * std::sin(d) / l2;
}

Eigen::MatrixXd gp_gram_matrix(const GpConfig& cfg) {
  const auto angles = cfg.test_angles();
  const auto n = static_cast<Eigen::Index>(angles.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      k(i, j) = gp_kernel(angles[static_cast<std::size_t>(i)], angles[static_cast<std::size_t>(j)], cfg);
    }
  }
  return k;
}

GpExtentModel::GpExtentModel(const GpConfig& cfg) : cfg_(cfg) {
  validate(cfg_);
  angles_ = cfg_.test_angles();
  gram_ = gp_gram_matrix(cfg_);
  const auto n = gram_.rows();
  Eigen::MatrixXd noisy = gram_;
  noisy.diagonal().array() += cfg_.sigma_n * cfg_.sigma_n;
  solve_ = noisy.ldlt().solve(Eigen::MatrixXd::Identity(n, n));
  solve_ = 0.5 * (solve_ + solve_.transpose()).eval();
}

GpRegression GpExtentModel::regress(double theta) const {
  const auto n = static_cast<Eigen::Index>(angles_.size());
  Eigen::RowVectorXd k(n);
  Eigen::RowVectorXd dk(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i) = gp_kernel(theta, angles_[static_cast<std::size_t>(i)], cfg_);
    dk(i) = gp_kernel_derivative(theta, angles_[static_cast<std::size_t>(i)], cfg_);
  }
  GpRegression out;
  out.weights = k * solve_;
  out.weights_derivative = dk * solve_;
  out.residual_variance =
      std::max(0.0, gp_kernel(theta, theta, cfg_) - out.weights.dot(k));
  return out;
}

double GpExtentModel::radius(double theta, const Eigen::VectorXd& extent) const {
  return regress(theta).weights.dot(extent);
}

GpRegression gp_regressor(double theta, const GpConfig& cfg) {
  return GpExtentModel(cfg).regress(theta);
}

}  // namespace eotrack
