#pragma once

#include <numbers>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

namespace eotrack {

/// Hyperparameters of the radial-function Gaussian process.
struct GpConfig {
  int num_test_angles = 10;
  double sigma_f = 0.01;   // periodic kernel signal scale, m
  double sigma_r = 0.005;  // constant (mean radius) kernel term, m
  double sigma_n = 0.001;  // radial observation noise, m
  double length_scale = std::numbers::pi / 6.0;  // rad
  double forgetting = 0.001;                     // eta_f, per step

  /// Equally spaced body-frame angles 2*pi*i/N, i = 0..N-1.
  std::vector<double> test_angles() const;
};

void validate(const GpConfig& cfg);

/// k(a, b) = sigma_f^2 * exp(-2 sin^2((a - b)/2) / l^2) + sigma_r^2
double gp_kernel(double a, double b, const GpConfig& cfg);

/// Partial derivative of gp_kernel with respect to its first argument.
double gp_kernel_derivative(double a, double b, const GpConfig& cfg);

/// Kernel Gram matrix over the test angles (no observation noise added).
Eigen::MatrixXd gp_gram_matrix(const GpConfig& cfg);

struct GpRegression {
  Eigen::RowVectorXd weights;             // H_f(theta), radius = weights * p_f
  Eigen::RowVectorXd weights_derivative;  // d H_f / d theta
  double residual_variance = 0.0;         // clamped at zero
};

/// Caches the factorization of K + sigma_n^2 I so per-measurement regression
/// costs one kernel row and a matrix-vector product.
class GpExtentModel {
 public:
  explicit GpExtentModel(const GpConfig& cfg);

  GpRegression regress(double theta) const;
  double radius(double theta, const Eigen::VectorXd& extent) const;

  const GpConfig& config() const noexcept { return cfg_; }
  const std::vector<double>& angles() const noexcept { return angles_; }
  const Eigen::MatrixXd& prior_gram() const noexcept { return gram_; }
  int size() const noexcept { return cfg_.num_test_angles; }

 private:
  GpConfig cfg_;
  std::vector<double> angles_;
  Eigen::MatrixXd gram_;
  Eigen::MatrixXd solve_;  // (K + sigma_n^2 I)^-1, symmetric
};

/// One-shot form of GpExtentModel::regress.
GpRegression gp_regressor(double theta, const GpConfig& cfg);

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a) noexcept;

}  // namespace eotrack
