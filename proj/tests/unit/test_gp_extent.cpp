#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "eotrack/error.hpp"
#include "eotrack/gp_extent.hpp"

using namespace eotrack;

namespace {

constexpr double kPi = std::numbers::pi;

// Same kernel written from its definition with a cosine instead of sin^2.
double reference_kernel(double a, double b, double sf, double sr, double l) {
  return sf * sf * std::exp(-(1.0 - std::cos(a - b)) / (l * l)) + sr * sr;
}

}  // namespace

TEST_CASE("kernel value at zero lag") {
  const GpConfig cfg;
  CHECK(gp_kernel(0.7, 0.7, cfg) == doctest::Approx(1.25e-4).epsilon(1e-12));
}

TEST_CASE("kernel is 2 pi periodic and symmetric") {
  const GpConfig cfg;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int i = 0; i < 100; ++i) {
    const double a = u(rng);
    const double b = u(rng);
    CHECK(gp_kernel(a, b + 2.0 * kPi, cfg) == doctest::Approx(gp_kernel(a, b, cfg)).epsilon(1e-12));
    CHECK(gp_kernel(a, b, cfg) == doctest::Approx(gp_kernel(b, a, cfg)).epsilon(1e-12));
  }
}

TEST_CASE("kernel agrees with an independent implementation") {
  const GpConfig cfg;
  const double expected = 1e-4 * std::exp(-2.0 / ((kPi / 6.0) * (kPi / 6.0))) + 2.5e-5;
  CHECK(gp_kernel(kPi, 0.0, cfg) == doctest::Approx(expected).epsilon(1e-12));
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  for (int i = 0; i < 100; ++i) {
    const double a = u(rng);
    const double b = u(rng);
    CHECK(gp_kernel(a, b, cfg) ==
          doctest::Approx(reference_kernel(a, b, cfg.sigma_f, cfg.sigma_r, cfg.length_scale)).epsilon(1e-12));
  }
}

TEST_CASE("kernel derivative matches central differences") {
  const GpConfig cfg;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  const double h = 1e-6;
  for (int i = 0; i < 100; ++i) {
    const double a = u(rng);
    const double b = u(rng);
    const double fd = (gp_kernel(a + h, b, cfg) - gp_kernel(a - h, b, cfg)) / (2.0 * h);
    CHECK(std::abs(gp_kernel_derivative(a, b, cfg) - fd) <= 1e-9);
  }
}

TEST_CASE("test angles are equally spaced in [0, 2 pi)") {
  const GpConfig cfg;
  const auto a = cfg.test_angles();
  REQUIRE(a.size() == 10);
  CHECK(a.front() == 0.0);
  for (std::size_t i = 1; i < a.size(); ++i) CHECK(a[i] - a[i - 1] == doctest::Approx(kPi / 5.0));
  CHECK(a.back() < 2.0 * kPi);
}

TEST_CASE("gram matrix is symmetric positive semi-definite") {
  for (double l : {kPi / 12.0, kPi / 6.0, kPi / 2.0}) {
    GpConfig cfg;
    cfg.length_scale = l;
    const Eigen::MatrixXd k = gp_gram_matrix(cfg);
    CHECK((k - k.transpose()).cwiseAbs().maxCoeff() == 0.0);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-15);
  }
}

TEST_CASE("regressor at a test angle approaches the indicator row") {
  GpConfig cfg;
  cfg.sigma_n = 1e-9;
  const GpExtentModel gp(cfg);
  for (int i = 0; i < gp.size(); ++i) {
    const auto reg = gp.regress(gp.angles()[static_cast<std::size_t>(i)]);
    CHECK(reg.weights(i) >= 0.99);
    CHECK(reg.residual_variance <= 1e-12);
  }
}

TEST_CASE("regressed radius reproduces sampled extent values") {
  GpConfig cfg;
  cfg.sigma_n = 1e-9;
  const GpExtentModel gp(cfg);
  Eigen::VectorXd extent(gp.size());
  for (int i = 0; i < gp.size(); ++i) extent(i) = 0.2 + 0.03 * std::cos(gp.angles()[static_cast<std::size_t>(i)]);
  for (int i = 0; i < gp.size(); ++i) {
    CHECK(gp.radius(gp.angles()[static_cast<std::size_t>(i)], extent) == doctest::Approx(extent(i)).epsilon(1e-6));
  }
}

TEST_CASE("regressor derivative matches central differences") {
  const GpExtentModel gp{GpConfig{}};
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  const double h = 1e-6;
  for (int i = 0; i < 50; ++i) {
    const double t = u(rng);
    const Eigen::RowVectorXd fd = (gp.regress(t + h).weights - gp.regress(t - h).weights) / (2.0 * h);
    CHECK((gp.regress(t).weights_derivative - fd).cwiseAbs().maxCoeff() <= 1e-7);
  }
}

TEST_CASE("one-shot regressor equals the cached model") {
  const GpConfig cfg;
  const GpExtentModel gp(cfg);
  const auto a = gp_regressor(1.1, cfg);
  const auto b = gp.regress(1.1);
  CHECK((a.weights - b.weights).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("wrap_angle maps into (-pi, pi]") {
  CHECK(wrap_angle(kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(-kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(3.0 * kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(0.5) == 0.5);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  for (int i = 0; i < 1000; ++i) {
    const double a = u(rng);
    const double w = wrap_angle(a);
    CHECK(w > -kPi);
    CHECK(w <= kPi);
    CHECK(std::abs(std::remainder(a - w, 2.0 * kPi)) <= 1e-9);
  }
}

TEST_CASE("gp config validation") {
  GpConfig cfg;
  cfg.sigma_f = 0.0;
  CHECK_THROWS_AS(GpExtentModel{cfg}, Error);
  cfg = GpConfig{};
  cfg.forgetting = 1.0;
  CHECK_THROWS_AS(validate(cfg), Error);
  cfg = GpConfig{};
  cfg.num_test_angles = 2;
  CHECK_THROWS_AS(validate(cfg), Error);
}
