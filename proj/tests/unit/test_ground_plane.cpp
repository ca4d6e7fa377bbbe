#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <tuple>

#include <Eigen/Geometry>

#include "doctest.h"
#include "eotrack/error.hpp"
#include "eotrack/ground_plane.hpp"
#include "eotrack/sim.hpp"

using namespace eotrack;

namespace {

double normal_angle_deg(const PlaneModel& a, const PlaneModel& b) {
  const double c = std::clamp(std::abs(a.normal().dot(b.normal())), 0.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

using Key = std::tuple<double, double, double>;

std::multiset<Key> keys(const std::vector<Point3>& pts) {
  std::multiset<Key> out;
  for (const auto& p : pts) out.emplace(p.x(), p.y(), p.z());
  return out;
}

PointCloudFrame noisy_floor(std::size_t inliers, std::size_t outliers, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> span(-3.0, 3.0);
  std::uniform_real_distribution<double> up(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.01);
  PointCloudFrame f;
  for (std::size_t i = 0; i < inliers; ++i) f.points.emplace_back(span(rng), span(rng), -1.0 + noise(rng));
  for (std::size_t i = 0; i < outliers; ++i) f.points.emplace_back(span(rng), span(rng), up(rng));
  return f;
}

}  // namespace

TEST_CASE("point to plane distance") {
  const auto floor = normalize_plane(kLidarGroundPrior);
  CHECK(point_plane_distance(Point3(0, 0, -1), floor) == doctest::Approx(0.0));
  CHECK(point_plane_distance(Point3(5, 7, 0), floor) == doctest::Approx(1.0));
  const auto diag = normalize_plane(1, 1, 1, 0);
  CHECK(point_plane_distance(Point3(1, 1, 1), diag) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));
}

TEST_CASE("normalization yields a unit normal with canonical sign") {
  const auto p = normalize_plane(0, 0, -2, 4);
  CHECK(p.normal().norm() == doctest::Approx(1.0));
  CHECK(p.c == doctest::Approx(1.0));
  CHECK(p.d == doctest::Approx(-2.0));
  const auto q = normalize_plane(0, -3, 0, 1);
  CHECK(q.b == doctest::Approx(1.0));
  const auto r = normalize_plane(-1, 0, 0, 1);
  CHECK(r.a == doctest::Approx(1.0));
  CHECK_THROWS_AS(normalize_plane(0, 0, 0, 1), Error);
  CHECK_THROWS_AS(normalize_plane(std::nan(""), 0, 1, 1), Error);
}

TEST_CASE("preselection boundary is inclusive") {
  const auto floor = normalize_plane(kLidarGroundPrior);
  PointCloudFrame f;
  f.points = {Point3(0, 0, -0.5), Point3(0, 0, 0.0), Point3(0, 0, 0.5)};
  const auto kept = preselect_near_plane(f, floor, 1.0);
  REQUIRE(kept.size() == 2);
  CHECK(kept.points[0].z() == -0.5);
  CHECK(kept.points[1].z() == 0.0);
  CHECK(preselect_near_plane(PointCloudFrame{}, floor, 1.0).empty());
}

TEST_CASE("preselection and its complement partition the frame") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  PointCloudFrame f;
  for (int i = 0; i < 1000; ++i) f.points.emplace_back(u(rng), u(rng), u(rng));
  const auto plane = normalize_plane(0.1, -0.2, 1.0, 0.7);
  const double gamma = 0.8;

  std::vector<Point3> near_bf;
  std::vector<Point3> far_bf;
  for (const auto& p : f.points) {
    const double dist = std::abs(plane.a * p.x() + plane.b * p.y() + plane.c * p.z() + plane.d);
    (dist <= gamma ? near_bf : far_bf).push_back(p);
  }
  const auto near = preselect_near_plane(f, plane, gamma);
  const auto far = remove_ground_points(f, plane, gamma);
  CHECK(keys(near.points) == keys(near_bf));
  CHECK(keys(far.points) == keys(far_bf));
  CHECK(near.size() + far.size() == f.size());
}

TEST_CASE("ground removal keeps points strictly above the threshold") {
  const auto floor = normalize_plane(kLidarGroundPrior);
  PointCloudFrame f;
  f.points = {Point3(0, 0, -0.99), Point3(1, 0, -0.9), Point3(0, 1, -0.985), Point3(2, 2, -1.01)};
  const auto kept = remove_ground_points(f, floor, 0.02);
  REQUIRE(kept.size() == 1);
  CHECK(kept.points[0].x() == 1.0);

  // A point at exactly the threshold distance counts as ground.
  const auto z = normalize_plane(0, 0, 1, 0);
  PointCloudFrame edge;
  edge.points = {Point3(0, 0, 0.02), Point3(0, 0, 0.0200001)};
  const auto idx = non_ground_indices(edge, z, 0.02);
  REQUIRE(idx.size() == 1);
  CHECK(idx[0] == 1);
}

TEST_CASE("ransac through three exact points") {
  PointCloudFrame f;
  f.points = {Point3(0, 0, 0), Point3(1, 0, 0), Point3(0, 1, 0)};
  RansacConfig cfg;
  cfg.min_inliers = 3;
  const auto p = ransac_plane(f, cfg);
  CHECK(p.a == doctest::Approx(0.0));
  CHECK(p.b == doctest::Approx(0.0));
  CHECK(p.c == doctest::Approx(1.0));
  CHECK(p.d == doctest::Approx(0.0));
}

TEST_CASE("ransac input errors") {
  PointCloudFrame two;
  two.points = {Point3(0, 0, 0), Point3(1, 0, 0)};
  try {
    ransac_plane(two, RansacConfig{});
    FAIL("expected too-few-points");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kTooFewPoints);
  }

  PointCloudFrame line;
  for (int i = 0; i < 20; ++i) line.points.emplace_back(i, 2 * i, 0);
  CHECK_THROWS_AS(ransac_plane(line, RansacConfig{}), Error);

  RansacConfig bad;
  bad.inlier_threshold = 0.0;
  CHECK_THROWS_AS(validate(bad), Error);
  bad = RansacConfig{};
  bad.max_iterations = 0;
  CHECK_THROWS_AS(validate(bad), Error);
}

TEST_CASE("ransac on a noisy floor with outliers") {
  const auto f = noisy_floor(500, 50, 21);
  const auto p = ransac_plane(f, RansacConfig{});
  CHECK(normal_angle_deg(p, normalize_plane(kLidarGroundPrior)) <= 2.0);
  CHECK(std::abs(p.d - 1.0) <= 0.02);
}

TEST_CASE("ransac on the tilted plane fixture") {
  const auto scene = make_plane_scene(20000, 10.0, 0.01, 0.05, 5);
  const auto p = ransac_plane(scene.frame, RansacConfig{});
  CHECK(normal_angle_deg(p, scene.truth) <= 2.0);
  CHECK(std::abs(p.d - scene.truth.d) <= 0.02);
}

TEST_CASE("ransac is invariant under input permutation") {
  auto f = noisy_floor(300, 60, 4);
  RansacConfig cfg;
  cfg.seed = 99;
  const auto a = ransac_plane(f, cfg);
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(f.points.begin(), f.points.end(), rng);
    const auto b = ransac_plane(f, cfg);
    CHECK(a.coefficients() == b.coefficients());
  }
}

TEST_CASE("returned plane has at least the support of every sampled hypothesis") {
  // Regenerates the sampled triples from the documented canonical ordering
  // and seed, then checks the final plane against each of them.
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto f = noisy_floor(200, 100, 50 + seed);
    RansacConfig cfg;
    cfg.seed = seed;
    cfg.max_iterations = 40;
    const auto result = ransac_plane_detailed(f, cfg);

    std::vector<Point3> pts = f.points;
    std::sort(pts.begin(), pts.end(), [](const Point3& p, const Point3& q) {
      return std::tie(p.x(), p.y(), p.z()) < std::tie(q.x(), q.y(), q.z());
    });
    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
    std::size_t strongest = 0;
    for (int it = 0; it < cfg.max_iterations; ++it) {
      std::size_t i = pick(rng);
      std::size_t j = pick(rng);
      std::size_t k = pick(rng);
      while (j == i) j = pick(rng);
      while (k == i || k == j) k = pick(rng);
      const Eigen::Vector3d n = (pts[j] - pts[i]).cross(pts[k] - pts[i]).normalized();
      std::size_t support = 0;
      for (const auto& p : pts) support += std::abs(n.dot(p - pts[i])) <= cfg.inlier_threshold;
      strongest = std::max(strongest, support);
    }
    CHECK(result.best_hypothesis_support == strongest);
    CHECK(result.inliers >= strongest);

    std::size_t recount = 0;
    for (const auto& p : pts) recount += point_plane_distance(p, result.plane) <= cfg.inlier_threshold;
    CHECK(recount == result.inliers);
  }
}

TEST_CASE("least squares fit recovers an exact plane") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Eigen::Vector3d n = Eigen::Vector3d(0.3, -0.4, 0.866).normalized();
  std::vector<Point3> pts;
  for (int i = 0; i < 50; ++i) {
    Point3 p(u(rng), u(rng), 0.0);
    p.z() = (0.25 - n.x() * p.x() - n.y() * p.y()) / n.z();
    pts.push_back(p);
  }
  const auto plane = fit_plane_least_squares(pts);
  CHECK((plane.normal() - n).norm() <= 1e-9);
  CHECK(plane.d == doctest::Approx(-0.25).epsilon(1e-9));
}
