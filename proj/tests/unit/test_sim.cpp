#include <cmath>
#include <numbers>

#include "doctest.h"
#include "eotrack/error.hpp"
#include "eotrack/metrics.hpp"
#include "eotrack/sim.hpp"

using namespace eotrack;

namespace {

SensorProfile noiseless(SensorProfile p) {
  p.base_noise = 0.0;
  p.depth_noise_coeff = 0.0;
  return p;
}

Eigen::Vector3d to_ground(const SensorProfile& p, const Point3& s) {
  if (p.kind == SensorKind::kLidarLike) return {s.x(), s.y(), s.z() + p.mount_height};
  return {s.x(), s.z(), p.mount_height - s.y()};
}

/// Mean distance from robot-labeled points to the true robot box.
double mean_robot_surface_error(const SimulationOutput& sim, const Scenario& sc) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < sim.frames.size(); ++k) {
    const BoxObstacle robot{sim.truth.frames[k].pose, sc.robot_dims};
    for (std::size_t i = 0; i < sim.frames[k].size(); ++i) {
      if (sim.truth.frames[k].labels[i] != PointLabel::kRobot) continue;
      sum += distance_to_box_surface(to_ground(sim.truth.profile, sim.frames[k].points[i]), robot);
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

}  // namespace

TEST_CASE("straight lidar scenario frame count and travel") {
  const auto sc = Scenario::straight();
  const auto profile = SensorProfile::lidar_like();
  CHECK(frame_count(sc, profile) == 44);
  CHECK(pose_at(sc, sc.duration).x - sc.start.x == doctest::Approx(3.0));
  const auto sim = generate_scenario(sc, profile);
  REQUIRE(sim.frames.size() == 44);
  REQUIRE(sim.truth.frames.size() == 44);
  for (std::size_t k = 1; k < 44; ++k) {
    CHECK(sim.truth.frames[k].pose.x - sim.truth.frames[k - 1].pose.x == doctest::Approx(0.3 / 4.4));
    CHECK(sim.frames[k].timestamp > sim.frames[k - 1].timestamp);
  }
  CHECK(frame_count(sc, SensorProfile::camera_like()) == 300);
}

TEST_CASE("labels align with points") {
  auto sc = Scenario::turning();
  sc.duration = 1.0;
  const auto sim = generate_scenario(sc, SensorProfile::camera_like());
  for (std::size_t k = 0; k < sim.frames.size(); ++k) {
    CHECK(sim.truth.frames[k].labels.size() == sim.frames[k].size());
    CHECK(sim.truth.frames[k].index == k);
    for (const auto& p : sim.frames[k].points) CHECK(p.allFinite());
  }
}

TEST_CASE("noiseless robot points lie on the box surface") {
  for (auto profile : {SensorProfile::lidar_like(), SensorProfile::camera_like()}) {
    auto sc = Scenario::turning();
    sc.duration = 0.5;
    const auto sim = generate_scenario(sc, noiseless(profile));
    std::size_t robot_points = 0;
    for (std::size_t k = 0; k < sim.frames.size(); ++k) {
      const BoxObstacle robot{sim.truth.frames[k].pose, sc.robot_dims};
      for (std::size_t i = 0; i < sim.frames[k].size(); ++i) {
        const auto g = to_ground(profile, sim.frames[k].points[i]);
        if (sim.truth.frames[k].labels[i] == PointLabel::kRobot) {
          CHECK(distance_to_box_surface(g, robot) <= 1e-12);
          ++robot_points;
        } else if (sim.truth.frames[k].labels[i] == PointLabel::kGround) {
          CHECK(std::abs(g.z()) <= 1e-12);
        }
      }
    }
    CHECK(robot_points > 0);
  }
}

TEST_CASE("strict self-occlusion hides the far face") {
  auto sc = Scenario::straight();
  sc.duration = 0.5;
  sc.hidden_face_density = 0.0;
  sc.clutter.clear();
  const auto profile = noiseless(SensorProfile::lidar_like());
  const auto sim = generate_scenario(sc, profile);
  for (std::size_t k = 0; k < sim.frames.size(); ++k) {
    const auto& pose = sim.truth.frames[k].pose;
    for (std::size_t i = 0; i < sim.frames[k].size(); ++i) {
      if (sim.truth.frames[k].labels[i] != PointLabel::kRobot) continue;
      const auto g = to_ground(profile, sim.frames[k].points[i]);
      // The face at +y looks away from a sensor at the origin.
      CHECK(g.y() < pose.y + 0.5 * sc.robot_dims.y() - 1e-9);
    }
  }
}

TEST_CASE("camera noise grows with depth") {
  auto near = Scenario::straight();
  near.speed = 0.0;
  near.duration = 0.5;
  near.clutter.clear();
  near.start = {0.0, 1.0, 0.0};
  auto far = near;
  far.start = {0.0, 2.7, 0.0};
  const auto profile = SensorProfile::camera_like();
  const double e_near = mean_robot_surface_error(generate_scenario(near, profile), near);
  const double e_far = mean_robot_surface_error(generate_scenario(far, profile), far);
  CHECK(e_far > e_near);
  CHECK(profile.noise_std(Point3(0, 0, 3.0)) > profile.noise_std(Point3(0, 0, 1.0)));

  const auto lidar = SensorProfile::lidar_like();
  CHECK(lidar.noise_std(Point3(0, 0, 3.0)) == lidar.noise_std(Point3(0, 0, 1.0)));
}

TEST_CASE("robot point counts follow the Poisson mean") {
  auto sc = Scenario::straight();
  sc.speed = 0.0;
  sc.clutter.clear();
  auto profile = SensorProfile::lidar_like();
  profile.points_per_frame_mean = 400.0;
  profile.ground_points_per_m2 = 0.0;
  sc.duration = 1000.0 / profile.rate;
  const auto sim = generate_scenario(sc, profile);
  REQUIRE(sim.frames.size() == 1000);
  double total = 0.0;
  for (const auto& f : sim.frames) total += static_cast<double>(f.size());
  CHECK(std::abs(total / 1000.0 - 400.0) <= 0.05 * 400.0);
}

TEST_CASE("generation is deterministic in the seed") {
  auto sc = Scenario::turning();
  sc.duration = 1.0;
  sc.seed = 42;
  const auto profile = SensorProfile::lidar_like();
  const auto a = generate_scenario(sc, profile);
  const auto b = generate_scenario(sc, profile);
  REQUIRE(a.frames.size() == b.frames.size());
  for (std::size_t k = 0; k < a.frames.size(); ++k) {
    CHECK(a.frames[k].points == b.frames[k].points);
    CHECK(a.truth.frames[k].labels == b.truth.frames[k].labels);
  }
  sc.seed = 43;
  const auto c = generate_scenario(sc, profile);
  CHECK(a.frames[0].points != c.frames[0].points);
}

TEST_CASE("turning trajectory stays on its circle") {
  const auto sc = Scenario::turning();
  const double radius = sc.speed / sc.turn_rate;
  const Eigen::Vector2d center(sc.start.x - radius * std::sin(sc.start.psi),
                               sc.start.y + radius * std::cos(sc.start.psi));
  for (double t = 0.0; t <= sc.duration; t += 0.37) {
    const auto p = pose_at(sc, t);
    CHECK((Eigen::Vector2d(p.x, p.y) - center).norm() == doctest::Approx(radius));
    const double h = 1e-6;
    const auto a = pose_at(sc, t + h);
    const auto b = pose_at(sc, t - h);
    const Eigen::Vector2d fd((a.x - b.x) / (2 * h), (a.y - b.y) / (2 * h));
    CHECK((fd - velocity_at(sc, t)).norm() <= 1e-6);
  }
}

TEST_CASE("footprint corners are counter-clockwise") {
  const auto c = footprint_corners({1.0, 2.0, 0.7}, 0.39, 0.33);
  const Polygon poly(c.begin(), c.end());
  CHECK(signed_area(poly) == doctest::Approx(0.39 * 0.33));
}

TEST_CASE("box surface distance") {
  const BoxObstacle box{{0.0, 0.0, 0.0}, {2.0, 1.0, 1.0}};
  CHECK(distance_to_box_surface({1.0, 0.0, 0.5}, box) == doctest::Approx(0.0));
  CHECK(distance_to_box_surface({0.0, 0.0, 0.5}, box) == doctest::Approx(0.5));
  CHECK(distance_to_box_surface({2.0, 0.0, 0.5}, box) == doctest::Approx(1.0));
}

TEST_CASE("plane fixture has the requested tilt and outlier share") {
  const auto scene = make_plane_scene(10000, 10.0, 0.0, 0.05, 1);
  CHECK(std::acos(scene.truth.c) * 180.0 / std::numbers::pi == doctest::Approx(10.0));
  std::size_t on_plane = 0;
  for (const auto& p : scene.frame.points) on_plane += point_plane_distance(p, scene.truth) <= 1e-9;
  CHECK(std::abs(1.0 - static_cast<double>(on_plane) / 10000.0 - 0.05) <= 0.01);
}

TEST_CASE("scenario and profile validation") {
  auto sc = Scenario::straight();
  sc.duration = 0.0;
  CHECK_THROWS_AS(validate(sc), Error);
  sc = Scenario::straight();
  sc.robot_dims.x() = -1.0;
  CHECK_THROWS_AS(validate(sc), Error);
  auto p = SensorProfile::lidar_like();
  p.rate = 0.0;
  CHECK_THROWS_AS(validate(p), Error);
  p = SensorProfile::camera_like();
  p.base_noise = -0.1;
  CHECK_THROWS_AS(generate_scenario(Scenario::straight(), p), Error);
  CHECK(sensor_kind_from_string("camera_like") == SensorKind::kCameraLike);
  CHECK_THROWS_AS(trajectory_from_string("zigzag"), Error);
}
