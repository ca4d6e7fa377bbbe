#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "eotrack/detector.hpp"
#include "eotrack/pointcloud_io.hpp"

namespace eotrack {

enum class SensorKind { kLidarLike, kCameraLike };

const char* to_string(SensorKind kind) noexcept;
SensorKind sensor_kind_from_string(const std::string& name);

/// Synthetic sensor. The ground frame has its origin on the floor below the
/// sensor, z up and y pointing away from the sensor. The lidar frame is the
/// ground frame lowered by mount_height; the camera frame is an optical frame
/// (x right, y down, z forward) at mount_height.
struct SensorProfile {
  SensorKind kind = SensorKind::kLidarLike;
  double rate = 4.4;                 // Hz
  double base_noise = 0.005;         // m, isotropic std
  double depth_noise_coeff = 0.0;    // 1/m^2: std = base * (1 + coeff * depth^2)
  double max_range = 6.0;            // m
  double points_per_frame_mean = 8000.0;  // Poisson mean of robot surface points
  double mount_height = 1.0;         // m above the floor
  double ground_points_per_m2 = 150.0;
  double clutter_points_per_m2 = 14000.0;

  static SensorProfile lidar_like();
  static SensorProfile camera_like();

  Point3 to_sensor(const Eigen::Vector3d& ground) const;
  Eigen::Vector3d direction_to_sensor(const Eigen::Vector3d& ground_dir) const;
  /// Sensor position in the ground frame.
  Eigen::Vector3d sensor_in_ground() const { return {0.0, 0.0, mount_height}; }
  /// Optical depth for the camera, Euclidean range for the lidar.
  double depth(const Point3& sensor_point) const;
  double noise_std(const Point3& sensor_point) const;
  std::array<double, 4> ground_prior() const;
  OperationArea operation_area() const;
};

void validate(const SensorProfile& profile);

struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double psi = 0.0;
};

/// Static box standing on the floor; dims along (heading, lateral, up).
struct BoxObstacle {
  Pose2 pose;
  Eigen::Vector3d dims = Eigen::Vector3d::Ones();
};

enum class TrajectoryKind { kStraight, kTurning };

const char* to_string(TrajectoryKind kind) noexcept;
TrajectoryKind trajectory_from_string(const std::string& name);

struct Scenario {
  TrajectoryKind trajectory = TrajectoryKind::kStraight;
  double duration = 10.0;  // s
  Eigen::Vector3d robot_dims{0.39, 0.33, 0.21};
  double speed = 0.3;       // m/s
  double turn_rate = 0.3;   // rad/s, turning only
  Pose2 start{-1.5, 1.0, 0.0};
  std::vector<BoxObstacle> clutter;
  /// Point density on robot faces turned away from the sensor, relative to
  /// the sensor-facing ones. 0 gives strict self-occlusion.
  double hidden_face_density = 0.85;
  std::uint64_t seed = 0;

  /// 0.3 m/s along +x, 1 m in front of the sensor, 10 s.
  static Scenario straight();
  /// 0.12 m/s arc of radius 0.4 m, 10 s.
  static Scenario turning();
  /// A 1.5 x 0.1 x 0.5 m wall slab and a 0.08 m cube, clear of both default paths.
  static std::vector<BoxObstacle> default_clutter();
};

void validate(const Scenario& scenario);

Pose2 pose_at(const Scenario& scenario, double t);
Eigen::Vector2d velocity_at(const Scenario& scenario, double t);

enum class PointLabel : std::uint8_t { kGround = 0, kRobot = 1, kClutter = 2 };

struct GroundTruthFrame {
  std::size_t index = 0;
  double t = 0.0;
  Pose2 pose;  // ground frame
  Eigen::Vector2d velocity = Eigen::Vector2d::Zero();
  double turn_rate = 0.0;
  std::array<Eigen::Vector2d, 4> footprint;  // ground frame, counter-clockwise
  std::vector<PointLabel> labels;            // one per point of the frame
};

struct GroundTruth {
  SensorProfile profile;
  Eigen::Vector3d robot_dims{0.39, 0.33, 0.21};
  std::vector<GroundTruthFrame> frames;
};

struct SimulationOutput {
  std::vector<PointCloudFrame> frames;
  GroundTruth truth;
};

/// Number of frames rendered for a scenario: floor(duration * rate).
std::size_t frame_count(const Scenario& scenario, const SensorProfile& profile);

/// Renders every frame. Robot points are drawn from the robot box surface
/// (Poisson count); faces turned away from the sensor keep a share
/// hidden_face_density of their samples. All points then get Gaussian noise
/// with the profile's depth-dependent std. Deterministic in scenario.seed.
SimulationOutput generate_scenario(const Scenario& scenario, const SensorProfile& profile);

/// Footprint corners of a box pose, counter-clockwise in the ground frame.
std::array<Eigen::Vector2d, 4> footprint_corners(const Pose2& pose, double length, double width);

/// Distance from p to the surface of a box standing on the floor.
double distance_to_box_surface(const Eigen::Vector3d& p, const BoxObstacle& box);

/// Tilted-plane fixture used by the plane-recovery checks: inliers on a plane
/// through (0, 0, -1) tilted by tilt_deg about the x axis, Gaussian noise
/// along the normal, and uniform outliers in a surrounding box.
struct PlaneScene {
  PointCloudFrame frame;
  PlaneModel truth;
};
PlaneScene make_plane_scene(std::size_t count, double tilt_deg, double noise_std,
                            double outlier_fraction, std::uint64_t seed);

}  // namespace eotrack
