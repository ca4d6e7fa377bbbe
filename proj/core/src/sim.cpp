#include "eotrack/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

#include "eotrack/error.hpp"

namespace eotrack {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

struct Face {
  Eigen::Vector3d center;
  Eigen::Vector3d normal;
  Eigen::Vector3d span_a;  // half-edge vectors
  Eigen::Vector3d span_b;
  double area;
};

std::vector<Face> box_faces(const BoxObstacle& box) {
  const double c = std::cos(box.pose.psi);
  const double s = std::sin(box.pose.psi);
  const Eigen::Vector3d ax(c, s, 0.0);
  const Eigen::Vector3d ay(-s, c, 0.0);
  const Eigen::Vector3d az(0.0, 0.0, 1.0);
  const double hl = 0.5 * box.dims.x();
  const double hw = 0.5 * box.dims.y();
  const double hh = 0.5 * box.dims.z();
  const Eigen::Vector3d mid(box.pose.x, box.pose.y, hh);
  return {
      {mid + hl * ax, ax, hw * ay, hh * az, 4.0 * hw * hh},
      {mid - hl * ax, -ax, hw * ay, hh * az, 4.0 * hw * hh},
      {mid + hw * ay, ay, hl * ax, hh * az, 4.0 * hl * hh},
      {mid - hw * ay, -ay, hl * ax, hh * az, 4.0 * hl * hh},
      {mid + hh * az, az, hl * ax, hw * ay, 4.0 * hl * hw},
  };
}

bool inside_footprint(const Eigen::Vector2d& q, const BoxObstacle& box) {
  const double c = std::cos(box.pose.psi);
  const double s = std::sin(box.pose.psi);
  const Eigen::Vector2d d = q - Eigen::Vector2d(box.pose.x, box.pose.y);
  const double lx = c * d.x() + s * d.y();
  const double ly = -s * d.x() + c * d.y();
  return std::abs(lx) <= 0.5 * box.dims.x() && std::abs(ly) <= 0.5 * box.dims.y();
}

/// Appends surface samples from a box. Faces turned away from the sensor get
/// hidden_density times the per-area rate of the sensor-facing ones.
void sample_box(const BoxObstacle& box, std::size_t count, const Eigen::Vector3d& sensor,
                double hidden_density, std::mt19937_64& rng, std::vector<Eigen::Vector3d>& out) {
  std::vector<Face> visible;
  std::vector<double> weights;
  for (const Face& f : box_faces(box)) {
    const double w = f.normal.dot(sensor - f.center) > 0.0 ? f.area : f.area * hidden_density;
    if (w <= 0.0) continue;
    visible.push_back(f);
    weights.push_back(w);
  }
  if (visible.empty() || count == 0) return;
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (std::size_t i = 0; i < count; ++i) {
    const Face& f = visible[pick(rng)];
    const double u = unit(rng);
    const double v = unit(rng);
    out.push_back(f.center + u * f.span_a + v * f.span_b);
  }
}

}  // namespace

const char* to_string(SensorKind kind) noexcept {
  return kind == SensorKind::kLidarLike ? "lidar_like" : "camera_like";
}

SensorKind sensor_kind_from_string(const std::string& name) {
  if (name == "lidar_like" || name == "lidar") return SensorKind::kLidarLike;
  if (name == "camera_like" || name == "camera") return SensorKind::kCameraLike;
  throw Error(ErrorKind::kInvalidArgument, "unknown sensor profile '" + name + "'");
}

SensorProfile SensorProfile::lidar_like() {
  SensorProfile p;
  p.kind = SensorKind::kLidarLike;
  p.rate = 4.4;
  p.base_noise = 0.005;
  p.depth_noise_coeff = 0.0;
  p.max_range = 6.0;
  p.points_per_frame_mean = 8000.0;
  p.mount_height = 1.0;
  return p;
}

SensorProfile SensorProfile::camera_like() {
  SensorProfile p;
  p.kind = SensorKind::kCameraLike;
  p.rate = 30.0;
  p.base_noise = 0.006;
  p.depth_noise_coeff = 1.0;
  p.max_range = 3.0;
  p.points_per_frame_mean = 8000.0;
  p.mount_height = 0.5;
  return p;
}

Point3 SensorProfile::to_sensor(const Eigen::Vector3d& g) const {
  if (kind == SensorKind::kLidarLike) return {g.x(), g.y(), g.z() - mount_height};
  return {g.x(), mount_height - g.z(), g.y()};
}

Eigen::Vector3d SensorProfile::direction_to_sensor(const Eigen::Vector3d& d) const {
  if (kind == SensorKind::kLidarLike) return d;
  return {d.x(), -d.z(), d.y()};
}

double SensorProfile::depth(const Point3& p) const {
  return kind == SensorKind::kCameraLike ? p.z() : p.norm();
}

double SensorProfile::noise_std(const Point3& p) const {
  const double dep = depth(p);
  return base_noise * (1.0 + depth_noise_coeff * dep * dep);
}

std::array<double, 4> SensorProfile::ground_prior() const {
  if (kind == SensorKind::kLidarLike) return {0.0, 0.0, 1.0, mount_height};
  return {0.0, 1.0, 0.0, -mount_height};
}

OperationArea SensorProfile::operation_area() const {
  return kind == SensorKind::kLidarLike ? kLidarOperationArea : kCameraOperationArea;
}

void validate(const SensorProfile& p) {
  if (!(p.rate > 0.0)) throw Error(ErrorKind::kInvalidArgument, "sensor rate must be > 0");
  if (!(p.base_noise >= 0.0 && p.depth_noise_coeff >= 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "sensor noise parameters must be >= 0");
  }
  if (!(p.max_range > 0.0)) throw Error(ErrorKind::kInvalidArgument, "sensor max_range must be > 0");
  if (!(p.points_per_frame_mean >= 0.0 && p.ground_points_per_m2 >= 0.0 &&
        p.clutter_points_per_m2 >= 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "sensor point densities must be >= 0");
  }
  if (!(p.mount_height > 0.0)) throw Error(ErrorKind::kInvalidArgument, "mount_height must be > 0");
}

const char* to_string(TrajectoryKind kind) noexcept {
  return kind == TrajectoryKind::kStraight ? "straight" : "turning";
}

TrajectoryKind trajectory_from_string(const std::string& name) {
  if (name == "straight") return TrajectoryKind::kStraight;
  if (name == "turning") return TrajectoryKind::kTurning;
  throw Error(ErrorKind::kInvalidArgument, "unknown trajectory '" + name + "'");
}

std::vector<BoxObstacle> Scenario::default_clutter() {
  return {
      {{2.0, 2.45, 0.0}, {1.5, 0.1, 0.5}},
      {{1.2, 1.55, 0.3}, {0.08, 0.08, 0.08}},
  };
}

Scenario Scenario::straight() {
  Scenario s;
  s.trajectory = TrajectoryKind::kStraight;
  s.duration = 10.0;
  s.speed = 0.3;
  s.start = {-1.5, 1.0, 0.0};
  s.clutter = default_clutter();
  return s;
}

Scenario Scenario::turning() {
  Scenario s;
  s.trajectory = TrajectoryKind::kTurning;
  s.duration = 10.0;
  s.speed = 0.12;
  s.turn_rate = 0.3;
  s.start = {-0.3, 0.55, 0.0};
  s.clutter = default_clutter();
  return s;
}

void validate(const Scenario& s) {
  if (!(s.duration > 0.0)) throw Error(ErrorKind::kInvalidArgument, "scenario duration must be > 0");
  if (!(s.robot_dims.minCoeff() > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "robot dimensions must be positive");
  }
  if (!(s.speed >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "scenario speed must be >= 0");
  if (!(s.hidden_face_density >= 0.0 && s.hidden_face_density <= 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "hidden_face_density must be in [0, 1]");
  }
  if (s.trajectory == TrajectoryKind::kTurning && !(s.turn_rate != 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "turning scenario needs a non-zero turn_rate");
  }
  for (const auto& c : s.clutter) {
    if (!(c.dims.minCoeff() > 0.0)) {
      throw Error(ErrorKind::kInvalidArgument, "clutter dimensions must be positive");
    }
  }
}

Pose2 pose_at(const Scenario& s, double t) {
  const Pose2& p0 = s.start;
  if (s.trajectory == TrajectoryKind::kStraight) {
    return {p0.x + s.speed * t * std::cos(p0.psi), p0.y + s.speed * t * std::sin(p0.psi), p0.psi};
  }
  const double psi = p0.psi + s.turn_rate * t;
  const double radius = s.speed / s.turn_rate;
  return {p0.x + radius * (std::sin(psi) - std::sin(p0.psi)),
          p0.y - radius * (std::cos(psi) - std::cos(p0.psi)), psi};
}

Eigen::Vector2d velocity_at(const Scenario& s, double t) {
  const double psi = pose_at(s, t).psi;
  return s.speed * Eigen::Vector2d(std::cos(psi), std::sin(psi));
}

std::array<Eigen::Vector2d, 4> footprint_corners(const Pose2& pose, double length, double width) {
  const Eigen::Vector2d c(pose.x, pose.y);
  const Eigen::Vector2d a = 0.5 * length * Eigen::Vector2d(std::cos(pose.psi), std::sin(pose.psi));
  const Eigen::Vector2d b = 0.5 * width * Eigen::Vector2d(-std::sin(pose.psi), std::cos(pose.psi));
  return {c + a + b, c - a + b, c - a - b, c + a - b};
}

double distance_to_box_surface(const Eigen::Vector3d& p, const BoxObstacle& box) {
  const double c = std::cos(box.pose.psi);
  const double s = std::sin(box.pose.psi);
  const Eigen::Vector3d d(p.x() - box.pose.x, p.y() - box.pose.y, p.z() - 0.5 * box.dims.z());
  const Eigen::Vector3d local(c * d.x() + s * d.y(), -s * d.x() + c * d.y(), d.z());
  const Eigen::Vector3d q = local.cwiseAbs() - 0.5 * box.dims;
  const double outside = q.cwiseMax(0.0).norm();
  const double inside = std::min(q.maxCoeff(), 0.0);
  return std::abs(outside + inside);
}

std::size_t frame_count(const Scenario& scenario, const SensorProfile& profile) {
  return static_cast<std::size_t>(std::floor(scenario.duration * profile.rate + 1e-9));
}

SimulationOutput generate_scenario(const Scenario& scenario, const SensorProfile& profile) {
  validate(scenario);
  validate(profile);
  const std::size_t n_frames = frame_count(scenario, profile);
  const Eigen::Vector3d sensor = profile.sensor_in_ground();

  // Floor patch in front of the sensor.
  constexpr double kGroundXMin = -4.0, kGroundXMax = 4.0, kGroundYMin = 0.3, kGroundYMax = 4.5;
  const double ground_area = (kGroundXMax - kGroundXMin) * (kGroundYMax - kGroundYMin);

  SimulationOutput out;
  out.truth.profile = profile;
  out.truth.robot_dims = scenario.robot_dims;
  out.frames.reserve(n_frames);
  out.truth.frames.reserve(n_frames);
  const std::string frame_id = to_string(profile.kind);

  for (std::size_t k = 0; k < n_frames; ++k) {
    std::mt19937_64 rng(splitmix64(scenario.seed ^ splitmix64(k + 1)));
    const double t = static_cast<double>(k) / profile.rate;
    const Pose2 pose = pose_at(scenario, t);
    const BoxObstacle robot{pose, scenario.robot_dims};

    std::vector<Eigen::Vector3d> raw_pts;
    std::vector<PointLabel> labels;

    std::poisson_distribution<std::size_t> robot_count(std::max(profile.points_per_frame_mean, 1e-12));
    sample_box(robot, profile.points_per_frame_mean > 0.0 ? robot_count(rng) : 0, sensor,
               scenario.hidden_face_density, rng, raw_pts);
    labels.resize(raw_pts.size(), PointLabel::kRobot);

    for (const auto& box : scenario.clutter) {
      double visible_area = 0.0;
      for (const Face& f : box_faces(box)) {
        if (f.normal.dot(sensor - f.center) > 0.0) visible_area += f.area;
      }
      const double mean = visible_area * profile.clutter_points_per_m2;
      std::size_t count = 0;
      if (mean > 0.0) count = std::poisson_distribution<std::size_t>(mean)(rng);
      const std::size_t before = raw_pts.size();
      sample_box(box, count, sensor, 0.0, rng, raw_pts);
      labels.resize(labels.size() + (raw_pts.size() - before), PointLabel::kClutter);
    }

    const double ground_mean = ground_area * profile.ground_points_per_m2;
    if (ground_mean > 0.0) {
      const std::size_t count = std::poisson_distribution<std::size_t>(ground_mean)(rng);
      std::uniform_real_distribution<double> ux(kGroundXMin, kGroundXMax);
      std::uniform_real_distribution<double> uy(kGroundYMin, kGroundYMax);
      for (std::size_t i = 0; i < count; ++i) {
        const Eigen::Vector2d q(ux(rng), uy(rng));
        bool occluded = inside_footprint(q, robot);
        for (const auto& box : scenario.clutter) occluded = occluded || inside_footprint(q, box);
        if (occluded) continue;
        raw_pts.emplace_back(q.x(), q.y(), 0.0);
        labels.push_back(PointLabel::kGround);
      }
    }

    PointCloudFrame frame{t, {}, frame_id};
    GroundTruthFrame gt;
    gt.index = k;
    gt.t = t;
    gt.pose = pose;
    gt.velocity = velocity_at(scenario, t);
    gt.turn_rate = scenario.trajectory == TrajectoryKind::kTurning ? scenario.turn_rate : 0.0;
    gt.footprint = footprint_corners(pose, scenario.robot_dims.x(), scenario.robot_dims.y());
    frame.points.reserve(raw_pts.size());
    gt.labels.reserve(raw_pts.size());

    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t i = 0; i < raw_pts.size(); ++i) {
      Point3 p = profile.to_sensor(raw_pts[i]);
      const double sd = profile.noise_std(p);
      if (sd > 0.0) p += sd * Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
      if (p.norm() > profile.max_range) continue;
      frame.points.push_back(p);
      gt.labels.push_back(labels[i]);
    }
    out.frames.push_back(std::move(frame));
    out.truth.frames.push_back(std::move(gt));
  }
  return out;
}

PlaneScene make_plane_scene(std::size_t count, double tilt_deg, double noise_std,
                            double outlier_fraction, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double tilt = tilt_deg * std::numbers::pi / 180.0;
  const Eigen::Vector3d normal(0.0, -std::sin(tilt), std::cos(tilt));
  const Eigen::Vector3d anchor(0.0, 0.0, -1.0);
  const Eigen::Vector3d e1 = Eigen::Vector3d::UnitX();
  const Eigen::Vector3d e2 = normal.cross(e1);
  PlaneScene scene;
  scene.truth = normalize_plane(normal.x(), normal.y(), normal.z(), -normal.dot(anchor));
  std::uniform_real_distribution<double> span(-5.0, 5.0);
  std::uniform_real_distribution<double> height(-3.0, 1.0);
  std::normal_distribution<double> noise(0.0, noise_std);
  std::bernoulli_distribution outlier(outlier_fraction);
  scene.frame.points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (outlier(rng)) {
      scene.frame.points.emplace_back(span(rng), span(rng), height(rng));
    } else {
      scene.frame.points.push_back(anchor + span(rng) * e1 + span(rng) * e2 + noise(rng) * normal);
    }
  }
  return scene;
}

}  // namespace eotrack
