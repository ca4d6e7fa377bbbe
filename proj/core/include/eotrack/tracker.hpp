#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "eotrack/gp_extent.hpp"
#include "eotrack/ground_plane.hpp"
#include "eotrack/pointcloud_io.hpp"

namespace eotrack {

/// Layout of the augmented state [x, y, psi, vx, vy, omega, p_f...].
namespace state_index {
inline constexpr Eigen::Index kX = 0;
inline constexpr Eigen::Index kY = 1;
inline constexpr Eigen::Index kPsi = 2;
inline constexpr Eigen::Index kVx = 3;
inline constexpr Eigen::Index kVy = 4;
inline constexpr Eigen::Index kOmega = 5;
inline constexpr Eigen::Index kExtent = 6;
}  // namespace state_index

struct TargetState {
  Eigen::VectorXd vec;

  Eigen::Index extent_size() const { return vec.size() - state_index::kExtent; }
  Point2 position() const { return vec.segment<2>(state_index::kX); }
  double heading() const { return vec(state_index::kPsi); }
  Eigen::Vector2d velocity() const { return vec.segment<2>(state_index::kVx); }
  double turn_rate() const { return vec(state_index::kOmega); }
  Eigen::VectorXd extent() const { return vec.tail(extent_size()); }
};

using StateCovariance = Eigen::MatrixXd;
using MeasurementSet = std::vector<Point2>;

struct MotionConfig {
  double sigma_c = 0.05;     // white-noise acceleration intensity, sqrt(m^2 s^-3)
  double sigma_meas = 0.1;   // isotropic measurement noise, m
  double period = 1.0 / 4.4;  // nominal step, s
};

void validate(const MotionConfig& cfg);

/// Minimum radial extent; enforced after every update.
inline constexpr double kMinRadius = 0.01;

/// Orthonormal in-plane basis used by project_to_tracking_plane. The first
/// axis is the world axis least aligned with the normal, projected into the
/// plane; the second is normal x first.
struct TrackingFrame {
  Eigen::Vector3d origin;  // foot of the perpendicular from the sensor origin
  Eigen::Vector3d u;
  Eigen::Vector3d v;
  Eigen::Vector3d normal;

  Point2 to_plane(const Point3& p) const;
  Eigen::Vector2d direction_to_plane(const Eigen::Vector3d& d) const;
};

TrackingFrame tracking_frame(const PlaneModel& plane);
MeasurementSet project_to_tracking_plane(const PointCloudFrame& points, const PlaneModel& plane);

struct InitialUncertainty {
  double position_std = 0.5;
  double heading_std = std::numbers::pi / 4.0;
  double velocity_std = 0.5;
  double turn_rate_std = 0.5;
};

/// Elliptical prior extent from the target's length and width (semi-axes
/// length/2 and width/2, length along body angle 0), zero velocity, zero
/// heading. The extent covariance block is the kernel Gram matrix.
std::pair<TargetState, StateCovariance> initialize_state(
    double length, double width, const Point2& start, const GpConfig& gp,
    const InitialUncertainty& uncertainty = {});

/// Running tally of filter-consistency checks.
struct FilterHealth {
  std::size_t covariance_checks = 0;
  std::size_t psd_violations = 0;        // min eigenvalue < -1e-9 before projection
  std::size_t symmetry_violations = 0;   // asymmetry > 1e-12 after projection
  std::size_t heading_violations = 0;    // heading outside (-pi, pi]
  std::size_t radius_violations = 0;     // extent value below kMinRadius
  double min_eigenvalue = 0.0;           // smallest pre-projection eigenvalue seen

  std::size_t violations() const noexcept {
    return psd_violations + symmetry_violations + heading_violations + radius_violations;
  }
};

/// Symmetrizes and clips negative eigenvalues to zero. Records the
/// pre-projection minimum eigenvalue in health when provided.
void project_covariance(StateCovariance& cov, FilterHealth* health = nullptr);

/// Constant-velocity prediction for position and heading with discretized
/// white-noise acceleration; the extent mean is unchanged and its covariance
/// reverts toward the prior Gram matrix by the forgetting factor.
std::pair<TargetState, StateCovariance> predict(const TargetState& state, const StateCovariance& cov,
                                                double dt, const MotionConfig& motion,
                                                const GpExtentModel& gp,
                                                FilterHealth* health = nullptr);

/// Keeps, per angular bin about center, every point within band of the
/// bin's largest radius.
MeasurementSet extract_contour_measurements(const MeasurementSet& meas, const Point2& center,
                                            int bins = 36, double band = 0.01);

struct MeasurementPrediction {
  Point2 predicted;
  Eigen::Matrix<double, 2, Eigen::Dynamic> jacobian;
};

/// Star-convex contour model: the predicted point lies on the ray from the
/// center through z at the GP radius for the body-frame angle of that ray.
/// With full_angle_derivative=false the ray direction is held fixed while
/// differentiating. Returns nullopt when z coincides with the center.
std::optional<MeasurementPrediction> measurement_model(const TargetState& state, const Point2& z,
                                                       const GpExtentModel& gp,
                                                       bool full_angle_derivative = false);

/// Predicted point for a fixed ray direction phi; the function whose
/// derivative the default Jacobian is.
Point2 contour_point(const TargetState& state, double phi, const GpExtentModel& gp);

struct IekfOptions {
  int max_iterations = 10;
  double tolerance = 1e-6;
  bool full_angle_derivative = false;
  double min_radius = kMinRadius;
};

/// Stacked residual z - h(x) and Jacobian of h at an iterate.
struct Linearization {
  Eigen::VectorXd residual;
  Eigen::MatrixXd jacobian;
};

using LinearizeFn = std::function<Linearization(const Eigen::VectorXd& iterate)>;

struct UpdateResult {
  TargetState state;
  StateCovariance cov;
  int iterations = 0;
  std::size_t measurements_used = 0;
  std::size_t measurements_skipped = 0;
};

/// Generic iterated EKF step with measurement noise noise_var * I. Angle
/// index (if >= 0) is treated as circular when differencing iterates.
UpdateResult iterated_update(const TargetState& prior, const StateCovariance& cov,
                             const LinearizeFn& linearize, double noise_var, int max_iterations,
                             double tolerance, Eigen::Index angle_index = state_index::kPsi);

/// Iterated EKF update with all measurements stacked, R = sigma_meas^2 I,
/// Joseph-form covariance, extent clamped to min_radius and heading wrapped.
UpdateResult iekf_update(const TargetState& state, const StateCovariance& cov,
                         const MeasurementSet& meas, const MotionConfig& motion,
                         const GpExtentModel& gp, const IekfOptions& options = {},
                         FilterHealth* health = nullptr);

struct TrackerConfig {
  GpConfig gp;
  MotionConfig motion;
  IekfOptions iekf;
  double prior_length = 0.39;
  double prior_width = 0.33;
  int contour_bins = 36;
  double contour_band = 0.01;
  InitialUncertainty initial;
};

void validate(const TrackerConfig& cfg);

struct TrackRecord {
  std::size_t frame_index = 0;
  double t = 0.0;
  bool initialized = false;
  bool detected = false;
  TargetState state;
  Eigen::VectorXd cov_diag;
  std::size_t contour_points = 0;
};

/// Sequential single-target tracker. The first detection initializes the
/// track at the measurement centroid; afterwards every step predicts and,
/// when a detection is present, extracts contour points and runs the IEKF.
class ExtentTracker {
 public:
  explicit ExtentTracker(const TrackerConfig& cfg);

  /// Timestamps must be strictly increasing.
  const TrackRecord& step(double timestamp, const std::optional<MeasurementSet>& detection);

  bool initialized() const noexcept { return initialized_; }
  const TargetState& state() const noexcept { return state_; }
  const StateCovariance& covariance() const noexcept { return cov_; }
  const std::vector<TrackRecord>& log() const noexcept { return log_; }
  const FilterHealth& health() const noexcept { return health_; }
  const GpExtentModel& gp() const noexcept { return gp_; }
  const TrackerConfig& config() const noexcept { return cfg_; }

 private:
  void check_state();

  TrackerConfig cfg_;
  GpExtentModel gp_;
  bool initialized_ = false;
  double last_t_ = 0.0;
  bool have_time_ = false;
  TargetState state_;
  StateCovariance cov_;
  FilterHealth health_;
  std::vector<TrackRecord> log_;
};

}  // namespace eotrack
