#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "eotrack/pointcloud_io.hpp"

namespace eotrack {

/// Plane a*x + b*y + c*z + d = 0. Construct through normalize_plane() to get a
/// unit normal with canonical sign.
struct PlaneModel {
  double a = 0.0;
  double b = 0.0;
  double c = 1.0;
  double d = 0.0;

  Eigen::Vector3d normal() const { return {a, b, c}; }
  std::array<double, 4> coefficients() const { return {a, b, c, d}; }
};

/// Scales to a unit normal and flips the sign so that c > 0, or c == 0 and
/// b > 0, or c == b == 0 and a > 0. Throws on a zero or non-finite normal.
PlaneModel normalize_plane(double a, double b, double c, double d);
PlaneModel normalize_plane(const std::array<double, 4>& coefficients);

/// Lidar mount prior: z = -1 (sensor one meter above the floor, z up).
inline constexpr std::array<double, 4> kLidarGroundPrior{0.0, 0.0, 1.0, 1.0};
/// Camera optical-frame prior: y = 0.5 (y axis pointing down).
inline constexpr std::array<double, 4> kCameraGroundPrior{0.0, 1.0, 0.0, -0.5};

struct RansacConfig {
  double inlier_threshold = 0.02;  // meters
  int max_iterations = 100;
  int min_inliers = 10;
  std::uint64_t seed = 0;
};

void validate(const RansacConfig& cfg);

double point_plane_distance(const Point3& p, const PlaneModel& plane);

/// Points within max_distance of the prior plane (boundary inclusive).
PointCloudFrame preselect_near_plane(const PointCloudFrame& frame, const PlaneModel& prior,
                                     double max_distance);

struct RansacResult {
  PlaneModel plane;
  std::size_t inliers = 0;  // support of the returned plane at the inlier threshold
  std::size_t best_hypothesis_support = 0;
};

/// Best-support plane over random 3-point hypotheses, refined by a total least
/// squares fit to the winning inliers. Points are sorted lexicographically
/// before sampling, so the result does not depend on input order.
RansacResult ransac_plane_detailed(const PointCloudFrame& points, const RansacConfig& cfg);
PlaneModel ransac_plane(const PointCloudFrame& points, const RansacConfig& cfg);

/// Keeps points strictly farther than ground_threshold from the plane.
PointCloudFrame remove_ground_points(const PointCloudFrame& frame, const PlaneModel& plane,
                                     double ground_threshold);

/// Index form of remove_ground_points; indices refer to frame.points.
std::vector<std::size_t> non_ground_indices(const PointCloudFrame& frame, const PlaneModel& plane,
                                            double ground_threshold);

/// Total least squares plane through the points (smallest principal direction
/// of the centered scatter). Requires at least three non-collinear points.
PlaneModel fit_plane_least_squares(const std::vector<Point3>& points);

}  // namespace eotrack
