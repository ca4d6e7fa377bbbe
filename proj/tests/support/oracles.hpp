#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. They favour obviousness over speed.

#include <cstddef>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "eotrack/detector.hpp"
#include "eotrack/gp_extent.hpp"
#include "eotrack/metrics.hpp"
#include "eotrack/tracker.hpp"

namespace oracle {

/// Density-connected components by O(n^2) union-find over core points.
/// Border points attach to the adjacent component whose lexicographically
/// smallest core point is smallest; components are returned in that order.
std::vector<std::vector<std::size_t>> dbscan(const std::vector<eotrack::Point3>& points, double eps,
                                             std::size_t min_points);

/// Number of distinct floor(p / cell) triples.
std::size_t occupied_voxels(const std::vector<eotrack::Point3>& points, double cell);

/// IoU of two polygons by sampling cell centers of a `res` grid over the
/// union of their bounding boxes with an even-odd inside test.
double raster_iou(const eotrack::Polygon& a, const eotrack::Polygon& b, double res);

struct KalmanPosterior {
  Eigen::VectorXd x;
  Eigen::MatrixXd p;
};

/// Textbook linear update with R = r * I.
KalmanPosterior kalman_update(const Eigen::VectorXd& x, const Eigen::MatrixXd& p,
                              const Eigen::MatrixXd& h, const Eigen::VectorXd& z, double r);

/// Central differences of contour_point(state, phi) with respect to the state.
Eigen::MatrixXd contour_jacobian_fd(const eotrack::TargetState& state, double phi,
                                    const eotrack::GpExtentModel& gp, double step);

/// max |a - b| / max |b|.
double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Random symmetric positive definite matrix with eigenvalues in [lo, hi].
Eigen::MatrixXd random_spd(Eigen::Index n, double lo, double hi, std::mt19937_64& rng);

/// Random tracker state with extent values in [r_lo, r_hi].
eotrack::TargetState random_state(int n_extent, double r_lo, double r_hi, std::mt19937_64& rng);

}  // namespace oracle
