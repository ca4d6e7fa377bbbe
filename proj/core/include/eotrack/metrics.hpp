#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "eotrack/gp_extent.hpp"
#include "eotrack/ground_plane.hpp"
#include "eotrack/sim.hpp"
#include "eotrack/tracker.hpp"

namespace eotrack {

using Polygon = std::vector<Eigen::Vector2d>;

/// Signed shoelace area (positive for counter-clockwise vertex order).
double signed_area(const Polygon& poly);

/// Intersection-over-union of a simple polygon with a convex polygon.
/// Vertex order of either input does not matter.
double polygon_iou(const Polygon& subject, const Polygon& convex_clip);

/// Star-convex contour of a track state sampled at `samples` body angles.
Polygon contour_polygon(const TargetState& state, const GpExtentModel& gp, int samples = 360);

/// Extent values of an axis-aligned length x width rectangle at the test angles.
Eigen::VectorXd rectangle_radii(double length, double width, const std::vector<double>& angles);

/// IoU between a rectangle and the GP contour built from its exact radii at
/// the test angles: the best extent IoU the parameterization can reach.
double extent_iou_ceiling(double length, double width, const GpExtentModel& gp);

struct DetectionMetrics {
  std::size_t frames = 0;
  std::size_t detections = 0;
  std::size_t correct = 0;
  std::size_t false_picks = 0;
  double detection_rate = 0.0;
  double false_pick_rate = 0.0;
};

/// Frame counts as correct when the selected points are at least
/// `purity` robot-labeled; any other selection is a false pick.
DetectionMetrics evaluate_detection(const std::vector<std::optional<std::vector<std::size_t>>>& picks,
                                    const GroundTruth& truth, double purity = 0.8);

/// Ground truth re-expressed in the tracking plane.
struct PlanarTruth {
  Eigen::Vector2d center;
  double heading = 0.0;
  Eigen::Vector2d velocity;
  Polygon footprint;
};

PlanarTruth planar_truth(const GroundTruthFrame& frame, const GroundTruth& truth,
                         const TrackingFrame& tf);

struct TrackingMetrics {
  std::size_t frames_evaluated = 0;
  std::size_t burn_in = 0;
  double centroid_rmse = 0.0;
  double heading_rmse = 0.0;  // modulo pi
  double velocity_rmse = 0.0;
  double mean_iou = 0.0;
  double iou_ceiling = 0.0;
};

/// Compares track records with ground truth, skipping the first burn_in
/// frames and any frame where the track is not yet initialized.
TrackingMetrics evaluate_tracking(const std::vector<TrackRecord>& log, const GroundTruth& truth,
                                  const PlaneModel& plane, const GpExtentModel& gp,
                                  std::size_t burn_in = 5);

}  // namespace eotrack
