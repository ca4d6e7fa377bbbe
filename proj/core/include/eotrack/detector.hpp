#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "eotrack/ground_plane.hpp"
#include "eotrack/pointcloud_io.hpp"

namespace eotrack {

/// Axis-aligned crop box in the sensor frame, bounds inclusive.
struct OperationArea {
  double x_min = -4.0, x_max = 4.0;
  double y_min = 0.0, y_max = 2.7;
  double z_min = -4.0, z_max = 2.0;

  bool contains(const Point3& p) const noexcept {
    return p.x() >= x_min && p.x() <= x_max && p.y() >= y_min && p.y() <= y_max &&
           p.z() >= z_min && p.z() <= z_max;
  }
};

inline constexpr OperationArea kLidarOperationArea{-4.0, 4.0, 0.0, 2.7, -4.0, 2.0};
inline constexpr OperationArea kCameraOperationArea{-4.0, 4.0, -2.0, 1.0, 0.0, 2.5};

struct DbscanConfig {
  double eps = 0.03;    // meters
  int min_points = 30;  // neighbors within eps, the point itself included
};

/// Member indices (ascending) into the clustered frame's point list.
struct Cluster {
  std::vector<std::size_t> members;
};

struct OrientedBoundingBox {
  Point3 center = Point3::Zero();
  /// Columns are orthonormal box axes, right-handed, ordered with half_extents.
  Eigen::Matrix3d axes = Eigen::Matrix3d::Identity();
  /// Sorted descending.
  Eigen::Vector3d half_extents = Eigen::Vector3d::Zero();
  /// Set when the cluster had fewer than three points or no spread at all.
  bool degenerate = false;
};

/// [l1, l2, l3, var, a1, a2, a3]: edges sorted descending, population variance
/// of the edges, face areas l1*l2, l1*l3, l2*l3.
struct GeometricFeatures {
  std::array<double, 7> values{};

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  static GeometricFeatures from_edges(double e0, double e1, double e2);
};

using FeatureWeights = std::array<double, 7>;

inline const GeometricFeatures kTurtlebotFeaturePrior{{0.39, 0.33, 0.21, 0.005, 0.13, 0.08, 0.07}};
inline constexpr FeatureWeights kDefaultFeatureWeights{0.5, 0.5, 0.5, 100.0, 2.0, 1.0, 1.0};

struct DetectionConfig {
  OperationArea area = kLidarOperationArea;
  double ground_threshold = 0.02;  // gamma_2, meters
  DbscanConfig dbscan;
  GeometricFeatures prior_features = kTurtlebotFeaturePrior;
  FeatureWeights weights = kDefaultFeatureWeights;
  double cost_threshold = 1.0;  // gamma_3
};

void validate(const OperationArea& area);
void validate(const DbscanConfig& cfg);
void validate(const DetectionConfig& cfg);

PointCloudFrame crop_to_operation_area(const PointCloudFrame& frame, const OperationArea& area);

/// Clusters in creation order. Points are visited in lexicographic (x, y, z)
/// order, so a border point reachable from two clusters joins the one whose
/// lowest core point comes first in that order. Noise is dropped.
std::vector<Cluster> dbscan(const PointCloudFrame& frame, const DbscanConfig& cfg);

/// PCA box: axes are eigenvectors of the centered covariance, extents come
/// from the min/max projections onto each axis.
OrientedBoundingBox pca_bounding_box(const PointCloudFrame& frame, const Cluster& cluster);
OrientedBoundingBox pca_bounding_box(const std::vector<Point3>& points);

GeometricFeatures extract_features(const OrientedBoundingBox& bbox);

/// Weighted L1 distance between feature vectors.
double detection_cost(const GeometricFeatures& box, const GeometricFeatures& prior,
                      const FeatureWeights& weights);

struct Candidate {
  Cluster cluster;  // indices into the input frame
  OrientedBoundingBox bbox;
  GeometricFeatures features;
  double cost = 0.0;
};

struct Detection {
  PointCloudFrame points;
  std::vector<std::size_t> indices;  // into the input frame
  double cost = 0.0;
  OrientedBoundingBox bbox;
  GeometricFeatures features;
};

/// Everything the detection stage computed for one frame.
struct FrameAnalysis {
  std::size_t input_points = 0;
  std::size_t cropped_points = 0;
  std::size_t non_ground_points = 0;
  std::vector<Candidate> candidates;
  std::optional<std::size_t> selected;  // index into candidates
};

FrameAnalysis analyze_frame(const PointCloudFrame& frame, const PlaneModel& plane,
                            const DetectionConfig& cfg);

/// Crop, ground removal, clustering and feature matching. Returns the
/// cheapest cluster with cost <= cost_threshold; ties go to the larger
/// cluster, then the lower cluster index.
std::optional<Detection> detect_target(const PointCloudFrame& frame, const PlaneModel& plane,
                                       const DetectionConfig& cfg);

}  // namespace eotrack
