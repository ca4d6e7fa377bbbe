#include "eotrack/ground_plane.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include "eotrack/error.hpp"

namespace eotrack {
namespace {

bool lex_less(const Point3& p, const Point3& q) {
  if (p.x() != q.x()) return p.x() < q.x();
  if (p.y() != q.y()) return p.y() < q.y();
  return p.z() < q.z();
}

struct Scatter {
  Eigen::Vector3d mean;
  Eigen::Matrix3d cov;
};

template <typename Range>
Scatter scatter_of(const Range& points) {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  std::size_t n = 0;
  for (const Point3& p : points) {
    mean += p;
    ++n;
  }
  mean /= static_cast<double>(n);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const Point3& p : points) {
    const Eigen::Vector3d c = p - mean;
    cov.noalias() += c * c.transpose();
  }
  cov /= static_cast<double>(n);
  return {mean, cov};
}

std::size_t count_inliers(const std::vector<Point3>& pts, const PlaneModel& plane, double threshold) {
  const Eigen::Vector3d n = plane.normal();
  std::size_t count = 0;
  for (const auto& p : pts) {
    if (std::abs(n.dot(p) + plane.d) <= threshold) ++count;
  }
  return count;
}

}  // namespace

PlaneModel normalize_plane(double a, double b, double c, double d) {
  const double norm = std::sqrt(a * a + b * b + c * c);
  if (!(norm > 0.0) || !std::isfinite(norm) || !std::isfinite(d)) {
    throw Error(ErrorKind::kInvalidArgument, "plane normal must be finite and non-zero");
  }
  a /= norm;
  b /= norm;
  c /= norm;
  d /= norm;
  const bool flip = c < 0.0 || (c == 0.0 && (b < 0.0 || (b == 0.0 && a < 0.0)));
  if (flip) {
    a = -a;
    b = -b;
    c = -c;
    d = -d;
  }
  // Avoid negative zeros so that serialized planes are canonical.
  return {a + 0.0, b + 0.0, c + 0.0, d + 0.0};
}

PlaneModel normalize_plane(const std::array<double, 4>& m) {
  return normalize_plane(m[0], m[1], m[2], m[3]);
}

void validate(const RansacConfig& cfg) {
  if (!(cfg.inlier_threshold > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "ransac inlier_threshold must be > 0");
  }
  if (cfg.max_iterations < 1) {
    throw Error(ErrorKind::kInvalidArgument, "ransac max_iterations must be >= 1");
  }
  if (cfg.min_inliers < 3) {
    throw Error(ErrorKind::kInvalidArgument, "ransac min_inliers must be >= 3");
  }
}

double point_plane_distance(const Point3& p, const PlaneModel& plane) {
  return std::abs(plane.a * p.x() + plane.b * p.y() + plane.c * p.z() + plane.d);
}

PointCloudFrame preselect_near_plane(const PointCloudFrame& frame, const PlaneModel& prior,
                                     double max_distance) {
  if (!(max_distance > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "preselection distance must be > 0");
  }
  PointCloudFrame out{frame.timestamp, {}, frame.frame_id};
  for (const auto& p : frame.points) {
    if (point_plane_distance(p, prior) <= max_distance) out.points.push_back(p);
  }
  return out;
}

PlaneModel fit_plane_least_squares(const std::vector<Point3>& points) {
  if (points.size() < 3) throw Error(ErrorKind::kTooFewPoints, "plane fit needs >= 3 points");
  const Scatter s = scatter_of(points);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(s.cov);
  const Eigen::Vector3d ev = eig.eigenvalues();
  if (!(ev(1) > 1e-14 * std::max(ev(2), 1e-300))) {
    throw Error(ErrorKind::kDegenerate, "points are collinear");
  }
  const Eigen::Vector3d n = eig.eigenvectors().col(0);
  return normalize_plane(n.x(), n.y(), n.z(), -n.dot(s.mean));
}

RansacResult ransac_plane_detailed(const PointCloudFrame& frame, const RansacConfig& cfg) {
  validate(cfg);
  if (frame.points.size() < 3) {
    throw Error(ErrorKind::kTooFewPoints,
                "ransac needs >= 3 points, got " + std::to_string(frame.points.size()));
  }
  std::vector<Point3> pts = frame.points;
  std::sort(pts.begin(), pts.end(), lex_less);

  const Scatter all = scatter_of(pts);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(all.cov, Eigen::EigenvaluesOnly);
  const Eigen::Vector3d ev = eig.eigenvalues();
  if (!(ev(1) > 1e-14 * std::max(ev(2), 1e-300))) {
    throw Error(ErrorKind::kDegenerate, "all points are collinear");
  }
  const double scale = std::sqrt(std::max(ev(2), 1e-300));

  std::mt19937_64 rng(cfg.seed);
  const std::size_t n = pts.size();
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);

  PlaneModel best_plane;
  std::size_t best_support = 0;
  bool have_hypothesis = false;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    std::size_t i = pick(rng);
    std::size_t j = pick(rng);
    std::size_t k = pick(rng);
    while (j == i) j = pick(rng);
    while (k == i || k == j) k = pick(rng);
    const Eigen::Vector3d normal = (pts[j] - pts[i]).cross(pts[k] - pts[i]);
    if (normal.norm() <= 1e-12 * scale * scale) continue;
    const PlaneModel hyp =
        normalize_plane(normal.x(), normal.y(), normal.z(), -normal.dot(pts[i]));
    const std::size_t support = count_inliers(pts, hyp, cfg.inlier_threshold);
    if (!have_hypothesis || support > best_support) {
      best_plane = hyp;
      best_support = support;
      have_hypothesis = true;
    }
  }
  if (!have_hypothesis) {
    throw Error(ErrorKind::kDegenerate, "every sampled triple was collinear");
  }
  if (best_support < static_cast<std::size_t>(cfg.min_inliers)) {
    throw Error(ErrorKind::kInsufficientInliers,
                "best plane has " + std::to_string(best_support) + " inliers, need " +
                    std::to_string(cfg.min_inliers));
  }

  std::vector<Point3> inliers;
  inliers.reserve(best_support);
  const Eigen::Vector3d bn = best_plane.normal();
  for (const auto& p : pts) {
    if (std::abs(bn.dot(p) + best_plane.d) <= cfg.inlier_threshold) inliers.push_back(p);
  }
  RansacResult result{best_plane, best_support, best_support};
  try {
    const PlaneModel refined = fit_plane_least_squares(inliers);
    const std::size_t refined_support = count_inliers(pts, refined, cfg.inlier_threshold);
    // The refit must not lose support relative to the winning hypothesis.
    if (refined_support >= best_support) {
      result.plane = refined;
      result.inliers = refined_support;
    }
  } catch (const Error&) {
    // Collinear inlier set: keep the raw hypothesis.
  }
  return result;
}

PlaneModel ransac_plane(const PointCloudFrame& points, const RansacConfig& cfg) {
  return ransac_plane_detailed(points, cfg).plane;
}

std::vector<std::size_t> non_ground_indices(const PointCloudFrame& frame, const PlaneModel& plane,
                                            double ground_threshold) {
  if (!(ground_threshold > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "ground threshold must be > 0");
  }
  std::vector<std::size_t> keep;
  keep.reserve(frame.points.size());
  for (std::size_t i = 0; i < frame.points.size(); ++i) {
    if (point_plane_distance(frame.points[i], plane) > ground_threshold) keep.push_back(i);
  }
  return keep;
}

PointCloudFrame remove_ground_points(const PointCloudFrame& frame, const PlaneModel& plane,
                                     double ground_threshold) {
  PointCloudFrame out{frame.timestamp, {}, frame.frame_id};
  for (std::size_t i : non_ground_indices(frame, plane, ground_threshold)) {
    out.points.push_back(frame.points[i]);
  }
  return out;
}

}  // namespace eotrack
