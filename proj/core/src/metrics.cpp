#include "eotrack/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "eotrack/error.hpp"

namespace eotrack {
namespace {

Polygon ccw(Polygon p) {
  if (signed_area(p) < 0.0) std::reverse(p.begin(), p.end());
  return p;
}

double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

// Sutherland-Hodgman against one half-plane: keeps points left of a->b.
Polygon clip_edge(const Polygon& in, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  Polygon out;
  if (in.empty()) return out;
  const Eigen::Vector2d e = b - a;
  auto side = [&](const Eigen::Vector2d& p) { return cross2(e, p - a); };
  for (std::size_t i = 0; i < in.size(); ++i) {
    const Eigen::Vector2d& cur = in[i];
    const Eigen::Vector2d& prev = in[(i + in.size() - 1) % in.size()];
    const double sc = side(cur);
    const double sp = side(prev);
    if (sc >= 0.0) {
      if (sp < 0.0) out.push_back(prev + (cur - prev) * (sp / (sp - sc)));
      out.push_back(cur);
    } else if (sp >= 0.0) {
      out.push_back(prev + (cur - prev) * (sp / (sp - sc)));
    }
  }
  return out;
}

}  // namespace

double signed_area(const Polygon& poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    a += cross2(poly[i], poly[(i + 1) % poly.size()]);
  }
  return 0.5 * a;
}

double polygon_iou(const Polygon& subject, const Polygon& convex_clip) {
  const Polygon s = ccw(subject);
  const Polygon c = ccw(convex_clip);
  Polygon inter = s;
  for (std::size_t i = 0; i < c.size() && !inter.empty(); ++i) {
    inter = clip_edge(inter, c[i], c[(i + 1) % c.size()]);
  }
  const double ai = inter.size() >= 3 ? std::abs(signed_area(inter)) : 0.0;
  const double as = std::abs(signed_area(s));
  const double ac = std::abs(signed_area(c));
  const double uni = as + ac - ai;
  return uni > 0.0 ? ai / uni : 0.0;
}

Polygon contour_polygon(const TargetState& state, const GpExtentModel& gp, int samples) {
  Polygon poly;
  poly.reserve(static_cast<std::size_t>(samples));
  const Eigen::VectorXd extent = state.extent();
  for (int i = 0; i < samples; ++i) {
    const double theta = 2.0 * std::numbers::pi * i / samples;
    const double r = gp.radius(theta, extent);
    const double phi = theta + state.heading();
    poly.push_back(state.position() + r * Eigen::Vector2d(std::cos(phi), std::sin(phi)));
  }
  return poly;
}

Eigen::VectorXd rectangle_radii(double length, double width, const std::vector<double>& angles) {
  Eigen::VectorXd r(static_cast<Eigen::Index>(angles.size()));
  const double hl = 0.5 * length;
  const double hw = 0.5 * width;
  for (std::size_t i = 0; i < angles.size(); ++i) {
    const double c = std::abs(std::cos(angles[i]));
    const double s = std::abs(std::sin(angles[i]));
    const double rx = c > 1e-15 ? hl / c : std::numeric_limits<double>::infinity();
    const double ry = s > 1e-15 ? hw / s : std::numeric_limits<double>::infinity();
    r(static_cast<Eigen::Index>(i)) = std::min(rx, ry);
  }
  return r;
}

double extent_iou_ceiling(double length, double width, const GpExtentModel& gp) {
  TargetState s{Eigen::VectorXd::Zero(state_index::kExtent + gp.size())};
  s.vec.tail(gp.size()) = rectangle_radii(length, width, gp.angles());
  const auto rect = footprint_corners({0.0, 0.0, 0.0}, length, width);
  return polygon_iou(contour_polygon(s, gp), Polygon(rect.begin(), rect.end()));
}

DetectionMetrics evaluate_detection(const std::vector<std::optional<std::vector<std::size_t>>>& picks,
                                    const GroundTruth& truth, double purity) {
  if (picks.size() != truth.frames.size()) {
    throw Error(ErrorKind::kInvalidArgument, "detections and ground truth differ in frame count");
  }
  DetectionMetrics m;
  m.frames = picks.size();
  for (std::size_t k = 0; k < picks.size(); ++k) {
    if (!picks[k]) continue;
    ++m.detections;
    const auto& labels = truth.frames[k].labels;
    std::size_t robot = 0;
    for (std::size_t i : *picks[k]) {
      if (i >= labels.size()) throw Error(ErrorKind::kInvalidArgument, "detection index out of range");
      if (labels[i] == PointLabel::kRobot) ++robot;
    }
    const bool ok = !picks[k]->empty() &&
                    static_cast<double>(robot) >= purity * static_cast<double>(picks[k]->size());
    if (ok) {
      ++m.correct;
    } else {
      ++m.false_picks;
    }
  }
  if (m.frames > 0) {
    m.detection_rate = static_cast<double>(m.correct) / static_cast<double>(m.frames);
    m.false_pick_rate = static_cast<double>(m.false_picks) / static_cast<double>(m.frames);
  }
  return m;
}

PlanarTruth planar_truth(const GroundTruthFrame& f, const GroundTruth& truth, const TrackingFrame& tf) {
  const SensorProfile& prof = truth.profile;
  PlanarTruth out;
  out.center = tf.to_plane(prof.to_sensor({f.pose.x, f.pose.y, 0.0}));
  const Eigen::Vector2d h = tf.direction_to_plane(
      prof.direction_to_sensor({std::cos(f.pose.psi), std::sin(f.pose.psi), 0.0}));
  out.heading = std::atan2(h.y(), h.x());
  out.velocity = tf.direction_to_plane(prof.direction_to_sensor({f.velocity.x(), f.velocity.y(), 0.0}));
  for (const auto& c : f.footprint) out.footprint.push_back(tf.to_plane(prof.to_sensor({c.x(), c.y(), 0.0})));
  return out;
}

TrackingMetrics evaluate_tracking(const std::vector<TrackRecord>& log, const GroundTruth& truth,
                                  const PlaneModel& plane, const GpExtentModel& gp,
                                  std::size_t burn_in) {
  if (log.size() != truth.frames.size()) {
    throw Error(ErrorKind::kInvalidArgument, "track log and ground truth differ in frame count");
  }
  const TrackingFrame tf = tracking_frame(plane);
  TrackingMetrics m;
  m.burn_in = burn_in;
  m.iou_ceiling = extent_iou_ceiling(truth.robot_dims.x(), truth.robot_dims.y(), gp);
  double se_pos = 0.0, se_head = 0.0, se_vel = 0.0, iou_sum = 0.0;
  for (std::size_t k = burn_in; k < log.size(); ++k) {
    const TrackRecord& rec = log[k];
    if (!rec.initialized) continue;
    const PlanarTruth gt = planar_truth(truth.frames[k], truth, tf);
    se_pos += (rec.state.position() - gt.center).squaredNorm();
    se_vel += (rec.state.velocity() - gt.velocity).squaredNorm();
    // Heading error folded into [-pi/2, pi/2]: a rectangle looks the same
    // after a half turn.
    double dh = wrap_angle(rec.state.heading() - gt.heading);
    if (dh > std::numbers::pi / 2.0) dh -= std::numbers::pi;
    if (dh < -std::numbers::pi / 2.0) dh += std::numbers::pi;
    se_head += dh * dh;
    iou_sum += polygon_iou(contour_polygon(rec.state, gp), gt.footprint);
    ++m.frames_evaluated;
  }
  if (m.frames_evaluated > 0) {
    const double n = static_cast<double>(m.frames_evaluated);
    m.centroid_rmse = std::sqrt(se_pos / n);
    m.heading_rmse = std::sqrt(se_head / n);
    m.velocity_rmse = std::sqrt(se_vel / n);
    m.mean_iou = iou_sum / n;
  }
  return m;
}

}  // namespace eotrack
