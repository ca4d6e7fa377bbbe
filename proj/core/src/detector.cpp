#include "eotrack/detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numeric>
#include <unordered_map>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include "eotrack/error.hpp"

namespace eotrack {
namespace {

struct CellKey {
  std::int64_t x, y, z;
  bool operator==(const CellKey&) const = default;
};

struct CellHash {
  std::size_t operator()(const CellKey& k) const noexcept {
    std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9E3779B97F4A7C15ULL;
    h ^= static_cast<std::uint64_t>(k.y) * 0xC2B2AE3D27D4EB4FULL + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(k.z) * 0x165667B19E3779F9ULL + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

/// Uniform grid with cell edge eps; radius queries touch the 27 surrounding
/// cells. Points are stored cell by cell and each cell keeps its neighbor list.
class RadiusGrid {
 public:
  RadiusGrid(const std::vector<Point3>& pts, double eps) : eps2_(eps * eps) {
    const std::size_t n = pts.size();
    std::vector<CellKey> keys(n);
    for (std::size_t i = 0; i < n; ++i) {
      keys[i] = {static_cast<std::int64_t>(std::floor(pts[i].x() / eps)),
                 static_cast<std::int64_t>(std::floor(pts[i].y() / eps)),
                 static_cast<std::int64_t>(std::floor(pts[i].z() / eps))};
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const CellKey& ka = keys[a];
      const CellKey& kb = keys[b];
      if (ka.x != kb.x) return ka.x < kb.x;
      if (ka.y != kb.y) return ka.y < kb.y;
      if (ka.z != kb.z) return ka.z < kb.z;
      return a < b;
    });

    sorted_pts_.resize(n);
    sorted_idx_ = order;
    point_cell_.resize(n);
    std::unordered_map<CellKey, std::size_t, CellHash> cell_of;
    cell_of.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = order[k];
      sorted_pts_[k] = pts[i];
      if (k == 0 || !(keys[i] == keys[order[k - 1]])) {
        cell_of.emplace(keys[i], cell_begin_.size());
        cell_begin_.push_back(k);
      }
      point_cell_[i] = cell_begin_.size() - 1;
    }
    cell_begin_.push_back(n);

    const std::size_t n_cells = cell_begin_.size() - 1;
    neighbor_begin_.reserve(n_cells + 1);
    for (std::size_t c = 0; c < n_cells; ++c) {
      neighbor_begin_.push_back(neighbors_.size());
      const CellKey k = keys[order[cell_begin_[c]]];
      for (std::int64_t dx = -1; dx <= 1; ++dx) {
        for (std::int64_t dy = -1; dy <= 1; ++dy) {
          for (std::int64_t dz = -1; dz <= 1; ++dz) {
            const auto it = cell_of.find({k.x + dx, k.y + dy, k.z + dz});
            if (it != cell_of.end()) neighbors_.push_back(it->second);
          }
        }
      }
    }
    neighbor_begin_.push_back(neighbors_.size());
  }

  /// Calls fn(j) for every j with |p_j - p_i| <= eps until fn returns false.
  template <typename Fn>
  void for_each_neighbor(std::size_t i, Fn&& fn) const {
    const std::size_t cell = point_cell_[i];
    const Point3 p = sorted_pts_[position_of(i)];
    for (std::size_t a = neighbor_begin_[cell]; a < neighbor_begin_[cell + 1]; ++a) {
      const std::size_t c = neighbors_[a];
      for (std::size_t k = cell_begin_[c]; k < cell_begin_[c + 1]; ++k) {
        if ((sorted_pts_[k] - p).squaredNorm() <= eps2_) {
          if (!fn(sorted_idx_[k])) return;
        }
      }
    }
  }

 private:
  std::size_t position_of(std::size_t i) const {
    const std::size_t c = point_cell_[i];
    const auto first = sorted_idx_.begin() + static_cast<std::ptrdiff_t>(cell_begin_[c]);
    const auto last = sorted_idx_.begin() + static_cast<std::ptrdiff_t>(cell_begin_[c + 1]);
    return static_cast<std::size_t>(std::lower_bound(first, last, i) - sorted_idx_.begin());
  }

  double eps2_;
  std::vector<Point3> sorted_pts_;
  std::vector<std::size_t> sorted_idx_;
  std::vector<std::size_t> point_cell_;
  std::vector<std::size_t> cell_begin_;
  std::vector<std::size_t> neighbor_begin_;
  std::vector<std::size_t> neighbors_;
};

bool lex_less(const Point3& p, const Point3& q) {
  if (p.x() != q.x()) return p.x() < q.x();
  if (p.y() != q.y()) return p.y() < q.y();
  return p.z() < q.z();
}

void canonicalize_sign(Eigen::Ref<Eigen::Vector3d> v) {
  Eigen::Index idx = 0;
  v.cwiseAbs().maxCoeff(&idx);
  if (v(idx) < 0.0) v = -v;
}

}  // namespace

GeometricFeatures GeometricFeatures::from_edges(double e0, double e1, double e2) {
  std::array<double, 3> e{e0, e1, e2};
  std::sort(e.begin(), e.end(), std::greater<>());
  const double mean = (e[0] + e[1] + e[2]) / 3.0;
  const double var = ((e[0] - mean) * (e[0] - mean) + (e[1] - mean) * (e[1] - mean) +
                      (e[2] - mean) * (e[2] - mean)) /
                     3.0;
  return {{e[0], e[1], e[2], var, e[0] * e[1], e[0] * e[2], e[1] * e[2]}};
}

void validate(const OperationArea& a) {
  if (!(a.x_min < a.x_max && a.y_min < a.y_max && a.z_min < a.z_max)) {
    throw Error(ErrorKind::kInvalidArgument, "operation area needs min < max on every axis");
  }
}

void validate(const DbscanConfig& cfg) {
  if (!(cfg.eps > 0.0)) throw Error(ErrorKind::kInvalidArgument, "dbscan eps must be > 0");
  if (cfg.min_points < 1) throw Error(ErrorKind::kInvalidArgument, "dbscan min_points must be >= 1");
}

void validate(const DetectionConfig& cfg) {
  validate(cfg.area);
  validate(cfg.dbscan);
  if (!(cfg.ground_threshold > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "detection ground_threshold must be > 0");
  }
  if (!(cfg.cost_threshold > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "detection cost_threshold must be > 0");
  }
  for (double w : cfg.weights) {
    if (!(w >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "feature weights must be >= 0");
  }
}

PointCloudFrame crop_to_operation_area(const PointCloudFrame& frame, const OperationArea& area) {
  PointCloudFrame out{frame.timestamp, {}, frame.frame_id};
  for (const auto& p : frame.points) {
    if (area.contains(p)) out.points.push_back(p);
  }
  return out;
}

std::vector<Cluster> dbscan(const PointCloudFrame& frame, const DbscanConfig& cfg) {
  validate(cfg);
  const std::size_t n = frame.points.size();
  if (n == 0) return {};

  // Canonical order: canon[c] is the original index of the c-th smallest point.
  std::vector<std::size_t> canon(n);
  std::iota(canon.begin(), canon.end(), std::size_t{0});
  std::stable_sort(canon.begin(), canon.end(), [&](std::size_t a, std::size_t b) {
    return lex_less(frame.points[a], frame.points[b]);
  });
  std::vector<Point3> pts(n);
  for (std::size_t c = 0; c < n; ++c) pts[c] = frame.points[canon[c]];

  const RadiusGrid grid(pts, cfg.eps);
  const auto min_pts = static_cast<std::size_t>(cfg.min_points);
  std::vector<char> core(n, 0);
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t count = 0;
    grid.for_each_neighbor(c, [&](std::size_t) { return ++count < min_pts; });
    core[c] = count >= min_pts;
  }

  constexpr int kUnassigned = -1;
  std::vector<int> label(n, kUnassigned);
  int next_label = 0;
  std::deque<std::size_t> queue;
  for (std::size_t c = 0; c < n; ++c) {
    if (!core[c] || label[c] != kUnassigned) continue;
    const int id = next_label++;
    label[c] = id;
    queue.push_back(c);
    while (!queue.empty()) {
      const std::size_t q = queue.front();
      queue.pop_front();
      grid.for_each_neighbor(q, [&](std::size_t j) {
        if (label[j] == kUnassigned) {
          label[j] = id;
          if (core[j]) queue.push_back(j);
        }
        return true;
      });
    }
  }

  std::vector<Cluster> clusters(static_cast<std::size_t>(next_label));
  for (std::size_t c = 0; c < n; ++c) {
    if (label[c] != kUnassigned) clusters[static_cast<std::size_t>(label[c])].members.push_back(canon[c]);
  }
  for (auto& cl : clusters) std::sort(cl.members.begin(), cl.members.end());
  return clusters;
}

OrientedBoundingBox pca_bounding_box(const std::vector<Point3>& points) {
  OrientedBoundingBox box;
  const std::size_t n = points.size();
  if (n == 0) {
    box.degenerate = true;
    return box;
  }
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : points) mean += p;
  mean /= static_cast<double>(n);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points) {
    const Eigen::Vector3d c = p - mean;
    cov.noalias() += c * c.transpose();
  }
  cov /= static_cast<double>(n);

  box.center = mean;
  if (n < 3) box.degenerate = true;
  if (!(cov.trace() > 1e-24)) {
    box.degenerate = true;
    return box;
  }

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  // Eigen returns ascending eigenvalues; principal axis first.
  Eigen::Matrix3d axes = eig.eigenvectors().rowwise().reverse();

  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = -lo;
  for (const auto& p : points) {
    const Eigen::Vector3d proj = axes.transpose() * (p - mean);
    lo = lo.cwiseMin(proj);
    hi = hi.cwiseMax(proj);
  }
  const Eigen::Vector3d half = 0.5 * (hi - lo);
  box.center = mean + axes * (0.5 * (hi + lo));

  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return half(a) > half(b); });
  for (int i = 0; i < 3; ++i) {
    box.axes.col(i) = axes.col(order[i]);
    box.half_extents(i) = half(order[i]);
  }
  canonicalize_sign(box.axes.col(0));
  canonicalize_sign(box.axes.col(1));
  box.axes.col(2) = box.axes.col(0).cross(box.axes.col(1)).normalized();
  return box;
}

OrientedBoundingBox pca_bounding_box(const PointCloudFrame& frame, const Cluster& cluster) {
  std::vector<Point3> pts;
  pts.reserve(cluster.members.size());
  for (std::size_t i : cluster.members) {
    if (i >= frame.points.size()) {
      throw Error(ErrorKind::kInvalidArgument, "cluster index out of range");
    }
    pts.push_back(frame.points[i]);
  }
  return pca_bounding_box(pts);
}

GeometricFeatures extract_features(const OrientedBoundingBox& bbox) {
  return GeometricFeatures::from_edges(2.0 * bbox.half_extents(0), 2.0 * bbox.half_extents(1),
                                       2.0 * bbox.half_extents(2));
}

double detection_cost(const GeometricFeatures& box, const GeometricFeatures& prior,
                      const FeatureWeights& weights) {
  double j = 0.0;
  for (std::size_t i = 0; i < 7; ++i) j += weights[i] * std::abs(box[i] - prior[i]);
  return j;
}

FrameAnalysis analyze_frame(const PointCloudFrame& frame, const PlaneModel& plane,
                            const DetectionConfig& cfg) {
  validate(cfg);
  FrameAnalysis report;
  report.input_points = frame.points.size();

  std::vector<std::size_t> kept;
  kept.reserve(frame.points.size());
  for (std::size_t i = 0; i < frame.points.size(); ++i) {
    if (cfg.area.contains(frame.points[i])) kept.push_back(i);
  }
  report.cropped_points = kept.size();

  PointCloudFrame work{frame.timestamp, {}, frame.frame_id};
  std::vector<std::size_t> origin;
  for (std::size_t i : kept) {
    if (point_plane_distance(frame.points[i], plane) > cfg.ground_threshold) {
      work.points.push_back(frame.points[i]);
      origin.push_back(i);
    }
  }
  report.non_ground_points = work.points.size();

  for (auto& cluster : dbscan(work, cfg.dbscan)) {
    Candidate cand;
    cand.bbox = pca_bounding_box(work, cluster);
    cand.features = extract_features(cand.bbox);
    cand.cost = detection_cost(cand.features, cfg.prior_features, cfg.weights);
    for (auto& m : cluster.members) m = origin[m];
    cand.cluster = std::move(cluster);
    report.candidates.push_back(std::move(cand));
  }

  for (std::size_t k = 0; k < report.candidates.size(); ++k) {
    const auto& c = report.candidates[k];
    if (!(c.cost <= cfg.cost_threshold)) continue;
    if (!report.selected) {
      report.selected = k;
      continue;
    }
    const auto& best = report.candidates[*report.selected];
    if (c.cost < best.cost ||
        (c.cost == best.cost && c.cluster.members.size() > best.cluster.members.size())) {
      report.selected = k;
    }
  }
  return report;
}

std::optional<Detection> detect_target(const PointCloudFrame& frame, const PlaneModel& plane,
                                       const DetectionConfig& cfg) {
  FrameAnalysis report = analyze_frame(frame, plane, cfg);
  if (!report.selected) return std::nullopt;
  Candidate& best = report.candidates[*report.selected];
  Detection det;
  det.points = {frame.timestamp, {}, frame.frame_id};
  det.points.points.reserve(best.cluster.members.size());
  for (std::size_t i : best.cluster.members) det.points.points.push_back(frame.points[i]);
  det.indices = std::move(best.cluster.members);
  det.cost = best.cost;
  det.bbox = best.bbox;
  det.features = best.features;
  return det;
}

}  // namespace eotrack
