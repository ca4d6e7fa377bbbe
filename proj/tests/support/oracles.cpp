#include "oracles.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>
#include <tuple>

#include <Eigen/Dense>

namespace oracle {
namespace {

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

std::vector<std::vector<std::size_t>> dbscan(const std::vector<eotrack::Point3>& points, double eps,
                                             std::size_t min_points) {
  const std::size_t n = points.size();
  // rank[i]: position of point i in (x, y, z, index) order.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& p = points[a];
    const auto& q = points[b];
    return std::tie(p.x(), p.y(), p.z()) < std::tie(q.x(), q.y(), q.z());
  });
  std::vector<std::size_t> rank(n);
  for (std::size_t r = 0; r < n; ++r) rank[order[r]] = r;

  const double eps2 = eps * eps;
  std::vector<std::vector<std::size_t>> nbrs(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if ((points[i] - points[j]).squaredNorm() <= eps2) nbrs[i].push_back(j);
    }
  }
  std::vector<bool> core(n);
  for (std::size_t i = 0; i < n; ++i) core[i] = nbrs[i].size() >= min_points;

  // Union by rank position so every root is the smallest-ranked core point.
  UnionFind uf(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i]) continue;
    for (std::size_t j : nbrs[i]) {
      if (core[j]) uf.unite(rank[i], rank[j]);
    }
  }

  std::vector<std::size_t> root_of(n, std::numeric_limits<std::size_t>::max());
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) {
      root_of[i] = uf.find(rank[i]);
      continue;
    }
    for (std::size_t j : nbrs[i]) {
      if (core[j]) root_of[i] = std::min(root_of[i], uf.find(rank[j]));
    }
  }

  std::vector<std::size_t> roots;
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) roots.push_back(root_of[i]);
  }
  std::sort(roots.begin(), roots.end());
  roots.erase(std::unique(roots.begin(), roots.end()), roots.end());
  std::vector<std::vector<std::size_t>> clusters(roots.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (root_of[i] == std::numeric_limits<std::size_t>::max()) continue;
    const auto slot = std::lower_bound(roots.begin(), roots.end(), root_of[i]) - roots.begin();
    clusters[static_cast<std::size_t>(slot)].push_back(i);
  }
  return clusters;
}

std::size_t occupied_voxels(const std::vector<eotrack::Point3>& points, double cell) {
  std::set<std::tuple<long, long, long>> cells;
  for (const auto& p : points) {
    cells.emplace(static_cast<long>(std::floor(p.x() / cell)), static_cast<long>(std::floor(p.y() / cell)),
                  static_cast<long>(std::floor(p.z() / cell)));
  }
  return cells.size();
}

namespace {

bool inside(const eotrack::Polygon& poly, double x, double y) {
  bool in = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const auto& a = poly[i];
    const auto& b = poly[j];
    if ((a.y() > y) != (b.y() > y) && x < (b.x() - a.x()) * (y - a.y()) / (b.y() - a.y()) + a.x()) {
      in = !in;
    }
  }
  return in;
}

}  // namespace

double raster_iou(const eotrack::Polygon& a, const eotrack::Polygon& b, double res) {
  double x0 = std::numeric_limits<double>::infinity();
  double y0 = x0;
  double x1 = -x0;
  double y1 = -x0;
  for (const auto* poly : {&a, &b}) {
    for (const auto& v : *poly) {
      x0 = std::min(x0, v.x());
      y0 = std::min(y0, v.y());
      x1 = std::max(x1, v.x());
      y1 = std::max(y1, v.y());
    }
  }
  std::size_t both = 0;
  std::size_t either = 0;
  for (double y = y0 + 0.5 * res; y < y1; y += res) {
    for (double x = x0 + 0.5 * res; x < x1; x += res) {
      const bool ia = inside(a, x, y);
      const bool ib = inside(b, x, y);
      both += ia && ib;
      either += ia || ib;
    }
  }
  return either == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(either);
}

KalmanPosterior kalman_update(const Eigen::VectorXd& x, const Eigen::MatrixXd& p,
                              const Eigen::MatrixXd& h, const Eigen::VectorXd& z, double r) {
  const Eigen::MatrixXd s = h * p * h.transpose() + r * Eigen::MatrixXd::Identity(h.rows(), h.rows());
  const Eigen::MatrixXd k = p * h.transpose() * s.inverse();
  KalmanPosterior out;
  out.x = x + k * (z - h * x);
  out.p = (Eigen::MatrixXd::Identity(x.size(), x.size()) - k * h) * p;
  return out;
}

Eigen::MatrixXd contour_jacobian_fd(const eotrack::TargetState& state, double phi,
                                    const eotrack::GpExtentModel& gp, double step) {
  const Eigen::Index n = state.vec.size();
  Eigen::MatrixXd jac(2, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    eotrack::TargetState plus = state;
    eotrack::TargetState minus = state;
    plus.vec(k) += step;
    minus.vec(k) -= step;
    jac.col(k) = (eotrack::contour_point(plus, phi, gp) - eotrack::contour_point(minus, phi, gp)) /
                 (2.0 * step);
  }
  return jac;
}

double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double scale = b.cwiseAbs().maxCoeff();
  return (a - b).cwiseAbs().maxCoeff() / (scale > 0.0 ? scale : 1.0);
}

Eigen::MatrixXd random_spd(Eigen::Index n, double lo, double hi, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> eig(lo, hi);
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = gauss(rng);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  const Eigen::MatrixXd q = qr.householderQ();
  Eigen::VectorXd d(n);
  for (Eigen::Index i = 0; i < n; ++i) d(i) = eig(rng);
  Eigen::MatrixXd out = q * d.asDiagonal() * q.transpose();
  return 0.5 * (out + out.transpose());
}

eotrack::TargetState random_state(int n_extent, double r_lo, double r_hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(-2.0, 2.0);
  std::uniform_real_distribution<double> ang(-3.0, 3.0);
  std::uniform_real_distribution<double> vel(-1.0, 1.0);
  std::uniform_real_distribution<double> rad(r_lo, r_hi);
  eotrack::TargetState s{Eigen::VectorXd(eotrack::state_index::kExtent + n_extent)};
  s.vec << pos(rng), pos(rng), ang(rng), vel(rng), vel(rng), vel(rng), Eigen::VectorXd::Zero(n_extent);
  for (int i = 0; i < n_extent; ++i) s.vec(eotrack::state_index::kExtent + i) = rad(rng);
  return s;
}

}  // namespace oracle
