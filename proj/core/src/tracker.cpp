#include "eotrack/tracker.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>
#include <Eigen/LU>

#include "eotrack/error.hpp"

namespace eotrack {

namespace si = state_index;

Point2 TrackingFrame::to_plane(const Point3& p) const {
  const Eigen::Vector3d rel = p - origin;
  return {rel.dot(u), rel.dot(v)};
}

Eigen::Vector2d TrackingFrame::direction_to_plane(const Eigen::Vector3d& d) const {
  return {d.dot(u), d.dot(v)};
}

TrackingFrame tracking_frame(const PlaneModel& plane) {
  const Eigen::Vector3d n = plane.normal().normalized();
  Eigen::Index axis = 0;
  n.cwiseAbs().minCoeff(&axis);
  const Eigen::Vector3d e = Eigen::Vector3d::Unit(axis);
  const Eigen::Vector3d u = (e - n.dot(e) * n).normalized();
  const Eigen::Vector3d v = n.cross(u);
  return {-plane.d * n, u, v, n};
}

MeasurementSet project_to_tracking_plane(const PointCloudFrame& points, const PlaneModel& plane) {
  const TrackingFrame tf = tracking_frame(plane);
  MeasurementSet out;
  out.reserve(points.points.size());
  for (const auto& p : points.points) out.push_back(tf.to_plane(p));
  return out;
}

void validate(const MotionConfig& cfg) {
  if (!(cfg.sigma_c > 0.0 && cfg.sigma_meas > 0.0 && cfg.period > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "motion sigma_c, sigma_meas and period must be > 0");
  }
}

std::pair<TargetState, StateCovariance> initialize_state(double length, double width,
                                                         const Point2& start, const GpConfig& gp,
                                                         const InitialUncertainty& unc) {
  if (!(length > 0.0 && width > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "prior dimensions must be positive");
  }
  validate(gp);
  const auto angles = gp.test_angles();
  const auto n_ext = static_cast<Eigen::Index>(angles.size());
  TargetState state{Eigen::VectorXd::Zero(si::kExtent + n_ext)};
  state.vec.segment<2>(si::kX) = start;
  const double a = 0.5 * length;
  const double b = 0.5 * width;
  for (Eigen::Index i = 0; i < n_ext; ++i) {
    const double th = angles[static_cast<std::size_t>(i)];
    const double bc = b * std::cos(th);
    const double as = a * std::sin(th);
    state.vec(si::kExtent + i) = a * b / std::sqrt(bc * bc + as * as);
  }

  StateCovariance cov = StateCovariance::Zero(state.vec.size(), state.vec.size());
  const double p2 = unc.position_std * unc.position_std;
  const double v2 = unc.velocity_std * unc.velocity_std;
  cov(si::kX, si::kX) = p2;
  cov(si::kY, si::kY) = p2;
  cov(si::kPsi, si::kPsi) = unc.heading_std * unc.heading_std;
  cov(si::kVx, si::kVx) = v2;
  cov(si::kVy, si::kVy) = v2;
  cov(si::kOmega, si::kOmega) = unc.turn_rate_std * unc.turn_rate_std;
  cov.bottomRightCorner(n_ext, n_ext) = gp_gram_matrix(gp);
  return {state, cov};
}

void project_covariance(StateCovariance& cov, FilterHealth* health) {
  StateCovariance sym = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorKind::kNumerical, "covariance eigen-decomposition failed");
  }
  const double min_ev = eig.eigenvalues().minCoeff();
  if (min_ev < 0.0) {
    const Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(0.0);
    sym = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
    sym = (0.5 * (sym + sym.transpose())).eval();
  }
  if (health != nullptr) {
    ++health->covariance_checks;
    health->min_eigenvalue = std::min(health->min_eigenvalue, min_ev);
    if (min_ev < -1e-9) ++health->psd_violations;
    if ((sym - sym.transpose()).cwiseAbs().maxCoeff() > 1e-12) ++health->symmetry_violations;
  }
  if (!sym.allFinite()) throw Error(ErrorKind::kNumerical, "covariance became non-finite");
  cov = std::move(sym);
}

std::pair<TargetState, StateCovariance> predict(const TargetState& state, const StateCovariance& cov,
                                                double dt, const MotionConfig& motion,
                                                const GpExtentModel& gp, FilterHealth* health) {
  if (!(dt > 0.0)) throw Error(ErrorKind::kInvalidArgument, "prediction step must be > 0");
  const Eigen::Index n = state.vec.size();
  const Eigen::Index n_ext = state.extent_size();
  if (n_ext != gp.size() || cov.rows() != n || cov.cols() != n) {
    throw Error(ErrorKind::kInvalidArgument, "state/covariance/extent dimensions disagree");
  }

  TargetState out = state;
  out.vec(si::kX) += dt * state.vec(si::kVx);
  out.vec(si::kY) += dt * state.vec(si::kVy);
  out.vec(si::kPsi) = wrap_angle(state.vec(si::kPsi) + dt * state.vec(si::kOmega));

  Eigen::Matrix<double, 6, 6> f = Eigen::Matrix<double, 6, 6>::Identity();
  f(si::kX, si::kVx) = dt;
  f(si::kY, si::kVy) = dt;
  f(si::kPsi, si::kOmega) = dt;

  const double q = motion.sigma_c * motion.sigma_c;
  const double q11 = q * dt * dt * dt / 3.0;
  const double q12 = q * dt * dt / 2.0;
  const double q22 = q * dt;
  Eigen::Matrix<double, 6, 6> qk = Eigen::Matrix<double, 6, 6>::Zero();
  for (Eigen::Index axis = 0; axis < 3; ++axis) {
    const Eigen::Index p = si::kX + axis;
    const Eigen::Index v = si::kVx + axis;
    qk(p, p) = q11;
    qk(p, v) = q12;
    qk(v, p) = q12;
    qk(v, v) = q22;
  }

  const double eta = gp.config().forgetting;
  StateCovariance pc(n, n);
  pc.topLeftCorner<6, 6>() = f * cov.topLeftCorner<6, 6>() * f.transpose() + qk;
  pc.topRightCorner(6, n_ext) = (1.0 - eta) * (f * cov.topRightCorner(6, n_ext));
  pc.bottomLeftCorner(n_ext, 6) = pc.topRightCorner(6, n_ext).transpose();
  pc.bottomRightCorner(n_ext, n_ext) =
      (1.0 - eta) * cov.bottomRightCorner(n_ext, n_ext) + eta * gp.prior_gram();
  project_covariance(pc, health);
  return {out, pc};
}

MeasurementSet extract_contour_measurements(const MeasurementSet& meas, const Point2& center,
                                            int bins, double band) {
  if (bins < 4) throw Error(ErrorKind::kInvalidArgument, "contour extraction needs >= 4 bins");
  if (!(band >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "contour band must be >= 0");
  if (meas.empty()) return {};
  const auto nb = static_cast<std::size_t>(bins);
  std::vector<int> bin_of(meas.size());
  std::vector<double> radius(meas.size());
  std::vector<double> bin_max(nb, -1.0);
  for (std::size_t i = 0; i < meas.size(); ++i) {
    const Eigen::Vector2d d = meas[i] - center;
    const double phi = std::atan2(d.y(), d.x());
    auto b = static_cast<std::size_t>(std::floor((phi + std::numbers::pi) /
                                                 (2.0 * std::numbers::pi) * bins));
    b = std::min(b, nb - 1);
    bin_of[i] = static_cast<int>(b);
    radius[i] = d.norm();
    bin_max[b] = std::max(bin_max[b], radius[i]);
  }
  MeasurementSet out;
  for (std::size_t i = 0; i < meas.size(); ++i) {
    if (radius[i] >= bin_max[static_cast<std::size_t>(bin_of[i])] - band) out.push_back(meas[i]);
  }
  return out;
}

Point2 contour_point(const TargetState& state, double phi, const GpExtentModel& gp) {
  const double theta = wrap_angle(phi - state.heading());
  const double r = gp.regress(theta).weights.dot(state.vec.tail(state.extent_size()));
  return state.position() + r * Eigen::Vector2d(std::cos(phi), std::sin(phi));
}

std::optional<MeasurementPrediction> measurement_model(const TargetState& state, const Point2& z,
                                                       const GpExtentModel& gp,
                                                       bool full_angle_derivative) {
  const Eigen::Vector2d d = z - state.position();
  const double rho2 = d.squaredNorm();
  if (!(rho2 > 1e-18)) return std::nullopt;
  const double phi = std::atan2(d.y(), d.x());
  const double theta = wrap_angle(phi - state.heading());
  const GpRegression reg = gp.regress(theta);
  const auto extent = state.vec.tail(state.extent_size());
  const double r = reg.weights.dot(extent);
  const double dr = reg.weights_derivative.dot(extent);
  const Eigen::Vector2d u(std::cos(phi), std::sin(phi));
  const Eigen::Vector2d u_perp(-u.y(), u.x());

  MeasurementPrediction out;
  out.predicted = state.position() + r * u;
  out.jacobian = Eigen::Matrix<double, 2, Eigen::Dynamic>::Zero(2, state.vec.size());
  out.jacobian(0, si::kX) = 1.0;
  out.jacobian(1, si::kY) = 1.0;
  out.jacobian.col(si::kPsi) = -dr * u;
  out.jacobian.rightCols(state.extent_size()) = u * reg.weights;
  if (full_angle_derivative) {
    // phi = atan2(z_y - y, z_x - x) moves with the center.
    const Eigen::Vector2d dz_dphi = dr * u + r * u_perp;
    out.jacobian.col(si::kX) += dz_dphi * (d.y() / rho2);
    out.jacobian.col(si::kY) += dz_dphi * (-d.x() / rho2);
  }
  return out;
}

UpdateResult iterated_update(const TargetState& prior, const StateCovariance& cov,
                             const LinearizeFn& linearize, double noise_var, int max_iterations,
                             double tolerance, Eigen::Index angle_index) {
  if (max_iterations < 1) throw Error(ErrorKind::kInvalidArgument, "max_iterations must be >= 1");
  if (!(noise_var > 0.0)) throw Error(ErrorKind::kInvalidArgument, "noise variance must be > 0");
  const Eigen::Index n = prior.vec.size();
  const Eigen::VectorXd& x_prior = prior.vec;
  Eigen::VectorXd xi = x_prior;
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(n, n);

  Eigen::MatrixXd gain_core;  // P M^-1, with M = H^T H P + noise_var I
  Eigen::MatrixXd info;       // H^T H at the last linearization
  UpdateResult result{prior, cov, 0, 0, 0};
  for (int it = 0; it < max_iterations; ++it) {
    const Linearization lin = linearize(xi);
    if (lin.residual.size() == 0) break;
    info = lin.jacobian.transpose() * lin.jacobian;
    const Eigen::VectorXd g = lin.jacobian.transpose() * lin.residual;

    Eigen::VectorXd delta = x_prior - xi;
    if (angle_index >= 0) delta(angle_index) = wrap_angle(delta(angle_index));

    // Push-through identity: P H^T (H P H^T + R)^-1 = P (H^T H P + s2 I)^-1 H^T,
    // which keeps the solve n x n regardless of the measurement count.
    const Eigen::MatrixXd m = info * cov + noise_var * identity;
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
    if (!lu.isInvertible()) {
      throw Error(ErrorKind::kNumerical, "innovation covariance is not invertible");
    }
    gain_core = cov * lu.inverse();
    const Eigen::VectorXd x_next = x_prior + gain_core * (g - info * delta);
    if (!x_next.allFinite()) throw Error(ErrorKind::kNumerical, "iterated update diverged");
    const double change = (x_next - xi).norm();
    xi = x_next;
    ++result.iterations;
    if (change < tolerance) break;
  }
  if (result.iterations == 0) return result;

  const Eigen::MatrixXd kh = gain_core * info;
  const Eigen::MatrixXd a = identity - kh;
  StateCovariance post = a * cov * a.transpose() +
                         noise_var * gain_core * info * gain_core.transpose();
  result.state.vec = xi;
  result.cov = 0.5 * (post + post.transpose());
  return result;
}

UpdateResult iekf_update(const TargetState& state, const StateCovariance& cov,
                         const MeasurementSet& meas, const MotionConfig& motion,
                         const GpExtentModel& gp, const IekfOptions& options,
                         FilterHealth* health) {
  validate(motion);
  if (meas.empty()) return {state, cov, 0, 0, 0};

  std::size_t used = 0;
  std::size_t skipped = 0;
  const LinearizeFn linearize = [&](const Eigen::VectorXd& x) {
    const TargetState iterate{x};
    Linearization lin;
    lin.residual.resize(static_cast<Eigen::Index>(2 * meas.size()));
    lin.jacobian.resize(static_cast<Eigen::Index>(2 * meas.size()), x.size());
    Eigen::Index row = 0;
    used = 0;
    skipped = 0;
    for (const auto& z : meas) {
      const auto pred = measurement_model(iterate, z, gp, options.full_angle_derivative);
      if (!pred) {
        ++skipped;
        continue;
      }
      lin.residual.segment<2>(row) = z - pred->predicted;
      lin.jacobian.middleRows<2>(row) = pred->jacobian;
      row += 2;
      ++used;
    }
    lin.residual.conservativeResize(row);
    lin.jacobian.conservativeResize(row, x.size());
    return lin;
  };

  UpdateResult result =
      iterated_update(state, cov, linearize, motion.sigma_meas * motion.sigma_meas,
                      options.max_iterations, options.tolerance, si::kPsi);
  result.measurements_used = used;
  result.measurements_skipped = skipped;

  auto& x = result.state.vec;
  x(si::kPsi) = wrap_angle(x(si::kPsi));
  for (Eigen::Index i = si::kExtent; i < x.size(); ++i) x(i) = std::max(x(i), options.min_radius);
  if (!x.allFinite()) throw Error(ErrorKind::kNumerical, "state became non-finite");
  project_covariance(result.cov, health);
  return result;
}

void validate(const TrackerConfig& cfg) {
  validate(cfg.gp);
  validate(cfg.motion);
  if (cfg.iekf.max_iterations < 1) {
    throw Error(ErrorKind::kInvalidArgument, "iekf max_iterations must be >= 1");
  }
  if (!(cfg.iekf.tolerance > 0.0)) throw Error(ErrorKind::kInvalidArgument, "iekf tolerance must be > 0");
  if (!(cfg.prior_length > 0.0 && cfg.prior_width > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "tracker prior dimensions must be positive");
  }
  if (cfg.contour_bins < 4) throw Error(ErrorKind::kInvalidArgument, "contour_bins must be >= 4");
  if (!(cfg.contour_band >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "contour_band must be >= 0");
}

ExtentTracker::ExtentTracker(const TrackerConfig& cfg) : cfg_(cfg), gp_(cfg.gp) { validate(cfg_); }

void ExtentTracker::check_state() {
  const double psi = state_.heading();
  if (!(psi > -std::numbers::pi && psi <= std::numbers::pi)) ++health_.heading_violations;
  const Eigen::VectorXd ext = state_.extent();
  for (Eigen::Index i = 0; i < ext.size(); ++i) {
    if (!(ext(i) >= cfg_.iekf.min_radius)) ++health_.radius_violations;
  }
}

const TrackRecord& ExtentTracker::step(double timestamp,
                                       const std::optional<MeasurementSet>& detection) {
  if (have_time_ && !(timestamp > last_t_)) {
    throw Error(ErrorKind::kInvalidArgument, "track timestamps must be strictly increasing");
  }
  TrackRecord rec;
  rec.frame_index = log_.size();
  rec.t = timestamp;
  rec.detected = detection.has_value() && !detection->empty();

  if (initialized_) {
    auto [xp, pp] = predict(state_, cov_, timestamp - last_t_, cfg_.motion, gp_, &health_);
    state_ = std::move(xp);
    cov_ = std::move(pp);
    check_state();
  } else if (rec.detected) {
    Point2 centroid = Point2::Zero();
    for (const auto& z : *detection) centroid += z;
    centroid /= static_cast<double>(detection->size());
    auto [x0, p0] = initialize_state(cfg_.prior_length, cfg_.prior_width, centroid, cfg_.gp,
                                     cfg_.initial);
    state_ = std::move(x0);
    cov_ = std::move(p0);
    initialized_ = true;
  }

  if (initialized_ && rec.detected) {
    const MeasurementSet contour = extract_contour_measurements(
        *detection, state_.position(), cfg_.contour_bins, cfg_.contour_band);
    UpdateResult upd = iekf_update(state_, cov_, contour, cfg_.motion, gp_, cfg_.iekf, &health_);
    state_ = std::move(upd.state);
    cov_ = std::move(upd.cov);
    rec.contour_points = upd.measurements_used;
    check_state();
  }

  rec.initialized = initialized_;
  if (initialized_) {
    rec.state = state_;
    rec.cov_diag = cov_.diagonal();
  }
  last_t_ = timestamp;
  have_time_ = true;
  log_.push_back(std::move(rec));
  return log_.back();
}

}  // namespace eotrack
