#include "eotrack/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"

#include "eotrack/error.hpp"

namespace eotrack {
namespace {

using nlohmann::json;

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

json parse_line(const std::string& line, const std::filesystem::path& path, std::size_t lineno) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kFormat,
                path.string() + ":" + std::to_string(lineno) + ": " + e.what());
  }
}

json vec_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json point_json(const Eigen::Vector2d& p) { return json::array({p.x(), p.y()}); }

json profile_json(const SensorProfile& p) {
  return {{"kind", to_string(p.kind)},
          {"rate", p.rate},
          {"base_noise", p.base_noise},
          {"depth_noise_coeff", p.depth_noise_coeff},
          {"max_range", p.max_range},
          {"points_per_frame_mean", p.points_per_frame_mean},
          {"mount_height", p.mount_height},
          {"ground_points_per_m2", p.ground_points_per_m2},
          {"clutter_points_per_m2", p.clutter_points_per_m2}};
}

SensorProfile profile_from_json(const json& j) {
  SensorProfile p = sensor_kind_from_string(j.at("kind").get<std::string>()) == SensorKind::kLidarLike
                        ? SensorProfile::lidar_like()
                        : SensorProfile::camera_like();
  p.rate = j.at("rate").get<double>();
  p.base_noise = j.at("base_noise").get<double>();
  p.depth_noise_coeff = j.at("depth_noise_coeff").get<double>();
  p.max_range = j.at("max_range").get<double>();
  p.points_per_frame_mean = j.at("points_per_frame_mean").get<double>();
  p.mount_height = j.at("mount_height").get<double>();
  p.ground_points_per_m2 = j.at("ground_points_per_m2").get<double>();
  p.clutter_points_per_m2 = j.at("clutter_points_per_m2").get<double>();
  return p;
}

std::int64_t to_ns(double t) { return static_cast<std::int64_t>(std::llround(t * 1e9)); }

std::vector<std::optional<std::vector<std::size_t>>> picks_of(
    const std::vector<FrameDetection>& detections) {
  std::vector<std::optional<std::vector<std::size_t>>> picks;
  picks.reserve(detections.size());
  for (const auto& d : detections) {
    if (d.detection) {
      picks.emplace_back(d.detection->indices);
    } else {
      picks.emplace_back(std::nullopt);
    }
  }
  return picks;
}

void evaluate_into(PipelineResult& result, const GroundTruth& truth, const GpExtentModel& gp,
                   std::size_t burn_in, double purity) {
  result.detection_metrics = evaluate_detection(picks_of(result.detections), truth, purity);
  result.tracking_metrics = evaluate_tracking(result.track, truth, result.ground.plane, gp, burn_in);
}

}  // namespace

InputData load_input(const PipelineConfig& cfg) {
  InputData data;
  if (cfg.input.kind == InputKind::kSimulate) {
    Scenario scenario = cfg.scenario;
    scenario.trajectory = cfg.input.trajectory;
    scenario.seed = cfg.seed;
    auto sim = generate_scenario(scenario, cfg.profile);
    data.frames = std::move(sim.frames);
    data.truth = std::move(sim.truth);
    return data;
  }

  const auto files = list_frame_directory(cfg.input.directory);
  if (files.empty()) {
    throw Error(ErrorKind::kIo, "no frame files in " + cfg.input.directory.string());
  }
  for (const auto& f : files) {
    auto loaded = load_frame(f.path, format_from_extension(f.path));
    loaded.frame.timestamp = static_cast<double>(f.timestamp_ns) * 1e-9;
    data.non_finite_dropped += loaded.non_finite_dropped;
    data.frames.push_back(std::move(loaded.frame));
  }
  const auto gt_path = cfg.input.directory / "ground_truth.jsonl";
  if (std::filesystem::exists(gt_path)) {
    GroundTruth truth = read_ground_truth(gt_path);
    if (truth.frames.size() != data.frames.size()) {
      throw Error(ErrorKind::kFormat, "ground truth has " + std::to_string(truth.frames.size()) +
                                          " frames but the directory has " +
                                          std::to_string(data.frames.size()));
    }
    for (std::size_t i = 0; i < truth.frames.size(); ++i) {
      if (truth.frames[i].labels.size() != data.frames[i].size()) {
        throw Error(ErrorKind::kFormat,
                    "frame " + std::to_string(i) + ": ground-truth label count does not match points");
      }
    }
    data.truth = std::move(truth);
  }
  return data;
}

GroundInit init_ground(const GroundConfig& cfg, const std::vector<PointCloudFrame>& frames) {
  if (cfg.init_frame >= frames.size()) {
    throw Error(ErrorKind::kInvalidArgument, "ground.init_frame " + std::to_string(cfg.init_frame) +
                                                 " is out of range (" + std::to_string(frames.size()) +
                                                 " frames)");
  }
  const auto& frame = frames[cfg.init_frame];
  GroundInit out;
  out.frame_points = frame.size();
  const auto near = preselect_near_plane(frame, normalize_plane(cfg.prior), cfg.preselect_distance);
  out.preselected = near.size();
  const auto sparse = voxel_downsample(near, cfg.voxel_size);
  out.downsampled = sparse.size();
  const auto fit = ransac_plane_detailed(sparse, cfg.ransac);
  out.plane = fit.plane;
  out.inliers = fit.inliers;
  return out;
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const InputData& input) {
  PipelineResult result;
  result.ground = init_ground(cfg.ground, input.frames);
  const PlaneModel& plane = result.ground.plane;

  ExtentTracker tracker(cfg.tracker);
  result.detections.reserve(input.frames.size());
  for (std::size_t i = 0; i < input.frames.size(); ++i) {
    const auto& frame = input.frames[i];
    FrameDetection fd{i, frame.timestamp, detect_target(frame, plane, cfg.detection)};
    std::optional<MeasurementSet> meas;
    if (fd.detection) meas = project_to_tracking_plane(fd.detection->points, plane);
    try {
      tracker.step(frame.timestamp, meas);
    } catch (const Error& e) {
      throw Error(e.kind(), "frame " + std::to_string(i) + ": " + e.detail());
    }
    result.detections.push_back(std::move(fd));
  }
  result.track = tracker.log();
  result.health = tracker.health();
  if (input.truth) {
    evaluate_into(result, *input.truth, tracker.gp(), cfg.burn_in, cfg.purity);
  }
  return result;
}

std::string plane_json(const GroundInit& ground) {
  const auto c = ground.plane.coefficients();
  json j = {{"plane", {c[0], c[1], c[2], c[3]}},
            {"frame_points", ground.frame_points},
            {"preselected", ground.preselected},
            {"downsampled", ground.downsampled},
            {"inliers", ground.inliers}};
  return j.dump(2) + "\n";
}

std::string detections_jsonl(const std::vector<FrameDetection>& detections) {
  std::string out;
  for (const auto& d : detections) {
    json row = {{"frame_index", d.frame_index}, {"t", d.t}, {"detected", d.detection.has_value()}};
    if (d.detection) {
      const auto& det = *d.detection;
      json axes = json::array();
      for (int k = 0; k < 3; ++k) axes.push_back(vec_json(det.bbox.axes.col(k)));
      row["cost"] = det.cost;
      row["point_count"] = det.indices.size();
      row["bbox"] = {{"center", vec_json(det.bbox.center)},
                     {"axes", axes},
                     {"half_extents", vec_json(det.bbox.half_extents)}};
      row["features"] = det.features.values;
      row["indices"] = det.indices;
    } else {
      row["cost"] = nullptr;
      row["point_count"] = 0;
      row["bbox"] = nullptr;
      row["features"] = nullptr;
      row["indices"] = json::array();
    }
    out += row.dump() + "\n";
  }
  return out;
}

std::string track_jsonl(const std::vector<TrackRecord>& track) {
  std::string out;
  for (const auto& r : track) {
    json row = {{"frame_index", r.frame_index},
                {"t", r.t},
                {"initialized", r.initialized},
                {"detected", r.detected}};
    if (r.initialized) {
      const auto& s = r.state;
      row["x"] = s.position().x();
      row["y"] = s.position().y();
      row["psi"] = s.heading();
      row["vx"] = s.velocity().x();
      row["vy"] = s.velocity().y();
      row["omega"] = s.turn_rate();
      row["pf"] = vec_json(s.extent());
      row["cov_diag"] = vec_json(r.cov_diag);
    } else {
      for (const char* k : {"x", "y", "psi", "vx", "vy", "omega"}) row[k] = nullptr;
      row["pf"] = json::array();
      row["cov_diag"] = json::array();
    }
    row["contour_points"] = r.contour_points;
    out += row.dump() + "\n";
  }
  return out;
}

std::string metrics_json(const PipelineResult& result) {
  json j;
  j["frames"] = result.detections.size();
  if (result.detection_metrics) {
    const auto& d = *result.detection_metrics;
    j["detection_rate"] = d.detection_rate;
    j["false_pick_rate"] = d.false_pick_rate;
    j["detections"] = d.detections;
    j["correct_detections"] = d.correct;
    j["false_picks"] = d.false_picks;
  }
  if (result.tracking_metrics) {
    const auto& t = *result.tracking_metrics;
    j["tracking"] = {{"frames_evaluated", t.frames_evaluated},
                     {"burn_in", t.burn_in},
                     {"centroid_rmse", t.centroid_rmse},
                     {"heading_rmse", t.heading_rmse},
                     {"velocity_rmse", t.velocity_rmse},
                     {"mean_iou", t.mean_iou}};
    j["iou_ceiling"] = t.iou_ceiling;
  }
  const auto& h = result.health;
  j["health"] = {{"covariance_checks", h.covariance_checks},
                 {"psd_violations", h.psd_violations},
                 {"symmetry_violations", h.symmetry_violations},
                 {"heading_violations", h.heading_violations},
                 {"radius_violations", h.radius_violations},
                 {"min_eigenvalue", h.min_eigenvalue},
                 {"violations", h.violations()}};
  return j.dump(2) + "\n";
}

void write_artifacts(const PipelineConfig& cfg, const InputData& input, const PipelineResult& result,
                     const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "config.json", config_to_json(cfg) + "\n");
  write_text(dir / "plane.json", plane_json(result.ground));
  write_text(dir / "detections.jsonl", detections_jsonl(result.detections));
  write_text(dir / "track.jsonl", track_jsonl(result.track));
  if (result.detection_metrics || result.tracking_metrics) {
    write_text(dir / "metrics.json", metrics_json(result));
  }
  if (input.truth) {
    const auto tf = tracking_frame(result.ground.plane);
    std::string out;
    for (const auto& f : input.truth->frames) {
      const auto pt = planar_truth(f, *input.truth, tf);
      json fp = json::array();
      for (const auto& c : pt.footprint) fp.push_back(point_json(c));
      json row = {{"frame_index", f.index}, {"t", f.t},
                  {"x", pt.center.x()},     {"y", pt.center.y()},
                  {"psi", pt.heading},      {"vx", pt.velocity.x()},
                  {"vy", pt.velocity.y()},  {"footprint", fp}};
      out += row.dump() + "\n";
    }
    write_text(dir / "ground_truth_planar.jsonl", out);
  }
}

std::string ground_truth_jsonl(const GroundTruth& truth) {
  std::string out;
  const json header = {{"type", "header"},
                       {"profile", profile_json(truth.profile)},
                       {"robot_dims", vec_json(truth.robot_dims)}};
  out += header.dump() + "\n";
  for (const auto& f : truth.frames) {
    json fp = json::array();
    for (const auto& c : f.footprint) fp.push_back(point_json(c));
    std::vector<int> labels(f.labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(f.labels[i]);
    const json row = {{"type", "frame"},
                      {"index", f.index},
                      {"t", f.t},
                      {"pose", {f.pose.x, f.pose.y, f.pose.psi}},
                      {"velocity", point_json(f.velocity)},
                      {"turn_rate", f.turn_rate},
                      {"footprint", fp},
                      {"labels", labels}};
    out += row.dump() + "\n";
  }
  return out;
}

GroundTruth read_ground_truth(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  GroundTruth truth;
  bool have_header = false;
  for (std::size_t n = 0; n < lines.size(); ++n) {
    if (lines[n].empty()) continue;
    const json row = parse_line(lines[n], path, n + 1);
    try {
      const std::string type = row.at("type").get<std::string>();
      if (type == "header") {
        truth.profile = profile_from_json(row.at("profile"));
        const auto dims = row.at("robot_dims").get<std::vector<double>>();
        if (dims.size() != 3) throw Error(ErrorKind::kFormat, "robot_dims needs 3 values");
        truth.robot_dims = {dims[0], dims[1], dims[2]};
        have_header = true;
      } else if (type == "frame") {
        GroundTruthFrame f;
        f.index = row.at("index").get<std::size_t>();
        f.t = row.at("t").get<double>();
        const auto pose = row.at("pose").get<std::vector<double>>();
        if (pose.size() != 3) throw Error(ErrorKind::kFormat, "pose needs 3 values");
        f.pose = {pose[0], pose[1], pose[2]};
        const auto vel = row.at("velocity").get<std::vector<double>>();
        if (vel.size() != 2) throw Error(ErrorKind::kFormat, "velocity needs 2 values");
        f.velocity = {vel[0], vel[1]};
        f.turn_rate = row.at("turn_rate").get<double>();
        const auto& fp = row.at("footprint");
        if (!fp.is_array() || fp.size() != 4) throw Error(ErrorKind::kFormat, "footprint needs 4 corners");
        for (std::size_t k = 0; k < 4; ++k) {
          f.footprint[k] = {fp[k].at(0).get<double>(), fp[k].at(1).get<double>()};
        }
        for (int v : row.at("labels").get<std::vector<int>>()) {
          if (v < 0 || v > 2) throw Error(ErrorKind::kFormat, "label out of range");
          f.labels.push_back(static_cast<PointLabel>(v));
        }
        truth.frames.push_back(std::move(f));
      } else {
        throw Error(ErrorKind::kFormat, "unknown row type '" + type + "'");
      }
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kFormat, path.string() + ":" + std::to_string(n + 1) + ": " + e.what());
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kFormat) throw;
      throw Error(ErrorKind::kFormat, path.string() + ":" + std::to_string(n + 1) + ": " + e.detail());
    }
  }
  if (!have_header) throw Error(ErrorKind::kFormat, path.string() + ": missing header row");
  return truth;
}

void write_simulation(const SimulationOutput& sim, const std::filesystem::path& dir, CloudFormat format) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < sim.frames.size(); ++i) {
    const auto& frame = sim.frames[i];
    save_frame(frame, dir / frame_file_name(i, to_ns(frame.timestamp), format), format);
  }
  write_text(dir / "ground_truth.jsonl", ground_truth_jsonl(sim.truth));
}

RunArtifacts read_run_artifacts(const std::filesystem::path& dir) {
  RunArtifacts run;
  {
    const auto path = dir / "plane.json";
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::kIo, "cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
      const auto c = json::parse(ss.str()).at("plane").get<std::vector<double>>();
      if (c.size() != 4) throw Error(ErrorKind::kFormat, path.string() + ": plane needs 4 values");
      run.plane = normalize_plane(c[0], c[1], c[2], c[3]);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kFormat, path.string() + ": " + e.what());
    }
  }
  {
    const auto path = dir / "detections.jsonl";
    const auto lines = read_lines(path);
    for (std::size_t n = 0; n < lines.size(); ++n) {
      if (lines[n].empty()) continue;
      const json row = parse_line(lines[n], path, n + 1);
      try {
        FrameDetection fd;
        fd.frame_index = row.at("frame_index").get<std::size_t>();
        fd.t = row.at("t").get<double>();
        if (row.at("detected").get<bool>()) {
          Detection det;
          det.cost = row.at("cost").get<double>();
          det.indices = row.at("indices").get<std::vector<std::size_t>>();
          fd.detection = std::move(det);
        }
        run.detections.push_back(std::move(fd));
      } catch (const json::exception& e) {
        throw Error(ErrorKind::kFormat, path.string() + ":" + std::to_string(n + 1) + ": " + e.what());
      }
    }
  }
  {
    const auto path = dir / "track.jsonl";
    const auto lines = read_lines(path);
    for (std::size_t n = 0; n < lines.size(); ++n) {
      if (lines[n].empty()) continue;
      const json row = parse_line(lines[n], path, n + 1);
      try {
        TrackRecord r;
        r.frame_index = row.at("frame_index").get<std::size_t>();
        r.t = row.at("t").get<double>();
        r.initialized = row.at("initialized").get<bool>();
        r.detected = row.at("detected").get<bool>();
        r.contour_points = row.value("contour_points", std::size_t{0});
        if (r.initialized) {
          const auto pf = row.at("pf").get<std::vector<double>>();
          r.state.vec.resize(static_cast<Eigen::Index>(6 + pf.size()));
          r.state.vec << row.at("x").get<double>(), row.at("y").get<double>(),
              row.at("psi").get<double>(), row.at("vx").get<double>(), row.at("vy").get<double>(),
              row.at("omega").get<double>(),
              Eigen::Map<const Eigen::VectorXd>(pf.data(), static_cast<Eigen::Index>(pf.size()));
          const auto cd = row.at("cov_diag").get<std::vector<double>>();
          r.cov_diag = Eigen::Map<const Eigen::VectorXd>(cd.data(), static_cast<Eigen::Index>(cd.size()));
        }
        run.track.push_back(std::move(r));
      } catch (const json::exception& e) {
        throw Error(ErrorKind::kFormat, path.string() + ":" + std::to_string(n + 1) + ": " + e.what());
      }
    }
  }
  if (run.detections.size() != run.track.size()) {
    throw Error(ErrorKind::kFormat, "detections.jsonl and track.jsonl have different lengths");
  }
  return run;
}

PipelineResult evaluate_run(const RunArtifacts& run, const GroundTruth& truth,
                            const TrackerConfig& tracker, std::size_t burn_in, double purity) {
  PipelineResult result;
  result.ground.plane = run.plane;
  result.detections = run.detections;
  result.track = run.track;
  for (const auto& r : run.track) {
    if (!r.initialized) continue;
    const double psi = r.state.heading();
    if (!(psi > -std::numbers::pi && psi <= std::numbers::pi)) ++result.health.heading_violations;
    if (r.state.extent().minCoeff() < tracker.iekf.min_radius) ++result.health.radius_violations;
  }
  const GpExtentModel gp(tracker.gp);
  evaluate_into(result, truth, gp, burn_in, purity);
  return result;
}

}  // namespace eotrack
