#include "eotrack/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

#include "eotrack/error.hpp"

namespace eotrack {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::kConfig, path + ": " + what);
}

const json& at(const json& root, const std::string& path) {
  const json* node = &root;
  std::size_t start = 0;
  while (start <= path.size()) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(key)) fail(path, "missing");
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return *node;
}

double num(const json& root, const std::string& path) {
  const json& v = at(root, path);
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

double positive(const json& root, const std::string& path) {
  const double v = num(root, path);
  if (!(v > 0.0)) fail(path, "must be > 0 (got " + at(root, path).dump() + ")");
  return v;
}

double non_negative(const json& root, const std::string& path) {
  const double v = num(root, path);
  if (!(v >= 0.0)) fail(path, "must be >= 0 (got " + at(root, path).dump() + ")");
  return v;
}

std::int64_t integer(const json& root, const std::string& path) {
  const json& v = at(root, path);
  if (!v.is_number_integer()) fail(path, "expected an integer");
  return v.get<std::int64_t>();
}

bool boolean(const json& root, const std::string& path) {
  const json& v = at(root, path);
  if (!v.is_boolean()) fail(path, "expected true or false");
  return v.get<bool>();
}

std::string text(const json& root, const std::string& path) {
  const json& v = at(root, path);
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

template <std::size_t N>
std::array<double, N> fixed_array(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != N) fail(path, "expected an array of " + std::to_string(N) + " numbers");
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    if (!v[i].is_number()) fail(path, "expected an array of " + std::to_string(N) + " numbers");
    out[i] = v[i].get<double>();
  }
  return out;
}

template <std::size_t N>
std::array<double, N> fixed_array(const json& root, const std::string& path, bool) {
  return fixed_array<N>(at(root, path), path);
}

json scenario_overrides_template() {
  return {{"duration", nullptr}, {"speed", nullptr},      {"turn_rate", nullptr},
          {"start", nullptr},    {"robot_dims", nullptr}, {"clutter", nullptr},
          {"hidden_face_density", nullptr}};
}

json to_json(const PipelineConfig& c, bool resolved_scenario) {
  const auto& p = c.profile;
  const auto& a = c.detection.area;
  const auto& t = c.tracker;
  json j;
  j["sensor"] = to_string(p.kind);
  j["seed"] = c.seed;
  j["input"] = c.input.kind == InputKind::kSimulate
                   ? std::string("simulate:") + to_string(c.input.trajectory)
                   : c.input.directory.string();
  j["output_dir"] = c.output_dir.string();
  j["burn_in"] = c.burn_in;
  j["purity"] = c.purity;
  j["profile"] = {{"rate", p.rate},
                  {"base_noise", p.base_noise},
                  {"depth_noise_coeff", p.depth_noise_coeff},
                  {"max_range", p.max_range},
                  {"points_per_frame_mean", p.points_per_frame_mean},
                  {"mount_height", p.mount_height},
                  {"ground_points_per_m2", p.ground_points_per_m2},
                  {"clutter_points_per_m2", p.clutter_points_per_m2}};
  if (resolved_scenario) {
    const auto& s = c.scenario;
    json clutter = json::array();
    for (const auto& b : s.clutter) {
      clutter.push_back({{"pose", {b.pose.x, b.pose.y, b.pose.psi}},
                         {"dims", {b.dims.x(), b.dims.y(), b.dims.z()}}});
    }
    j["scenario"] = {{"duration", s.duration},
                     {"speed", s.speed},
                     {"turn_rate", s.turn_rate},
                     {"start", {s.start.x, s.start.y, s.start.psi}},
                     {"robot_dims", {s.robot_dims.x(), s.robot_dims.y(), s.robot_dims.z()}},
                     {"clutter", clutter},
                     {"hidden_face_density", s.hidden_face_density}};
  } else {
    j["scenario"] = scenario_overrides_template();
  }
  j["ground"] = {{"prior", c.ground.prior},
                 {"preselect_distance", c.ground.preselect_distance},
                 {"voxel_size", c.ground.voxel_size},
                 {"init_frame", c.ground.init_frame},
                 {"ransac",
                  {{"inlier_threshold", c.ground.ransac.inlier_threshold},
                   {"max_iterations", c.ground.ransac.max_iterations},
                   {"min_inliers", c.ground.ransac.min_inliers},
                   {"seed", c.ground.ransac.seed}}}};
  j["detection"] = {
      {"area",
       {{"x_min", a.x_min}, {"x_max", a.x_max}, {"y_min", a.y_min},
        {"y_max", a.y_max}, {"z_min", a.z_min}, {"z_max", a.z_max}}},
      {"ground_threshold", c.detection.ground_threshold},
      {"dbscan", {{"eps", c.detection.dbscan.eps}, {"min_points", c.detection.dbscan.min_points}}},
      {"prior_features", c.detection.prior_features.values},
      {"weights", c.detection.weights},
      {"cost_threshold", c.detection.cost_threshold}};
  j["tracker"] = {
      {"gp",
       {{"num_test_angles", t.gp.num_test_angles},
        {"sigma_f", t.gp.sigma_f},
        {"sigma_r", t.gp.sigma_r},
        {"sigma_n", t.gp.sigma_n},
        {"length_scale", t.gp.length_scale},
        {"forgetting", t.gp.forgetting}}},
      {"motion", {{"sigma_c", t.motion.sigma_c}, {"sigma_meas", t.motion.sigma_meas}}},
      {"iekf",
       {{"max_iterations", t.iekf.max_iterations},
        {"tolerance", t.iekf.tolerance},
        {"full_angle_derivative", t.iekf.full_angle_derivative},
        {"min_radius", t.iekf.min_radius}}},
      {"prior_dims", {t.prior_length, t.prior_width}},
      {"contour_bins", t.contour_bins},
      {"contour_band", t.contour_band},
      {"initial",
       {{"position_std", t.initial.position_std},
        {"heading_std", t.initial.heading_std},
        {"velocity_std", t.initial.velocity_std},
        {"turn_rate_std", t.initial.turn_rate_std}}}};
  return j;
}

void check_known_keys(const json& user, const json& reference, const std::string& prefix) {
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!reference.contains(it.key())) fail(path, "unknown configuration key");
    const json& ref = reference[it.key()];
    if (ref.is_object()) {
      if (!it.value().is_object()) fail(path, "expected an object");
      check_known_keys(it.value(), ref, path);
    }
  }
}

void deep_merge(json& base, const json& patch) {
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (it.value().is_object() && base.contains(it.key()) && base[it.key()].is_object()) {
      deep_merge(base[it.key()], it.value());
    } else {
      base[it.key()] = it.value();
    }
  }
}

void apply_override(json& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error(ErrorKind::kConfig, "override '" + assignment + "' must look like key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json* node = &root;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw Error(ErrorKind::kConfig, "override key '" + key + "' is malformed");
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

Scenario decode_scenario(const json& root, TrajectoryKind trajectory, std::uint64_t seed) {
  const json& s = at(root, "scenario");
  Scenario out = trajectory == TrajectoryKind::kStraight ? Scenario::straight() : Scenario::turning();
  out.seed = seed;
  if (!s["duration"].is_null()) out.duration = positive(root, "scenario.duration");
  if (!s["speed"].is_null()) out.speed = non_negative(root, "scenario.speed");
  if (!s["turn_rate"].is_null()) out.turn_rate = num(root, "scenario.turn_rate");
  if (!s["start"].is_null()) {
    const auto v = fixed_array<3>(s["start"], "scenario.start");
    out.start = {v[0], v[1], v[2]};
  }
  if (!s["robot_dims"].is_null()) {
    const auto v = fixed_array<3>(s["robot_dims"], "scenario.robot_dims");
    out.robot_dims = {v[0], v[1], v[2]};
  }
  if (!s["hidden_face_density"].is_null()) {
    out.hidden_face_density = non_negative(root, "scenario.hidden_face_density");
  }
  if (!s["clutter"].is_null()) {
    if (!s["clutter"].is_array()) fail("scenario.clutter", "expected an array");
    out.clutter.clear();
    for (const auto& b : s["clutter"]) {
      if (!b.is_object() || !b.contains("pose") || !b.contains("dims")) {
        fail("scenario.clutter", "entries need pose [x,y,psi] and dims [l,w,h]");
      }
      const auto pose = fixed_array<3>(b["pose"], "scenario.clutter.pose");
      const auto dims = fixed_array<3>(b["dims"], "scenario.clutter.dims");
      out.clutter.push_back({{pose[0], pose[1], pose[2]}, {dims[0], dims[1], dims[2]}});
    }
  }
  return out;
}

PipelineConfig decode(const json& j) {
  const SensorKind kind = sensor_kind_from_string(text(j, "sensor"));
  PipelineConfig c = default_config(kind);
  c.seed = static_cast<std::uint64_t>(integer(j, "seed"));
  c.output_dir = text(j, "output_dir");
  const auto burn = integer(j, "burn_in");
  if (burn < 0) fail("burn_in", "must be >= 0");
  c.burn_in = static_cast<std::size_t>(burn);
  c.purity = positive(j, "purity");
  if (c.purity > 1.0) fail("purity", "must be <= 1");

  const std::string input = text(j, "input");
  if (input.rfind("simulate:", 0) == 0) {
    c.input.kind = InputKind::kSimulate;
    try {
      c.input.trajectory = trajectory_from_string(input.substr(9));
    } catch (const Error& e) {
      fail("input", e.detail());
    }
  } else {
    c.input.kind = InputKind::kDirectory;
    c.input.directory = input;
    if (!std::filesystem::is_directory(c.input.directory)) {
      fail("input", "'" + input + "' is not a directory");
    }
  }

  auto& p = c.profile;
  p.rate = positive(j, "profile.rate");
  p.base_noise = non_negative(j, "profile.base_noise");
  p.depth_noise_coeff = non_negative(j, "profile.depth_noise_coeff");
  p.max_range = positive(j, "profile.max_range");
  p.points_per_frame_mean = non_negative(j, "profile.points_per_frame_mean");
  p.mount_height = positive(j, "profile.mount_height");
  p.ground_points_per_m2 = non_negative(j, "profile.ground_points_per_m2");
  p.clutter_points_per_m2 = non_negative(j, "profile.clutter_points_per_m2");
  try {
    validate(p);
  } catch (const Error& e) {
    fail("profile", e.detail());
  }

  try {
    c.scenario = decode_scenario(j, c.input.trajectory, c.seed);
    validate(c.scenario);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kConfig) throw;
    fail("scenario", e.detail());
  }

  c.ground.prior = fixed_array<4>(j, "ground.prior", true);
  try {
    (void)normalize_plane(c.ground.prior);
  } catch (const Error&) {
    fail("ground.prior", "plane normal must be non-zero");
  }
  c.ground.preselect_distance = positive(j, "ground.preselect_distance");
  c.ground.voxel_size = positive(j, "ground.voxel_size");
  const auto init_frame = integer(j, "ground.init_frame");
  if (init_frame < 0) fail("ground.init_frame", "must be >= 0");
  c.ground.init_frame = static_cast<std::size_t>(init_frame);
  c.ground.ransac.inlier_threshold = positive(j, "ground.ransac.inlier_threshold");
  c.ground.ransac.max_iterations = static_cast<int>(integer(j, "ground.ransac.max_iterations"));
  if (c.ground.ransac.max_iterations < 1) fail("ground.ransac.max_iterations", "must be >= 1");
  c.ground.ransac.min_inliers = static_cast<int>(integer(j, "ground.ransac.min_inliers"));
  if (c.ground.ransac.min_inliers < 3) fail("ground.ransac.min_inliers", "must be >= 3");
  c.ground.ransac.seed = static_cast<std::uint64_t>(integer(j, "ground.ransac.seed"));

  auto& d = c.detection;
  d.area = {num(j, "detection.area.x_min"), num(j, "detection.area.x_max"),
            num(j, "detection.area.y_min"), num(j, "detection.area.y_max"),
            num(j, "detection.area.z_min"), num(j, "detection.area.z_max")};
  if (!(d.area.x_min < d.area.x_max)) fail("detection.area.x_min", "must be < x_max");
  if (!(d.area.y_min < d.area.y_max)) fail("detection.area.y_min", "must be < y_max");
  if (!(d.area.z_min < d.area.z_max)) fail("detection.area.z_min", "must be < z_max");
  d.ground_threshold = positive(j, "detection.ground_threshold");
  d.dbscan.eps = positive(j, "detection.dbscan.eps");
  d.dbscan.min_points = static_cast<int>(integer(j, "detection.dbscan.min_points"));
  if (d.dbscan.min_points < 1) fail("detection.dbscan.min_points", "must be >= 1");
  d.prior_features.values = fixed_array<7>(j, "detection.prior_features", true);
  d.weights = fixed_array<7>(j, "detection.weights", true);
  for (double w : d.weights) {
    if (!(w >= 0.0)) fail("detection.weights", "weights must be >= 0");
  }
  d.cost_threshold = positive(j, "detection.cost_threshold");

  auto& t = c.tracker;
  t.gp.num_test_angles = static_cast<int>(integer(j, "tracker.gp.num_test_angles"));
  if (t.gp.num_test_angles < 3) fail("tracker.gp.num_test_angles", "must be >= 3");
  t.gp.sigma_f = positive(j, "tracker.gp.sigma_f");
  t.gp.sigma_r = positive(j, "tracker.gp.sigma_r");
  t.gp.sigma_n = positive(j, "tracker.gp.sigma_n");
  t.gp.length_scale = positive(j, "tracker.gp.length_scale");
  t.gp.forgetting = positive(j, "tracker.gp.forgetting");
  if (!(t.gp.forgetting < 1.0)) fail("tracker.gp.forgetting", "must be < 1");
  t.motion.sigma_c = positive(j, "tracker.motion.sigma_c");
  t.motion.sigma_meas = positive(j, "tracker.motion.sigma_meas");
  t.motion.period = 1.0 / p.rate;
  t.iekf.max_iterations = static_cast<int>(integer(j, "tracker.iekf.max_iterations"));
  if (t.iekf.max_iterations < 1) fail("tracker.iekf.max_iterations", "must be >= 1");
  t.iekf.tolerance = positive(j, "tracker.iekf.tolerance");
  t.iekf.full_angle_derivative = boolean(j, "tracker.iekf.full_angle_derivative");
  t.iekf.min_radius = positive(j, "tracker.iekf.min_radius");
  const auto dims = fixed_array<2>(j, "tracker.prior_dims", true);
  if (!(dims[0] > 0.0 && dims[1] > 0.0)) fail("tracker.prior_dims", "must be positive");
  t.prior_length = dims[0];
  t.prior_width = dims[1];
  t.contour_bins = static_cast<int>(integer(j, "tracker.contour_bins"));
  if (t.contour_bins < 4) fail("tracker.contour_bins", "must be >= 4");
  t.contour_band = non_negative(j, "tracker.contour_band");
  t.initial.position_std = positive(j, "tracker.initial.position_std");
  t.initial.heading_std = positive(j, "tracker.initial.heading_std");
  t.initial.velocity_std = positive(j, "tracker.initial.velocity_std");
  t.initial.turn_rate_std = positive(j, "tracker.initial.turn_rate_std");
  return c;
}

}  // namespace

PipelineConfig default_config(SensorKind kind) {
  PipelineConfig c;
  c.profile = kind == SensorKind::kLidarLike ? SensorProfile::lidar_like() : SensorProfile::camera_like();
  c.ground.prior = c.profile.ground_prior();
  c.detection.area = c.profile.operation_area();
  c.tracker.motion.period = 1.0 / c.profile.rate;
  return c;
}

PipelineConfig parse_config(const std::string& json_text, const std::vector<std::string>& overrides) {
  json user = json::object();
  if (!json_text.empty()) {
    try {
      user = json::parse(json_text);
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::kConfig, std::string("config is not valid JSON: ") + e.what());
    }
    if (!user.is_object()) throw Error(ErrorKind::kConfig, "config root must be a JSON object");
  }
  for (const auto& o : overrides) apply_override(user, o);

  SensorKind kind = SensorKind::kLidarLike;
  if (user.contains("sensor")) {
    if (!user["sensor"].is_string()) fail("sensor", "expected a string");
    try {
      kind = sensor_kind_from_string(user["sensor"].get<std::string>());
    } catch (const Error& e) {
      fail("sensor", e.detail());
    }
  }
  json merged = to_json(default_config(kind), false);
  check_known_keys(user, merged, "");
  deep_merge(merged, user);
  return decode(merged);
}

PipelineConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kConfig, "cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), overrides);
}

std::string config_to_json(const PipelineConfig& cfg) { return to_json(cfg, true).dump(2); }

}  // namespace eotrack
