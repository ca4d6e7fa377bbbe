#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "eotrack/detector.hpp"
#include "eotrack/ground_plane.hpp"
#include "eotrack/sim.hpp"
#include "eotrack/tracker.hpp"

namespace eotrack {

/// Ground initialization: preselection around a prior plane, voxel
/// downsampling, then RANSAC on one frame.
struct GroundConfig {
  std::array<double, 4> prior = kLidarGroundPrior;
  double preselect_distance = 1.0;  // gamma_0, m
  double voxel_size = 0.1;          // alpha, m
  RansacConfig ransac;
  std::size_t init_frame = 0;
};

enum class InputKind { kSimulate, kDirectory };

struct InputSource {
  InputKind kind = InputKind::kSimulate;
  TrajectoryKind trajectory = TrajectoryKind::kStraight;
  std::filesystem::path directory;
};

struct PipelineConfig {
  SensorProfile profile = SensorProfile::lidar_like();
  GroundConfig ground;
  DetectionConfig detection;
  TrackerConfig tracker;
  InputSource input;
  Scenario scenario = Scenario::straight();
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 0;
  std::size_t burn_in = 5;
  double purity = 0.8;
};

/// Defaults for a sensor: matching ground prior and operation area, profile
/// noise model, and the detector/tracker parameters from the method.
PipelineConfig default_config(SensorKind kind);

/// Builds a config from JSON text layered over the sensor defaults, then
/// applies "dotted.key=value" overrides. Throws Error(kConfig) naming the
/// offending field on any parse or validation failure.
PipelineConfig parse_config(const std::string& json_text,
                            const std::vector<std::string>& overrides = {});
PipelineConfig load_config(const std::filesystem::path& path,
                           const std::vector<std::string>& overrides = {});

/// Fully resolved config as pretty JSON (what `run` records next to its outputs).
std::string config_to_json(const PipelineConfig& cfg);

}  // namespace eotrack
