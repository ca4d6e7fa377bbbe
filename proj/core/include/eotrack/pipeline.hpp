#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "eotrack/config.hpp"
#include "eotrack/detector.hpp"
#include "eotrack/ground_plane.hpp"
#include "eotrack/metrics.hpp"
#include "eotrack/pointcloud_io.hpp"
#include "eotrack/sim.hpp"
#include "eotrack/tracker.hpp"

namespace eotrack {

/// Frames to process plus ground truth when the source provides it.
struct InputData {
  std::vector<PointCloudFrame> frames;
  std::optional<GroundTruth> truth;
  std::size_t non_finite_dropped = 0;
};

/// Simulates the configured scenario, or reads a frame directory. A
/// directory may carry ground_truth.jsonl as written by write_simulation.
InputData load_input(const PipelineConfig& cfg);

struct GroundInit {
  PlaneModel plane;
  std::size_t frame_points = 0;
  std::size_t preselected = 0;
  std::size_t downsampled = 0;
  std::size_t inliers = 0;
};

/// Preselects points near the prior plane, voxel-downsamples them and runs
/// RANSAC on the configured init frame.
GroundInit init_ground(const GroundConfig& cfg, const std::vector<PointCloudFrame>& frames);

struct FrameDetection {
  std::size_t frame_index = 0;
  double t = 0.0;
  std::optional<Detection> detection;
};

struct PipelineResult {
  GroundInit ground;
  std::vector<FrameDetection> detections;
  std::vector<TrackRecord> track;
  FilterHealth health;
  std::optional<DetectionMetrics> detection_metrics;
  std::optional<TrackingMetrics> tracking_metrics;
};

/// Ground initialization, per-frame detection, tracking in the ground plane
/// and, when ground truth is present, evaluation. Numerical failures inside
/// the tracker are rethrown with the frame index.
PipelineResult run_pipeline(const PipelineConfig& cfg, const InputData& input);

/// Serialized artifacts. Every writer produces byte-identical output for
/// identical inputs.
std::string plane_json(const GroundInit& ground);
std::string detections_jsonl(const std::vector<FrameDetection>& detections);
std::string track_jsonl(const std::vector<TrackRecord>& track);
std::string metrics_json(const PipelineResult& result);

/// Writes plane.json, detections.jsonl, track.jsonl, config.json and, with
/// ground truth, metrics.json and ground_truth_planar.jsonl.
void write_artifacts(const PipelineConfig& cfg, const InputData& input, const PipelineResult& result,
                     const std::filesystem::path& dir);

/// Persists simulated frames as <index>_<ns>.pcd plus ground_truth.jsonl.
void write_simulation(const SimulationOutput& sim, const std::filesystem::path& dir,
                      CloudFormat format = CloudFormat::kPcdAscii);

std::string ground_truth_jsonl(const GroundTruth& truth);
GroundTruth read_ground_truth(const std::filesystem::path& path);

/// Parsed artifacts of a previous run.
struct RunArtifacts {
  PlaneModel plane;
  std::vector<FrameDetection> detections;  // only indices and cost are restored
  std::vector<TrackRecord> track;
};

RunArtifacts read_run_artifacts(const std::filesystem::path& dir);

/// Recomputes metrics for a finished run directory against ground truth.
PipelineResult evaluate_run(const RunArtifacts& run, const GroundTruth& truth,
                            const TrackerConfig& tracker, std::size_t burn_in, double purity);

}  // namespace eotrack
