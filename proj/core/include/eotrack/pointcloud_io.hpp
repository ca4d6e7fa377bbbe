#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace eotrack {

using Point3 = Eigen::Vector3d;
using Point2 = Eigen::Vector2d;

/// One timestamped scan in a sensor frame. Coordinates are meters.
struct PointCloudFrame {
  double timestamp = 0.0;
  std::vector<Point3> points;
  std::string frame_id;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }
};

enum class CloudFormat { kPcdAscii, kPlyAscii, kCsv };

CloudFormat format_from_extension(const std::filesystem::path& path);
const char* extension_for(CloudFormat format) noexcept;

struct LoadResult {
  PointCloudFrame frame;
  /// Points dropped because a coordinate was NaN or infinite.
  std::size_t non_finite_dropped = 0;
};

/// Reads an ASCII PCD (v0.7), ASCII PLY or "x,y,z" CSV file. Binary encodings
/// are rejected with ErrorKind::kUnsupported.
LoadResult load_frame(const std::filesystem::path& path, CloudFormat format);

/// CSV output uses round-trip (max_digits10) precision; PCD/PLY are written
/// with 9 fixed decimals.
void save_frame(const PointCloudFrame& frame, const std::filesystem::path& path,
                CloudFormat format);

/// Centroid-per-voxel downsampling on an origin-anchored grid of half-open
/// cells [i*cell, (i+1)*cell). Output points are ordered by voxel index.
PointCloudFrame voxel_downsample(const PointCloudFrame& frame, double cell);

/// A frame file discovered in a replay directory.
struct FrameFile {
  std::size_t index = 0;
  std::int64_t timestamp_ns = 0;
  std::filesystem::path path;
};

/// Lists files named <index>_<timestamp_ns>.<pcd|ply|csv>, sorted by index.
std::vector<FrameFile> list_frame_directory(const std::filesystem::path& dir);

std::string frame_file_name(std::size_t index, std::int64_t timestamp_ns, CloudFormat format);

}  // namespace eotrack
