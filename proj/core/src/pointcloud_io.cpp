#include "eotrack/pointcloud_io.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <regex>
#include <sstream>
#include <tuple>

#include "eotrack/error.hpp"

namespace eotrack {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  for (std::string tok; is >> tok;) out.push_back(tok);
  return out;
}

std::vector<std::string> split_char(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

double parse_double(const std::string& tok, const std::filesystem::path& path, std::size_t line_no) {
  double value = 0.0;
  const char* begin = tok.data();
  const char* end = tok.data() + tok.size();
  // from_chars does not accept a leading '+'.
  if (begin != end && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    // Out-of-range values are representable as infinities; everything else is malformed.
    if (ec == std::errc::result_out_of_range) return std::numeric_limits<double>::infinity();
    throw Error(ErrorKind::kFormat, path.string() + ":" + std::to_string(line_no) +
                                        ": cannot parse number '" + tok + "'");
  }
  return value;
}

std::ifstream open_for_read(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorKind::kIo, "file not found: " + path.string());
  }
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open: " + path.string());
  return in;
}

void push_point(LoadResult& result, double x, double y, double z) {
  if (std::isfinite(x) && std::isfinite(y) && std::isfinite(z)) {
    result.frame.points.emplace_back(x, y, z);
  } else {
    ++result.non_finite_dropped;
  }
}

// Metadata we embed as comments so that PCD/PLY files round-trip the frame header.
void parse_meta_comment(const std::string& body, PointCloudFrame& frame) {
  const auto toks = split_ws(body);
  if (toks.size() >= 2 && toks[0] == "timestamp") {
    double t = 0.0;
    const auto [p, ec] = std::from_chars(toks[1].data(), toks[1].data() + toks[1].size(), t);
    if (ec == std::errc()) frame.timestamp = t;
  } else if (toks.size() >= 2 && toks[0] == "frame_id") {
    frame.frame_id = toks[1];
  }
}

LoadResult load_pcd(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  LoadResult result;
  std::vector<std::string> fields;
  std::vector<int> counts;
  std::size_t declared_points = 0;
  bool have_points = false;
  std::string line;
  std::size_t line_no = 0;
  bool data_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      parse_meta_comment(t.substr(1), result.frame);
      continue;
    }
    auto toks = split_ws(t);
    const std::string& key = toks[0];
    if (key == "FIELDS") {
      fields.assign(toks.begin() + 1, toks.end());
    } else if (key == "COUNT") {
      counts.clear();
      for (std::size_t i = 1; i < toks.size(); ++i) counts.push_back(std::stoi(toks[i]));
    } else if (key == "POINTS") {
      if (toks.size() != 2) throw Error(ErrorKind::kFormat, path.string() + ": bad POINTS line");
      declared_points = std::stoul(toks[1]);
      have_points = true;
    } else if (key == "DATA") {
      if (toks.size() != 2) throw Error(ErrorKind::kFormat, path.string() + ": bad DATA line");
      if (toks[1] != "ascii") {
        throw Error(ErrorKind::kUnsupported,
                    path.string() + ": PCD DATA encoding '" + toks[1] + "' is not supported");
      }
      data_seen = true;
      break;
    } else if (key == "VERSION" || key == "SIZE" || key == "TYPE" || key == "WIDTH" ||
               key == "HEIGHT" || key == "VIEWPOINT") {
      continue;
    } else {
      throw Error(ErrorKind::kFormat, path.string() + ":" + std::to_string(line_no) +
                                          ": unexpected header entry '" + key + "'");
    }
  }
  if (!data_seen) throw Error(ErrorKind::kFormat, path.string() + ": missing DATA line");
  if (fields.empty()) throw Error(ErrorKind::kFormat, path.string() + ": missing FIELDS line");
  if (!have_points) throw Error(ErrorKind::kFormat, path.string() + ": missing POINTS line");
  if (counts.empty()) counts.assign(fields.size(), 1);
  if (counts.size() != fields.size()) {
    throw Error(ErrorKind::kFormat, path.string() + ": COUNT and FIELDS disagree");
  }

  // Column offset of each field, accounting for multi-count fields.
  std::array<int, 3> col{-1, -1, -1};
  int offset = 0;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (fields[i] == "x") col[0] = offset;
    if (fields[i] == "y") col[1] = offset;
    if (fields[i] == "z") col[2] = offset;
    offset += counts[i];
  }
  if (col[0] < 0 || col[1] < 0 || col[2] < 0) {
    throw Error(ErrorKind::kFormat, path.string() + ": FIELDS must include x y z");
  }
  const auto columns = static_cast<std::size_t>(offset);

  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto toks = split_ws(t);
    if (toks.size() != columns) {
      throw Error(ErrorKind::kFormat, path.string() + ":" + std::to_string(line_no) + ": expected " +
                                          std::to_string(columns) + " values");
    }
    push_point(result, parse_double(toks[col[0]], path, line_no),
               parse_double(toks[col[1]], path, line_no), parse_double(toks[col[2]], path, line_no));
    ++rows;
  }
  if (rows != declared_points) {
    throw Error(ErrorKind::kFormat, path.string() + ": POINTS declares " +
                                        std::to_string(declared_points) + " but file has " +
                                        std::to_string(rows));
  }
  return result;
}

LoadResult load_ply(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  LoadResult result;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line) || trim(line) != "ply") {
    throw Error(ErrorKind::kFormat, path.string() + ": missing 'ply' magic");
  }
  ++line_no;
  std::size_t vertex_count = 0;
  bool in_vertex = false;
  bool vertex_seen = false;
  std::vector<std::string> vertex_props;
  bool ended = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto toks = split_ws(trim(line));
    if (toks.empty()) continue;
    if (toks[0] == "format") {
      if (toks.size() < 2) throw Error(ErrorKind::kFormat, path.string() + ": bad format line");
      if (toks[1] != "ascii") {
        throw Error(ErrorKind::kUnsupported,
                    path.string() + ": PLY format '" + toks[1] + "' is not supported");
      }
    } else if (toks[0] == "comment") {
      std::string body;
      for (std::size_t i = 1; i < toks.size(); ++i) body += toks[i] + " ";
      parse_meta_comment(body, result.frame);
    } else if (toks[0] == "obj_info") {
      continue;
    } else if (toks[0] == "element") {
      if (toks.size() != 3) throw Error(ErrorKind::kFormat, path.string() + ": bad element line");
      in_vertex = toks[1] == "vertex";
      if (in_vertex) {
        vertex_count = std::stoul(toks[2]);
        vertex_seen = true;
      } else if (!vertex_seen) {
        throw Error(ErrorKind::kUnsupported,
                    path.string() + ": elements before 'vertex' are not supported");
      }
    } else if (toks[0] == "property") {
      if (in_vertex) {
        if (toks.size() < 3 || toks[1] == "list") {
          throw Error(ErrorKind::kFormat, path.string() + ": unsupported vertex property");
        }
        vertex_props.push_back(toks.back());
      }
    } else if (toks[0] == "end_header") {
      ended = true;
      break;
    } else {
      throw Error(ErrorKind::kFormat, path.string() + ":" + std::to_string(line_no) +
                                          ": unexpected header entry '" + toks[0] + "'");
    }
  }
  if (!ended) throw Error(ErrorKind::kFormat, path.string() + ": missing end_header");
  if (!vertex_seen) throw Error(ErrorKind::kFormat, path.string() + ": missing vertex element");
  std::array<std::size_t, 3> col{};
  const std::array<const char*, 3> names{"x", "y", "z"};
  for (int a = 0; a < 3; ++a) {
    const auto it = std::find(vertex_props.begin(), vertex_props.end(), names[a]);
    if (it == vertex_props.end()) {
      throw Error(ErrorKind::kFormat, path.string() + ": vertex element lacks property " + names[a]);
    }
    col[a] = static_cast<std::size_t>(it - vertex_props.begin());
  }
  for (std::size_t i = 0; i < vertex_count; ++i) {
    if (!std::getline(in, line)) {
      throw Error(ErrorKind::kFormat, path.string() + ": expected " + std::to_string(vertex_count) +
                                          " vertices, got " + std::to_string(i));
    }
    ++line_no;
    const auto toks = split_ws(trim(line));
    if (toks.size() != vertex_props.size()) {
      throw Error(ErrorKind::kFormat, path.string() + ":" + std::to_string(line_no) +
                                          ": wrong number of vertex values");
    }
    push_point(result, parse_double(toks[col[0]], path, line_no),
               parse_double(toks[col[1]], path, line_no), parse_double(toks[col[2]], path, line_no));
  }
  return result;
}

LoadResult load_csv(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  LoadResult result;
  std::string line;
  std::size_t line_no = 0;
  std::array<std::size_t, 3> col{};
  std::size_t columns = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      parse_meta_comment(t.substr(1), result.frame);
      continue;
    }
    const auto toks = split_char(t, ',');
    if (!header) {
      const std::array<const char*, 3> names{"x", "y", "z"};
      for (int a = 0; a < 3; ++a) {
        const auto it = std::find(toks.begin(), toks.end(), names[a]);
        if (it == toks.end()) {
          throw Error(ErrorKind::kFormat, path.string() + ": CSV header must name x,y,z");
        }
        col[a] = static_cast<std::size_t>(it - toks.begin());
      }
      columns = toks.size();
      header = true;
      continue;
    }
    if (toks.size() != columns) {
      throw Error(ErrorKind::kFormat, path.string() + ":" + std::to_string(line_no) + ": expected " +
                                          std::to_string(columns) + " columns");
    }
    push_point(result, parse_double(toks[col[0]], path, line_no),
               parse_double(toks[col[1]], path, line_no), parse_double(toks[col[2]], path, line_no));
  }
  if (!header) throw Error(ErrorKind::kFormat, path.string() + ": missing CSV header");
  return result;
}

std::string shortest(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

std::string fixed9(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] =
      std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed, 9);
  return std::string(buf.data(), ptr);
}

}  // namespace

CloudFormat format_from_extension(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".pcd") return CloudFormat::kPcdAscii;
  if (ext == ".ply") return CloudFormat::kPlyAscii;
  if (ext == ".csv") return CloudFormat::kCsv;
  throw Error(ErrorKind::kUnsupported, "unknown point cloud extension: " + path.string());
}

const char* extension_for(CloudFormat format) noexcept {
  switch (format) {
    case CloudFormat::kPcdAscii: return "pcd";
    case CloudFormat::kPlyAscii: return "ply";
    case CloudFormat::kCsv: return "csv";
  }
  return "pcd";
}

LoadResult load_frame(const std::filesystem::path& path, CloudFormat format) {
  switch (format) {
    case CloudFormat::kPcdAscii: return load_pcd(path);
    case CloudFormat::kPlyAscii: return load_ply(path);
    case CloudFormat::kCsv: return load_csv(path);
  }
  throw Error(ErrorKind::kUnsupported, "unknown format");
}

void save_frame(const PointCloudFrame& frame, const std::filesystem::path& path,
                CloudFormat format) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot open for writing: " + path.string());
  const std::string frame_id = frame.frame_id.empty() ? "sensor" : frame.frame_id;
  const std::size_t n = frame.points.size();
  switch (format) {
    case CloudFormat::kPcdAscii:
      out << "# .PCD v0.7 - Point Cloud Data file format\n"
          << "# timestamp " << shortest(frame.timestamp) << "\n"
          << "# frame_id " << frame_id << "\n"
          << "VERSION 0.7\nFIELDS x y z\nSIZE 8 8 8\nTYPE F F F\nCOUNT 1 1 1\n"
          << "WIDTH " << n << "\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\n"
          << "POINTS " << n << "\nDATA ascii\n";
      for (const auto& p : frame.points) {
        out << fixed9(p.x()) << ' ' << fixed9(p.y()) << ' ' << fixed9(p.z()) << '\n';
      }
      break;
    case CloudFormat::kPlyAscii:
      out << "ply\nformat ascii 1.0\n"
          << "comment timestamp " << shortest(frame.timestamp) << "\n"
          << "comment frame_id " << frame_id << "\n"
          << "element vertex " << n << "\n"
          << "property double x\nproperty double y\nproperty double z\nend_header\n";
      for (const auto& p : frame.points) {
        out << fixed9(p.x()) << ' ' << fixed9(p.y()) << ' ' << fixed9(p.z()) << '\n';
      }
      break;
    case CloudFormat::kCsv:
      out << "# timestamp " << shortest(frame.timestamp) << "\n"
          << "# frame_id " << frame_id << "\n"
          << "x,y,z\n";
      for (const auto& p : frame.points) {
        out << shortest(p.x()) << ',' << shortest(p.y()) << ',' << shortest(p.z()) << '\n';
      }
      break;
  }
  out.flush();
  if (!out) throw Error(ErrorKind::kIo, "write failed: " + path.string());
}

PointCloudFrame voxel_downsample(const PointCloudFrame& frame, double cell) {
  if (!(cell > 0.0) || !std::isfinite(cell)) {
    throw Error(ErrorKind::kInvalidArgument, "voxel cell size must be positive");
  }
  using Key = std::tuple<std::int64_t, std::int64_t, std::int64_t>;
  const std::size_t n = frame.points.size();
  std::vector<Key> keys(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = frame.points[i];
    keys[i] = {static_cast<std::int64_t>(std::floor(p.x() / cell)),
               static_cast<std::int64_t>(std::floor(p.y() / cell)),
               static_cast<std::int64_t>(std::floor(p.z() / cell))};
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });

  PointCloudFrame out{frame.timestamp, {}, frame.frame_id};
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    Point3 sum = Point3::Zero();
    while (j < n && keys[order[j]] == keys[order[i]]) {
      sum += frame.points[order[j]];
      ++j;
    }
    out.points.push_back(sum / static_cast<double>(j - i));
    i = j;
  }
  return out;
}

std::vector<FrameFile> list_frame_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorKind::kIo, "not a directory: " + dir.string());
  }
  static const std::regex pattern(R"(^(\d+)_(\d+)\.(pcd|ply|csv)$)");
  std::vector<FrameFile> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto name = entry.path().filename().string();
    std::smatch m;
    if (!std::regex_match(name, m, pattern)) continue;
    files.push_back({std::stoul(m[1].str()), std::stoll(m[2].str()), entry.path()});
  }
  std::sort(files.begin(), files.end(),
            [](const FrameFile& a, const FrameFile& b) { return a.index < b.index; });
  return files;
}

std::string frame_file_name(std::size_t index, std::int64_t timestamp_ns, CloudFormat format) {
  std::ostringstream os;
  os << std::setw(6) << std::setfill('0') << index << '_' << timestamp_ns << '.'
     << extension_for(format);
  return os.str();
}

}  // namespace eotrack
