#include "sba/io.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <Eigen/Geometry>
#include <Eigen/SVD>

namespace sba {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write file: " + path);
  return out;
}

bool finite3(const Vec3& p) {
  return std::isfinite(p.x()) && std::isfinite(p.y()) && std::isfinite(p.z());
}

std::vector<std::string> split_tokens(const std::string& line) {
  std::vector<std::string> tokens;
  std::istringstream ss(line);
  std::string t;
  while (ss >> t) tokens.push_back(t);
  return tokens;
}

double parse_double(const std::string& token, const std::string& path, std::size_t line_no) {
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0') {
    throw InputError(path + ":" + std::to_string(line_no) + ": not a number: '" + token + "'");
  }
  return v;
}

// ---------------------------------------------------------------------------
// kitti-bin

Cloud read_kitti_bin(const std::string& path) {
  const std::string bytes = read_file(path);
  if (bytes.empty()) throw InputError(path + ": empty file");
  constexpr std::size_t kRecord = 4 * sizeof(float);
  if (bytes.size() % kRecord != 0) {
    const std::size_t offset = bytes.size() - bytes.size() % kRecord;
    throw InputError(path + ": truncated kitti-bin record at byte offset " + std::to_string(offset));
  }

  Cloud cloud;
  const std::size_t n = bytes.size() / kRecord;
  cloud.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    float xyzi[4];
    std::memcpy(xyzi, bytes.data() + i * kRecord, kRecord);
    const Vec3 p(xyzi[0], xyzi[1], xyzi[2]);
    if (finite3(p)) {
      cloud.points.push_back(p);
    } else {
      ++cloud.dropped_nonfinite;
    }
  }
  if (cloud.points.empty()) throw InputError(path + ": no finite points");
  return cloud;
}

void write_kitti_bin(const Cloud& cloud, const std::string& path) {
  auto out = open_for_write(path);
  for (const Vec3& p : cloud.points) {
    const float xyzi[4] = {static_cast<float>(p.x()), static_cast<float>(p.y()),
                           static_cast<float>(p.z()), 0.0f};
    out.write(reinterpret_cast<const char*>(xyzi), sizeof(xyzi));
  }
}

// ---------------------------------------------------------------------------
// ply

struct PlyProperty {
  std::string name;
  std::string type;
  std::size_t size = 0;
  std::size_t offset = 0;  // within a binary record
};

struct PlyHeader {
  bool binary = false;
  std::size_t vertex_count = 0;
  std::vector<PlyProperty> properties;
  std::size_t data_start = 0;  // byte offset past end_header
  std::size_t stride = 0;
};

std::size_t ply_type_size(const std::string& type) {
  if (type == "char" || type == "int8" || type == "uchar" || type == "uint8") return 1;
  if (type == "short" || type == "int16" || type == "ushort" || type == "uint16") return 2;
  if (type == "int" || type == "int32" || type == "uint" || type == "uint32") return 4;
  if (type == "float" || type == "float32") return 4;
  if (type == "double" || type == "float64") return 8;
  return 0;
}

bool ply_type_is_real(const std::string& type) {
  return type == "float" || type == "float32" || type == "double" || type == "float64";
}

PlyHeader parse_ply_header(const std::string& bytes, const std::string& path) {
  PlyHeader header;
  std::size_t pos = 0;
  bool in_vertex = false;
  bool seen_vertex = false;
  bool seen_format = false;
  std::size_t line_no = 0;

  auto next_line = [&]() -> std::string {
    if (pos >= bytes.size()) throw InputError(path + ": unterminated ply header");
    std::size_t eol = bytes.find('\n', pos);
    if (eol == std::string::npos) eol = bytes.size();
    std::string line = bytes.substr(pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = eol + 1;
    ++line_no;
    return line;
  };

  if (next_line() != "ply") throw InputError(path + ": missing ply magic");

  while (true) {
    const std::string line = next_line();
    const auto tokens = split_tokens(line);
    if (tokens.empty() || tokens[0] == "comment" || tokens[0] == "obj_info") continue;

    if (tokens[0] == "format") {
      if (tokens.size() < 2) throw InputError(path + ": malformed format line");
      if (tokens[1] == "ascii") {
        header.binary = false;
      } else if (tokens[1] == "binary_little_endian") {
        header.binary = true;
      } else {
        throw InputError(path + ": unsupported ply format '" + tokens[1] + "'");
      }
      seen_format = true;
    } else if (tokens[0] == "element") {
      if (tokens.size() < 3) throw InputError(path + ": malformed element line");
      if (tokens[1] == "vertex") {
        if (seen_vertex) throw InputError(path + ": duplicate vertex element");
        header.vertex_count = static_cast<std::size_t>(parse_double(tokens[2], path, line_no));
        in_vertex = true;
        seen_vertex = true;
      } else {
        if (!seen_vertex) {
          throw InputError(path + ": unsupported ply layout (vertex must be the first element)");
        }
        in_vertex = false;
      }
    } else if (tokens[0] == "property") {
      if (!in_vertex) continue;  // properties of trailing elements are ignored
      if (tokens.size() >= 2 && tokens[1] == "list") {
        throw InputError(path + ": unsupported ply property type 'list'");
      }
      if (tokens.size() < 3) throw InputError(path + ": malformed property line");
      PlyProperty prop;
      prop.type = tokens[1];
      prop.name = tokens[2];
      prop.size = ply_type_size(prop.type);
      if (prop.size == 0) {
        throw InputError(path + ": unsupported ply property type '" + prop.type + "'");
      }
      prop.offset = header.stride;
      header.stride += prop.size;
      header.properties.push_back(prop);
    } else if (tokens[0] == "end_header") {
      break;
    } else {
      throw InputError(path + ": unsupported ply header line '" + line + "'");
    }
  }

  if (!seen_format) throw InputError(path + ": ply header missing format line");
  if (!seen_vertex) throw InputError(path + ": ply header missing vertex element");
  header.data_start = pos;
  return header;
}

int find_property(const PlyHeader& header, const std::string& name) {
  for (std::size_t i = 0; i < header.properties.size(); ++i) {
    if (header.properties[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

double read_binary_real(const char* base, const PlyProperty& prop) {
  if (prop.size == 4) {
    float v;
    std::memcpy(&v, base + prop.offset, 4);
    return v;
  }
  double v;
  std::memcpy(&v, base + prop.offset, 8);
  return v;
}

// Reads the named real-valued properties of every vertex.
std::vector<std::vector<double>> read_ply_columns(const std::string& path,
                                                  const std::vector<std::string>& names) {
  const std::string bytes = read_file(path);
  if (bytes.empty()) throw InputError(path + ": empty file");
  const PlyHeader header = parse_ply_header(bytes, path);

  std::vector<int> cols(names.size());
  for (std::size_t c = 0; c < names.size(); ++c) {
    cols[c] = find_property(header, names[c]);
    if (cols[c] < 0) throw InputError(path + ": ply is missing vertex property '" + names[c] + "'");
    const auto& prop = header.properties[static_cast<std::size_t>(cols[c])];
    if (!ply_type_is_real(prop.type)) {
      throw InputError(path + ": unsupported ply property type '" + prop.type + "' for '" +
                       names[c] + "'");
    }
  }

  std::vector<std::vector<double>> rows;
  rows.reserve(header.vertex_count);

  if (header.binary) {
    const std::size_t need = header.vertex_count * header.stride;
    if (bytes.size() - header.data_start < need) {
      const std::size_t have = bytes.size() - header.data_start;
      const std::size_t offset = header.data_start + have - have % header.stride;
      throw InputError(path + ": truncated ply payload at byte offset " + std::to_string(offset));
    }
    for (std::size_t i = 0; i < header.vertex_count; ++i) {
      const char* rec = bytes.data() + header.data_start + i * header.stride;
      std::vector<double> row(names.size());
      for (std::size_t c = 0; c < names.size(); ++c) {
        row[c] = read_binary_real(rec, header.properties[static_cast<std::size_t>(cols[c])]);
      }
      rows.push_back(std::move(row));
    }
  } else {
    std::istringstream ss(bytes.substr(header.data_start));
    std::string line;
    std::size_t line_no = 0;
    while (rows.size() < header.vertex_count && std::getline(ss, line)) {
      ++line_no;
      const auto tokens = split_tokens(line);
      if (tokens.empty()) continue;
      if (tokens.size() < header.properties.size()) {
        throw InputError(path + ": ply vertex row " + std::to_string(rows.size()) +
                         " has too few values");
      }
      std::vector<double> row(names.size());
      for (std::size_t c = 0; c < names.size(); ++c) {
        row[c] = parse_double(tokens[static_cast<std::size_t>(cols[c])], path, line_no);
      }
      rows.push_back(std::move(row));
    }
    if (rows.size() < header.vertex_count) {
      throw InputError(path + ": ply declares " + std::to_string(header.vertex_count) +
                       " vertices but holds " + std::to_string(rows.size()));
    }
  }
  return rows;
}

Cloud read_ply_cloud(const std::string& path) {
  Cloud cloud;
  for (const auto& row : read_ply_columns(path, {"x", "y", "z"})) {
    const Vec3 p(row[0], row[1], row[2]);
    if (finite3(p)) {
      cloud.points.push_back(p);
    } else {
      ++cloud.dropped_nonfinite;
    }
  }
  if (cloud.points.empty()) throw InputError(path + ": no finite points");
  return cloud;
}

void write_ply_header(std::ofstream& out, std::size_t count,
                      const std::vector<std::string>& property_names) {
  out << "ply\nformat ascii 1.0\nelement vertex " << count << "\n";
  for (const auto& name : property_names) out << "property float " << name << "\n";
  out << "end_header\n";
}

void write_ply_cloud(const Cloud& cloud, const std::string& path) {
  auto out = open_for_write(path);
  write_ply_header(out, cloud.points.size(), {"x", "y", "z"});
  for (const Vec3& p : cloud.points) {
    out << format_g9(p.x()) << ' ' << format_g9(p.y()) << ' ' << format_g9(p.z()) << '\n';
  }
}

// ---------------------------------------------------------------------------
// xyz text

Cloud read_xyz_text(const std::string& path) {
  const std::string bytes = read_file(path);
  if (bytes.empty()) throw InputError(path + ": empty file");

  Cloud cloud;
  std::istringstream ss(bytes);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tokens = split_tokens(line);
    if (tokens.empty()) continue;
    if (tokens.size() < 3) {
      throw InputError(path + ":" + std::to_string(line_no) + ": expected x y z");
    }
    const Vec3 p(parse_double(tokens[0], path, line_no), parse_double(tokens[1], path, line_no),
                 parse_double(tokens[2], path, line_no));
    if (finite3(p)) {
      cloud.points.push_back(p);
    } else {
      ++cloud.dropped_nonfinite;
    }
  }
  if (cloud.points.empty()) throw InputError(path + ": no finite points");
  return cloud;
}

void write_xyz_text(const Cloud& cloud, const std::string& path) {
  auto out = open_for_write(path);
  for (const Vec3& p : cloud.points) {
    out << format_g9(p.x()) << ' ' << format_g9(p.y()) << ' ' << format_g9(p.z()) << '\n';
  }
}

// ---------------------------------------------------------------------------
// trajectories

Trajectory read_tum(const std::string& path) {
  const std::string bytes = read_file(path);
  if (bytes.empty()) throw InputError(path + ": empty file");

  Trajectory traj;
  std::istringstream ss(bytes);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tokens = split_tokens(line);
    if (tokens.size() != 8) {
      throw InputError(path + ":" + std::to_string(line_no) +
                       ": expected 'timestamp tx ty tz qx qy qz qw'");
    }
    double v[8];
    for (int k = 0; k < 8; ++k) v[k] = parse_double(tokens[static_cast<std::size_t>(k)], path, line_no);

    Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);  // (w, x, y, z)
    const double norm = q.norm();
    if (std::abs(norm - 1.0) > 1e-3) {
      throw InputError(path + ":" + std::to_string(line_no) + ": malformed pose, quaternion norm " +
                       format_g9(norm));
    }
    q.normalize();

    if (!traj.times.empty() && v[0] <= traj.times.back()) {
      throw InputError(path + ":" + std::to_string(line_no) +
                       ": non-monotone timestamps (ordering error)");
    }
    Isometry3 pose = Isometry3::Identity();
    pose.linear() = q.toRotationMatrix();
    pose.translation() = Vec3(v[1], v[2], v[3]);
    traj.times.push_back(v[0]);
    traj.poses.push_back(pose);
  }
  if (traj.empty()) throw InputError(path + ": no poses");
  return traj;
}

Trajectory read_kitti_poses(const std::string& path) {
  const std::string bytes = read_file(path);
  if (bytes.empty()) throw InputError(path + ": empty file");

  Trajectory traj;
  std::istringstream ss(bytes);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tokens = split_tokens(line);
    if (tokens.size() != 12) {
      throw InputError(path + ":" + std::to_string(line_no) + ": expected 12 values of a 3x4 matrix");
    }
    double v[12];
    for (int k = 0; k < 12; ++k) v[k] = parse_double(tokens[static_cast<std::size_t>(k)], path, line_no);

    Mat3 rot;
    rot << v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10];
    const Mat3 gram_defect = rot.transpose() * rot - Mat3::Identity();
    if (gram_defect.cwiseAbs().maxCoeff() > 1e-3 || rot.determinant() < 0.0) {
      throw InputError(path + ":" + std::to_string(line_no) + ": malformed pose, rotation block is not orthonormal");
    }
    // Re-orthonormalize the printed rotation (polar projection).
    Eigen::JacobiSVD<Mat3> svd(rot, Eigen::ComputeFullU | Eigen::ComputeFullV);
    rot = svd.matrixU() * svd.matrixV().transpose();

    Isometry3 pose = Isometry3::Identity();
    pose.linear() = rot;
    pose.translation() = Vec3(v[3], v[7], v[11]);
    traj.times.push_back(static_cast<double>(traj.times.size()));
    traj.poses.push_back(pose);
  }
  if (traj.empty()) throw InputError(path + ": no poses");
  return traj;
}

void write_tum(const Trajectory& traj, const std::string& path) {
  auto out = open_for_write(path);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    Eigen::Quaterniond q(traj.poses[i].linear());
    q.normalize();
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();
    const Vec3& t = traj.poses[i].translation();
    out << format_g9(traj.times[i]) << ' ' << format_g9(t.x()) << ' ' << format_g9(t.y()) << ' '
        << format_g9(t.z()) << ' ' << format_g9(q.x()) << ' ' << format_g9(q.y()) << ' '
        << format_g9(q.z()) << ' ' << format_g9(q.w()) << '\n';
  }
}

void write_kitti_poses(const Trajectory& traj, const std::string& path) {
  auto out = open_for_write(path);
  for (const Isometry3& pose : traj.poses) {
    const Mat3& r = pose.linear();
    const Vec3& t = pose.translation();
    out << format_g9(r(0, 0)) << ' ' << format_g9(r(0, 1)) << ' ' << format_g9(r(0, 2)) << ' '
        << format_g9(t.x()) << ' ' << format_g9(r(1, 0)) << ' ' << format_g9(r(1, 1)) << ' '
        << format_g9(r(1, 2)) << ' ' << format_g9(t.y()) << ' ' << format_g9(r(2, 0)) << ' '
        << format_g9(r(2, 1)) << ' ' << format_g9(r(2, 2)) << ' ' << format_g9(t.z()) << '\n';
  }
}

}  // namespace

std::string format_g9(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", value);
  return buf;
}

CloudFormat cloud_format_from_string(const std::string& name) {
  if (name == "kitti-bin") return CloudFormat::KittiBin;
  if (name == "ply") return CloudFormat::Ply;
  if (name == "xyz-text" || name == "xyz") return CloudFormat::XyzText;
  throw InputError("unknown cloud format: " + name);
}

TrajectoryFormat trajectory_format_from_string(const std::string& name) {
  if (name == "tum") return TrajectoryFormat::Tum;
  if (name == "kitti-poses" || name == "kitti") return TrajectoryFormat::KittiPoses;
  throw InputError("unknown trajectory format: " + name);
}

std::string to_string(CloudFormat format) {
  switch (format) {
    case CloudFormat::KittiBin: return "kitti-bin";
    case CloudFormat::Ply: return "ply";
    case CloudFormat::XyzText: return "xyz-text";
  }
  return "?";
}

std::string to_string(TrajectoryFormat format) {
  return format == TrajectoryFormat::Tum ? "tum" : "kitti-poses";
}

Cloud read_cloud(const std::string& path, CloudFormat format) {
  switch (format) {
    case CloudFormat::KittiBin: return read_kitti_bin(path);
    case CloudFormat::Ply: return read_ply_cloud(path);
    case CloudFormat::XyzText: return read_xyz_text(path);
  }
  throw InputError("unknown cloud format");
}

void write_cloud(const Cloud& cloud, const std::string& path, CloudFormat format) {
  switch (format) {
    case CloudFormat::KittiBin: write_kitti_bin(cloud, path); return;
    case CloudFormat::Ply: write_ply_cloud(cloud, path); return;
    case CloudFormat::XyzText: write_xyz_text(cloud, path); return;
  }
}

Trajectory read_trajectory(const std::string& path, TrajectoryFormat format) {
  return format == TrajectoryFormat::Tum ? read_tum(path) : read_kitti_poses(path);
}

void write_trajectory(const Trajectory& trajectory, const std::string& path,
                      TrajectoryFormat format) {
  if (format == TrajectoryFormat::Tum) {
    write_tum(trajectory, path);
  } else {
    write_kitti_poses(trajectory, path);
  }
}

void write_surfel_map(const std::vector<Surfel>& surfels, const std::string& path) {
  auto out = open_for_write(path);
  write_ply_header(out, surfels.size(), {"x", "y", "z", "nx", "ny", "nz", "radius"});
  for (const Surfel& s : surfels) {
    out << format_g9(s.center.x()) << ' ' << format_g9(s.center.y()) << ' '
        << format_g9(s.center.z()) << ' ' << format_g9(s.normal.x()) << ' '
        << format_g9(s.normal.y()) << ' ' << format_g9(s.normal.z()) << ' '
        << format_g9(s.radius) << '\n';
  }
}

std::vector<Surfel> read_surfel_map(const std::string& path) {
  std::vector<Surfel> surfels;
  for (const auto& row : read_ply_columns(path, {"x", "y", "z", "nx", "ny", "nz", "radius"})) {
    Surfel s;
    s.center = Vec3(row[0], row[1], row[2]);
    s.normal = Vec3(row[3], row[4], row[5]);
    s.radius = row[6];
    s.id = static_cast<int>(surfels.size());
    surfels.push_back(std::move(s));
  }
  return surfels;
}

}  // namespace sba
