#include "delight/scene.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include <Eigen/Geometry>
#include <json.hpp>

#include "delight/error.hpp"

namespace delight {

using nlohmann::json;

void CameraPose::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw InvalidArgument("camera: fx and fy must be positive");
  const Mat3 gram = rotation * rotation.transpose();
  if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9 ||
      std::abs(rotation.determinant() - 1.0) > 1e-9) {
    throw InvalidArgument("camera: rotation is not orthonormal with determinant +1");
  }
  if (!translation.allFinite()) throw InvalidArgument("camera: non-finite translation");
}

Vec3 CameraPose::ray_direction(double u, double v) const {
  const Vec3 cam((u - cx) / fx, (v - cy) / fy, 1.0);
  return (rotation.transpose() * cam).normalized();
}

std::optional<Vec2> CameraPose::project(const Vec3& world) const {
  const Vec3 p = rotation * world + translation;
  if (p.z() <= 0.0) return std::nullopt;
  return Vec2(fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy);
}

CameraPose CameraPose::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fx,
                               double fy, double cx, double cy) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-12) right = forward.cross(Vec3::UnitY());
  right.normalize();
  const Vec3 down = forward.cross(right);
  CameraPose pose;
  pose.fx = fx;
  pose.fy = fy;
  pose.cx = cx;
  pose.cy = cy;
  pose.rotation.row(0) = right.transpose();
  pose.rotation.row(1) = down.transpose();
  pose.rotation.row(2) = forward.transpose();
  pose.translation = -pose.rotation * eye;
  return pose;
}

void TriangleMesh::validate() const {
  for (const auto& f : faces) {
    for (auto idx : f) {
      if (idx >= vertices.size()) throw InvalidArgument("mesh: face index out of range");
    }
  }
  if (!vertex_normals.empty()) {
    if (vertex_normals.size() != vertices.size()) {
      throw InvalidArgument("mesh: normal count differs from vertex count");
    }
    for (const auto& n : vertex_normals) {
      if (std::abs(n.norm() - 1.0) > 1e-6) throw InvalidArgument("mesh: non-unit vertex normal");
    }
  }
}

Vec3 TriangleMesh::face_normal(std::size_t f) const {
  const auto& tri = faces[f];
  const Vec3 e1 = vertices[tri[1]] - vertices[tri[0]];
  const Vec3 e2 = vertices[tri[2]] - vertices[tri[0]];
  return e1.cross(e2).normalized();
}

void compute_vertex_normals(TriangleMesh& mesh) {
  std::vector<Vec3> acc(mesh.vertices.size(), Vec3::Zero());
  for (const auto& tri : mesh.faces) {
    // The unnormalized cross product has length 2*area.
    const Vec3 n = (mesh.vertices[tri[1]] - mesh.vertices[tri[0]])
                       .cross(mesh.vertices[tri[2]] - mesh.vertices[tri[0]]);
    for (auto idx : tri) acc[idx] += n;
  }
  mesh.vertex_normals.resize(mesh.vertices.size());
  for (std::size_t i = 0; i < acc.size(); ++i) {
    const double len = acc[i].norm();
    mesh.vertex_normals[i] = len > 0.0 ? Vec3(acc[i] / len) : Vec3::UnitZ();
  }
}

// ---------------------------------------------------------------------------

UtcTime UtcTime::parse(const std::string& iso) {
  UtcTime t;
  char tsep = 0, zone = 0;
  int consumed = 0;
  const int n = std::sscanf(iso.c_str(), "%4d-%2d-%2d%c%2d:%2d:%lf%c%n", &t.year, &t.month,
                            &t.day, &tsep, &t.hour, &t.minute, &t.second, &zone, &consumed);
  if (n < 8 || (tsep != 'T' && tsep != ' ') || zone != 'Z' ||
      static_cast<std::size_t>(consumed) != iso.size()) {
    throw InvalidArgument("timestamp must look like YYYY-MM-DDThh:mm:ssZ, got '" + iso + "'");
  }
  namespace chr = std::chrono;
  const chr::year_month_day ymd{chr::year{t.year}, chr::month{static_cast<unsigned>(t.month)},
                                chr::day{static_cast<unsigned>(t.day)}};
  if (!ymd.ok() || t.hour < 0 || t.hour > 23 || t.minute < 0 || t.minute > 59 ||
      t.second < 0.0 || t.second >= 61.0) {
    throw InvalidArgument("timestamp out of range: '" + iso + "'");
  }
  return t;
}

std::string UtcTime::iso() const {
  char buf[40];
  const double whole = std::floor(second);
  if (second == whole) {
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02dZ", year, month, day, hour,
                  minute, static_cast<int>(whole));
  } else {
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%09.6fZ", year, month, day, hour,
                  minute, second);
  }
  return buf;
}

double UtcTime::julian_day() const {
  namespace chr = std::chrono;
  const chr::sys_days d = chr::year_month_day{chr::year{year},
                                              chr::month{static_cast<unsigned>(month)},
                                              chr::day{static_cast<unsigned>(day)}};
  // 1970-01-01T00:00Z is JD 2440587.5.
  const double days = static_cast<double>(d.time_since_epoch().count());
  return 2440587.5 + days + (hour + (minute + second / 60.0) / 60.0) / 24.0;
}

UtcTime UtcTime::plus_seconds(double seconds) const {
  namespace chr = std::chrono;
  const chr::sys_days d = chr::year_month_day{chr::year{year},
                                              chr::month{static_cast<unsigned>(month)},
                                              chr::day{static_cast<unsigned>(day)}};
  const double total = static_cast<double>(d.time_since_epoch().count()) * 86400.0 +
                       hour * 3600.0 + minute * 60.0 + second + seconds;
  const double day_count = std::floor(total / 86400.0);
  double rem = total - day_count * 86400.0;
  const chr::year_month_day ymd{chr::sys_days{chr::days{static_cast<long>(day_count)}}};
  UtcTime out;
  out.year = static_cast<int>(ymd.year());
  out.month = static_cast<int>(static_cast<unsigned>(ymd.month()));
  out.day = static_cast<int>(static_cast<unsigned>(ymd.day()));
  out.hour = static_cast<int>(rem / 3600.0);
  rem -= out.hour * 3600.0;
  out.minute = static_cast<int>(rem / 60.0);
  out.second = rem - out.minute * 60.0;
  return out;
}

void CaptureMeta::validate() const {
  if (!(latitude >= -90.0 && latitude <= 90.0)) throw InvalidArgument("latitude out of [-90, 90]");
  if (!(longitude >= -180.0 && longitude <= 180.0)) {
    throw InvalidArgument("longitude out of [-180, 180]");
  }
  if (timestamp_utc.year < 1900 || timestamp_utc.year > 2100) {
    throw InvalidArgument("timestamp outside years 1900-2100");
  }
  const Mat3 gram = world_from_enu * world_from_enu.transpose();
  if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9 ||
      std::abs(world_from_enu.determinant() - 1.0) > 1e-9) {
    throw InvalidArgument("frame_convention must be a proper rotation");
  }
}

// ---------------------------------------------------------------------------

namespace {

json read_json(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("missing file: " + file.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError(file.string() + ": invalid JSON: " + e.what());
  }
}

void write_json(const json& doc, const std::filesystem::path& file) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file);
  if (!out) throw IoError("cannot write " + file.string());
  out << doc.dump(2) << '\n';
}

void require_keys(const json& obj, const std::set<std::string>& required,
                  const std::set<std::string>& optional, const std::string& where) {
  if (!obj.is_object()) throw IoError(where + ": expected a JSON object");
  for (const auto& key : required) {
    if (!obj.contains(key)) throw IoError(where + ": missing key '" + key + "'");
  }
  for (const auto& [key, value] : obj.items()) {
    if (!required.count(key) && !optional.count(key)) {
      throw IoError(where + ": unknown key '" + key + "'");
    }
  }
}

double number_at(const json& obj, const std::string& key, const std::string& where) {
  const auto& v = obj.at(key);
  if (!v.is_number()) throw IoError(where + ": '" + key + "' must be a number");
  return v.get<double>();
}

template <int N>
Eigen::Matrix<double, N, 1> numbers_at(const json& obj, const std::string& key,
                                       const std::string& where) {
  const auto& v = obj.at(key);
  if (!v.is_array() || v.size() != N) {
    throw IoError(where + ": '" + key + "' must be an array of " + std::to_string(N) +
                  " numbers");
  }
  Eigen::Matrix<double, N, 1> out;
  for (int i = 0; i < N; ++i) {
    if (!v[i].is_number()) throw IoError(where + ": '" + key + "' must hold numbers");
    out[i] = v[i].get<double>();
  }
  return out;
}

Mat3 row_major(const Eigen::Matrix<double, 9, 1>& v) {
  Mat3 m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = v[r * 3 + c];
  return m;
}

json row_major_json(const Mat3& m) {
  json arr = json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) arr.push_back(m(r, c));
  return arr;
}

}  // namespace

CaptureMeta load_meta(const std::filesystem::path& file) {
  const json doc = read_json(file);
  const std::string where = file.string();
  require_keys(doc, {"latitude", "longitude", "timestamp_utc"}, {"frame_convention"}, where);
  CaptureMeta meta;
  meta.latitude = number_at(doc, "latitude", where);
  meta.longitude = number_at(doc, "longitude", where);
  if (!doc.at("timestamp_utc").is_string()) throw IoError(where + ": timestamp_utc must be a string");
  try {
    meta.timestamp_utc = UtcTime::parse(doc.at("timestamp_utc").get<std::string>());
    if (doc.contains("frame_convention")) {
      meta.world_from_enu = row_major(numbers_at<9>(doc, "frame_convention", where));
    }
    meta.validate();
  } catch (const InvalidArgument& e) {
    throw IoError(where + ": " + e.what());
  }
  return meta;
}

void write_meta(const CaptureMeta& meta, const std::filesystem::path& file) {
  json doc = {{"latitude", meta.latitude},
              {"longitude", meta.longitude},
              {"timestamp_utc", meta.timestamp_utc.iso()}};
  if (!meta.world_from_enu.isIdentity(0.0)) {
    doc["frame_convention"] = row_major_json(meta.world_from_enu);
  }
  write_json(doc, file);
}

std::vector<CameraEntry> load_cameras(const std::filesystem::path& file) {
  const json doc = read_json(file);
  const std::string where = file.string();
  require_keys(doc, {"images"}, {}, where);
  if (!doc.at("images").is_array()) throw IoError(where + ": 'images' must be an array");
  std::vector<CameraEntry> entries;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < doc.at("images").size(); ++i) {
    const json& e = doc.at("images")[i];
    const std::string at = where + ": images[" + std::to_string(i) + "]";
    require_keys(e, {"file", "fx", "fy", "cx", "cy", "R", "t"}, {}, at);
    if (!e.at("file").is_string()) throw IoError(at + ": 'file' must be a string");
    CameraEntry entry;
    entry.file = e.at("file").get<std::string>();
    if (!seen.insert(entry.file).second) throw IoError(at + ": duplicate file " + entry.file);
    entry.camera.fx = number_at(e, "fx", at);
    entry.camera.fy = number_at(e, "fy", at);
    entry.camera.cx = number_at(e, "cx", at);
    entry.camera.cy = number_at(e, "cy", at);
    entry.camera.rotation = row_major(numbers_at<9>(e, "R", at));
    entry.camera.translation = numbers_at<3>(e, "t", at);
    try {
      entry.camera.validate();
    } catch (const InvalidArgument& err) {
      throw IoError(at + " (" + entry.file + "): " + err.what());
    }
    entries.push_back(std::move(entry));
  }
  return entries;
}

void write_cameras(std::span<const CameraEntry> entries, const std::filesystem::path& file) {
  json images = json::array();
  for (const auto& e : entries) {
    const auto& c = e.camera;
    images.push_back({{"file", e.file},
                      {"fx", c.fx},
                      {"fy", c.fy},
                      {"cx", c.cx},
                      {"cy", c.cy},
                      {"R", row_major_json(c.rotation)},
                      {"t", {c.translation.x(), c.translation.y(), c.translation.z()}}});
  }
  write_json({{"images", images}}, file);
}

Project load_project(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("project directory not found: " + dir.string());
  Project project;
  project.dir = dir;
  project.meta = load_meta(dir / "meta.json");

  std::filesystem::path mesh_path;
  for (const char* name : {"mesh.obj", "mesh.ply"}) {
    if (std::filesystem::exists(dir / name)) {
      mesh_path = dir / name;
      break;
    }
  }
  if (mesh_path.empty()) throw IoError(dir.string() + ": no mesh.obj or mesh.ply");
  project.mesh = load_mesh(mesh_path);

  const auto entries = load_cameras(dir / "cameras.json");
  if (entries.empty()) throw IoError(dir.string() + ": cameras.json lists no images");
  std::set<std::string> stems;
  for (const auto& entry : entries) {
    const auto path = dir / entry.file;
    if (!std::filesystem::exists(path)) {
      throw IoError("cameras.json entry '" + entry.file + "' references a missing image");
    }
    ProjectImage pi;
    pi.file = entry.file;
    pi.stem = std::filesystem::path(entry.file).stem().string();
    if (!stems.insert(pi.stem).second) {
      throw IoError("cameras.json: two images share the stem '" + pi.stem + "'");
    }
    pi.image = load_linear_image(path);
    pi.camera = entry.camera;
    project.images.push_back(std::move(pi));
  }
  return project;
}

}  // namespace delight
