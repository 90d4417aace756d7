#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "delight/image.hpp"

namespace delight {

using Mat3 = Eigen::Matrix3d;
using Vec2 = Eigen::Vector2d;

/// Pinhole camera. `rotation` and `translation` map world to camera
/// coordinates (x right, y down, z forward): X_cam = R * X_world + t.
struct CameraPose {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  /// Throws InvalidArgument if focal lengths are not positive or the rotation
  /// is not proper orthonormal within 1e-9.
  void validate() const;

  Vec3 center() const { return -rotation.transpose() * translation; }
  /// Unit world-space direction of the ray through pixel (u, v).
  Vec3 ray_direction(double u, double v) const;
  /// Camera-space z of a world point.
  double depth_of(const Vec3& world) const { return (rotation * world + translation).z(); }
  /// Pixel coordinates of a world point in front of the camera.
  std::optional<Vec2> project(const Vec3& world) const;

  /// Camera at `eye` looking at `target`, image "up" roughly along `up`.
  static CameraPose look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fx,
                            double fy, double cx, double cy);
};

/// Triangle mesh in the world frame (meters, z up).
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> faces;
  std::vector<Vec3> vertex_normals;

  /// Face indices in range, normals (if present) one per vertex and unit.
  void validate() const;
  /// Unit geometric normal of face `f` (right-handed winding).
  Vec3 face_normal(std::size_t f) const;
};

/// Fills vertex_normals with area-weighted averages of adjacent face normals.
void compute_vertex_normals(TriangleMesh& mesh);

/// Loads a triangle mesh from .obj or .ply (ASCII or binary little endian).
/// Missing normals are computed. Throws IoError for meshes without faces.
TriangleMesh load_mesh(const std::filesystem::path& path);
void write_mesh_obj(const TriangleMesh& mesh, const std::filesystem::path& path);
void write_mesh_ply(const TriangleMesh& mesh, const std::filesystem::path& path);

/// UTC calendar instant.
struct UtcTime {
  int year = 2000;
  int month = 1;
  int day = 1;
  int hour = 0;
  int minute = 0;
  double second = 0.0;

  /// Parses "YYYY-MM-DDThh:mm:ssZ" (fractional seconds allowed).
  static UtcTime parse(const std::string& iso);
  std::string iso() const;
  /// Julian day number (UT) including the fraction of the day.
  double julian_day() const;
  UtcTime plus_seconds(double seconds) const;
};

/// Geotag and capture time shared by a collection.
struct CaptureMeta {
  double latitude = 0.0;   // degrees
  double longitude = 0.0;  // degrees, east positive
  UtcTime timestamp_utc;
  /// Rotation taking East-North-Up vectors to world-frame vectors.
  Mat3 world_from_enu = Mat3::Identity();

  void validate() const;
  Vec3 to_world(const Vec3& enu) const { return world_from_enu * enu; }
};

struct ProjectImage {
  std::string file;  // as written in cameras.json, relative to the project
  std::string stem;  // file name without extension; keys per-image outputs
  LinearImage image;
  CameraPose camera;
};

struct Project {
  std::filesystem::path dir;
  std::vector<ProjectImage> images;
  TriangleMesh mesh;
  CaptureMeta meta;
};

/// Loads cameras.json, meta.json, mesh.obj|mesh.ply and every referenced
/// image. Throws IoError naming the offending entry on any inconsistency.
Project load_project(const std::filesystem::path& dir);

CaptureMeta load_meta(const std::filesystem::path& file);
void write_meta(const CaptureMeta& meta, const std::filesystem::path& file);

struct CameraEntry {
  std::string file;
  CameraPose camera;
};
std::vector<CameraEntry> load_cameras(const std::filesystem::path& file);
void write_cameras(std::span<const CameraEntry> entries, const std::filesystem::path& file);

}  // namespace delight
