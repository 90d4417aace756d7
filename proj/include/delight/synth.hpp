#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "delight/bvh.hpp"
#include "delight/gbuffer.hpp"
#include "delight/image.hpp"
#include "delight/scene.hpp"
#include "delight/solar.hpp"

namespace delight {

/// Lambertian scene with one albedo per triangle.
struct SyntheticScene {
  std::string name;
  TriangleMesh mesh;
  std::vector<Vec3> face_albedo;

  void validate() const;
};

struct RenderSettings {
  Vec3 l_sun = Vec3::Constant(4.0);
  Vec3 l_sky = Vec3::Constant(1.0);
  /// Angular radius of the sun disk; 0 renders a point sun (binary shadows).
  double sun_radius_deg = 0.0;
  int sun_samples = 16;
  /// Constant indirect term added to the shading. Off unless set.
  Vec3 ambient = Vec3::Zero();
  std::uint64_t seed = 1;
  int workers = 1;
};

/// One rendered view plus its ground-truth layers.
struct RenderedView {
  LinearImage image;
  LinearImage albedo;
  LinearImage shading;
  Raster alpha;    // sun visibility, binary or area-averaged
  Raster face_id;  // -1 on background
};

/// Stratified, jittered directions over a sun disk of the given angular
/// radius. The pattern depends only on (radius, count, seed).
std::vector<Vec3> sun_disk_directions(const Vec3& center, double radius_deg, int count,
                                      std::uint64_t seed);

/// Fraction of `disk` directions that reach the sky from the point.
float area_sun_visibility(const Bvh& bvh, const Vec3& point, const Vec3& normal,
                          const std::vector<Vec3>& disk, double bias);

/// Renders I = albedo * (L_sun * alpha * k_sun + L_sky * k_sky + ambient).
RenderedView render_view(const SyntheticScene& scene, const Bvh& bvh, const CameraPose& cam,
                         const LightingFrame& light, const RenderSettings& settings, int width,
                         int height);

struct SyntheticProjectSpec {
  SyntheticScene scene;
  CaptureMeta meta;
  RenderSettings settings;
  std::vector<CameraPose> cameras;
  int width = 256;
  int height = 256;
};

/// Writes a complete project (images/, cameras.json, meta.json, mesh.obj,
/// sun.json) plus ground truth under truth/<stem>/ and truth/light.json.
/// The sun direction is computed from spec.meta.
void render_synthetic_project(const SyntheticProjectSpec& spec, const std::filesystem::path& out_dir);

/// Flat tiled ground covering [-half_extent, half_extent]^2.
SyntheticScene make_ground(std::uint64_t seed, double half_extent = 60.0, double tile = 20.0);
/// Appends a flat-shaded box (roof and four walls) standing on z = 0.
void add_box(SyntheticScene& scene, const Vec3& center, double size_x, double size_y,
             double height, const Vec3& wall_albedo, const Vec3& roof_albedo);

/// Cameras on a circle around the origin looking at `target`.
std::vector<CameraPose> ring_cameras(int count, double radius, double height, const Vec3& target,
                                     double fov_deg, int width, int height_px);

/// Canonical test projects: "plane", "box", "box-town", "ring".
std::vector<std::string> canonical_project_names();
SyntheticProjectSpec canonical_project(const std::string& name, std::uint64_t seed);

/// Renders every canonical project into out_dir/<name>.
void generate_test_suite(std::uint64_t seed, const std::filesystem::path& out_dir, int workers = 1);

}  // namespace delight
