#include "delight/synth.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include <json.hpp>

#include "delight/error.hpp"
#include "delight/parallel.hpp"

namespace delight {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

/// Uniform double in [0, 1) from raw generator bits; portable across
/// standard libraries, unlike std::uniform_real_distribution.
double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * unit_uniform(rng);
}

void add_quad(SyntheticScene& scene, const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d,
              const Vec3& albedo) {
  auto& m = scene.mesh;
  const auto base = static_cast<std::uint32_t>(m.vertices.size());
  const Vec3 n = (b - a).cross(c - a).normalized();
  for (const Vec3& p : {a, b, c, d}) {
    m.vertices.push_back(p);
    m.vertex_normals.push_back(n);
  }
  m.faces.push_back({base, base + 1, base + 2});
  m.faces.push_back({base, base + 2, base + 3});
  scene.face_albedo.push_back(albedo);
  scene.face_albedo.push_back(albedo);
}

}  // namespace

void SyntheticScene::validate() const {
  mesh.validate();
  if (mesh.faces.empty()) throw InvalidArgument("synthetic scene: degenerate (no faces)");
  if (face_albedo.size() != mesh.faces.size()) {
    throw InvalidArgument("synthetic scene: one albedo per face required");
  }
  if (mesh.vertex_normals.size() != mesh.vertices.size()) {
    throw InvalidArgument("synthetic scene: vertex normals required");
  }
  for (const auto& a : face_albedo) {
    if ((a.array() <= 0.0).any() || (a.array() > 1.0).any()) {
      throw InvalidArgument("synthetic scene: albedo components must lie in (0, 1]");
    }
  }
}

std::vector<Vec3> sun_disk_directions(const Vec3& center, double radius_deg, int count,
                                      std::uint64_t seed) {
  const Vec3 c = center.normalized();
  if (radius_deg <= 0.0 || count <= 1) return {c};
  const Vec3 helper = std::abs(c.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
  const Vec3 t1 = c.cross(helper).normalized();
  const Vec3 t2 = c.cross(t1);
  const int rings = std::max(1, static_cast<int>(std::lround(std::sqrt(double(count)))));
  const int per_ring = (count + rings - 1) / rings;
  std::mt19937_64 rng(seed);
  std::vector<Vec3> dirs;
  dirs.reserve(count);
  const double radius = std::tan(radius_deg * kDeg);
  for (int k = 0; k < rings && static_cast<int>(dirs.size()) < count; ++k) {
    for (int j = 0; j < per_ring && static_cast<int>(dirs.size()) < count; ++j) {
      // Equal-area strata: radial cell [sqrt(k/R), sqrt((k+1)/R)).
      const double r = radius * std::sqrt((k + unit_uniform(rng)) / rings);
      const double theta = 2.0 * std::numbers::pi * (j + unit_uniform(rng)) / per_ring;
      dirs.push_back((c + r * (std::cos(theta) * t1 + std::sin(theta) * t2)).normalized());
    }
  }
  return dirs;
}

float area_sun_visibility(const Bvh& bvh, const Vec3& point, const Vec3& normal,
                          const std::vector<Vec3>& disk, double bias) {
  int visible = 0;
  for (const auto& d : disk) visible += trace_sun_visibility(bvh, point, normal, d, bias) > 0.5f;
  return static_cast<float>(visible) / static_cast<float>(disk.size());
}

RenderedView render_view(const SyntheticScene& scene, const Bvh& bvh, const CameraPose& cam,
                         const LightingFrame& light, const RenderSettings& settings, int width,
                         int height) {
  if ((settings.l_sun.array() <= 0.0).any() || (settings.l_sky.array() <= 0.0).any()) {
    throw InvalidArgument("render: illumination components must be positive");
  }
  RenderedView view{LinearImage(width, height), LinearImage(width, height),
                    LinearImage(width, height), Raster(width, height, 1),
                    Raster(width, height, 1, -1.0f)};
  const auto disk =
      sun_disk_directions(light.sun, settings.sun_radius_deg, settings.sun_samples, settings.seed);
  const double bias = shadow_bias(bvh);
  const TriangleMesh& mesh = bvh.mesh();
  const Vec3 center = cam.center();

  parallel_for(static_cast<std::size_t>(height), settings.workers, [&](std::size_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < width; ++x) {
      Ray ray;
      ray.origin = center;
      ray.direction = cam.ray_direction(x, y);
      const auto hit = bvh.intersect(ray);
      if (!hit) continue;
      const auto& f = mesh.faces[hit->triangle];
      const double w0 = 1.0 - hit->u - hit->v;
      Vec3 n = w0 * mesh.vertex_normals[f[0]] + hit->u * mesh.vertex_normals[f[1]] +
               hit->v * mesh.vertex_normals[f[2]];
      n.normalize();
      if (n.dot(ray.direction) > 0.0) n = -n;
      const Vec3 p = ray.origin + hit->t * ray.direction;
      const double k_sun = std::clamp(light.sun.dot(n), 0.0, 1.0);
      const double k_sky = std::clamp(0.5 + 0.5 * light.zenith.dot(n), 0.0, 1.0);
      const float alpha = disk.size() == 1
                              ? trace_sun_visibility(bvh, p, n, light.sun, bias)
                              : area_sun_visibility(bvh, p, n, disk, bias);
      const Vec3 shading =
          settings.l_sun * (alpha * k_sun) + settings.l_sky * k_sky + settings.ambient;
      const Vec3& albedo = scene.face_albedo[hit->triangle];
      view.albedo.set_pixel(x, y, albedo);
      view.shading.set_pixel(x, y, shading);
      view.image.set_pixel(x, y, albedo.cwiseProduct(shading));
      view.alpha.at(x, y) = alpha;
      view.face_id.at(x, y) = static_cast<float>(hit->triangle);
    }
  });
  return view;
}

void render_synthetic_project(const SyntheticProjectSpec& spec,
                              const std::filesystem::path& out_dir) {
  spec.scene.validate();
  if (spec.cameras.empty()) throw InvalidArgument("synthetic project: no cameras");
  const SunDirection sun = sun_direction(spec.meta);
  if (sun_below_horizon(sun)) throw InvalidArgument("synthetic project: sun below horizon");
  const LightingFrame light = lighting_frame(spec.meta, sun);
  const Bvh bvh(spec.scene.mesh);

  std::filesystem::create_directories(out_dir / "images");
  std::vector<CameraEntry> entries;
  for (std::size_t i = 0; i < spec.cameras.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "view_%02zu", i);
    const RenderedView view =
        render_view(spec.scene, bvh, spec.cameras[i], light, spec.settings, spec.width, spec.height);
    const std::string file = std::string("images/") + stem + ".pfm";
    write_linear_image(view.image, out_dir / file);
    const auto truth = out_dir / "truth" / stem;
    write_pfm(view.albedo.raster(), truth / "albedo.pfm");
    write_pfm(view.shading.raster(), truth / "shading.pfm");
    write_pfm(view.alpha, truth / "alpha.pfm");
    write_pfm(view.face_id, truth / "faceid.pfm");
    entries.push_back({file, spec.cameras[i]});
  }
  write_cameras(entries, out_dir / "cameras.json");
  write_meta(spec.meta, out_dir / "meta.json");
  write_mesh_obj(spec.scene.mesh, out_dir / "mesh.obj");

  using nlohmann::json;
  const auto vec = [](const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); };
  std::ofstream(out_dir / "sun.json")
      << json{{"azimuth_deg", sun.azimuth_deg},
              {"elevation_deg", sun.elevation_deg},
              {"vector", vec(sun.vector)}}
             .dump(2)
      << '\n';
  std::ofstream(out_dir / "truth" / "light.json")
      << json{{"l_sun", vec(spec.settings.l_sun)},
              {"l_sky", vec(spec.settings.l_sky)},
              {"ratio", vec(spec.settings.l_sun.cwiseQuotient(spec.settings.l_sky))},
              {"sun_radius_deg", spec.settings.sun_radius_deg},
              {"ambient", vec(spec.settings.ambient)}}
             .dump(2)
      << '\n';
}

SyntheticScene make_ground(std::uint64_t seed, double half_extent, double tile) {
  SyntheticScene scene;
  scene.name = "ground";
  std::mt19937_64 rng(seed);
  const int n = static_cast<int>(std::ceil(2.0 * half_extent / tile));
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const double x0 = -half_extent + i * tile, y0 = -half_extent + j * tile;
      const double x1 = x0 + tile, y1 = y0 + tile;
      const double base = uniform(rng, 0.30, 0.45);
      const Vec3 albedo(base * uniform(rng, 0.9, 1.1), base * uniform(rng, 0.9, 1.1),
                        base * uniform(rng, 0.85, 1.0));
      add_quad(scene, {x0, y0, 0}, {x1, y0, 0}, {x1, y1, 0}, {x0, y1, 0}, albedo);
    }
  }
  return scene;
}

void add_box(SyntheticScene& scene, const Vec3& center, double size_x, double size_y,
             double height, const Vec3& wall_albedo, const Vec3& roof_albedo) {
  const double x0 = center.x() - size_x / 2, x1 = center.x() + size_x / 2;
  const double y0 = center.y() - size_y / 2, y1 = center.y() + size_y / 2;
  const double z0 = center.z(), z1 = center.z() + height;
  add_quad(scene, {x0, y0, z1}, {x1, y0, z1}, {x1, y1, z1}, {x0, y1, z1}, roof_albedo);
  add_quad(scene, {x0, y0, z0}, {x1, y0, z0}, {x1, y0, z1}, {x0, y0, z1}, wall_albedo);  // south
  add_quad(scene, {x1, y0, z0}, {x1, y1, z0}, {x1, y1, z1}, {x1, y0, z1}, wall_albedo);  // east
  add_quad(scene, {x1, y1, z0}, {x0, y1, z0}, {x0, y1, z1}, {x1, y1, z1}, wall_albedo);  // north
  add_quad(scene, {x0, y1, z0}, {x0, y0, z0}, {x0, y0, z1}, {x0, y1, z1}, wall_albedo);  // west
}

std::vector<CameraPose> ring_cameras(int count, double radius, double height, const Vec3& target,
                                     double fov_deg, int width, int height_px) {
  const double fx = 0.5 * width / std::tan(0.5 * fov_deg * kDeg);
  std::vector<CameraPose> cams;
  for (int i = 0; i < count; ++i) {
    const double phi = 2.0 * std::numbers::pi * i / count;
    const Vec3 eye(radius * std::cos(phi), radius * std::sin(phi), height);
    cams.push_back(CameraPose::look_at(eye, target, Vec3::UnitZ(), fx, fx, 0.5 * (width - 1),
                                       0.5 * (height_px - 1)));
  }
  return cams;
}

std::vector<std::string> canonical_project_names() { return {"plane", "box", "box-town", "ring"}; }

SyntheticProjectSpec canonical_project(const std::string& name, std::uint64_t seed) {
  SyntheticProjectSpec spec;
  spec.meta.latitude = 40.0;
  spec.meta.longitude = -83.0;
  spec.meta.timestamp_utc = UtcTime::parse("2021-06-21T14:00:00Z");
  spec.settings.l_sky = Vec3(0.22, 0.25, 0.29);
  spec.settings.l_sun = 4.0 * spec.settings.l_sky;
  spec.settings.seed = seed;
  spec.scene = make_ground(seed);
  spec.scene.name = name;
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  const auto wall = [&] {
    return Vec3(uniform(rng, 0.45, 0.65), uniform(rng, 0.45, 0.65), uniform(rng, 0.45, 0.65));
  };
  const auto roof = [&] {
    return Vec3(uniform(rng, 0.7, 0.9), uniform(rng, 0.7, 0.9), uniform(rng, 0.7, 0.9));
  };

  if (name == "plane") {
    spec.cameras = ring_cameras(1, 0.0, 80.0, Vec3::Zero(), 40.0, 256, 256);
    const auto oblique = ring_cameras(2, 30.0, 70.0, Vec3::Zero(), 40.0, 256, 256);
    spec.cameras.push_back(oblique[1]);
  } else if (name == "box") {
    for (auto& a : spec.scene.face_albedo) a = Vec3::Constant(0.5);
    add_box(spec.scene, Vec3(0, 0, 0), 10.0, 8.0, 9.0, wall(), roof());
    spec.cameras = ring_cameras(1, 0.0, 80.0, Vec3(-4, 0, 0), 40.0, 256, 256);
    const auto oblique = ring_cameras(4, 35.0, 70.0, Vec3(-4, 0, 0), 40.0, 256, 256);
    spec.cameras.push_back(oblique[1]);
  } else if (name == "box-town") {
    spec.meta.timestamp_utc = UtcTime::parse("2021-09-10T15:00:00Z");
    spec.settings.sun_radius_deg = 0.53;
    for (int j = -1; j <= 1; ++j) {
      for (int i = -1; i <= 1; ++i) {
        const Vec3 c(16.0 * i + uniform(rng, -2, 2), 16.0 * j + uniform(rng, -2, 2), 0.0);
        add_box(spec.scene, c, uniform(rng, 5, 9), uniform(rng, 5, 9), uniform(rng, 4, 12), wall(),
                roof());
      }
    }
    spec.width = spec.height = 512;
    spec.cameras = ring_cameras(8, 30.0, 80.0, Vec3::Zero(), 45.0, 512, 512);
  } else if (name == "ring") {
    add_box(spec.scene, Vec3(0, 0, 0), 8.0, 8.0, 10.0, wall(), roof());
    spec.cameras = ring_cameras(8, 40.0, 60.0, Vec3(-4, 0, 0), 45.0, 256, 256);
  } else {
    throw InvalidArgument("unknown synthetic scene '" + name + "'");
  }
  return spec;
}

void generate_test_suite(std::uint64_t seed, const std::filesystem::path& out_dir, int workers) {
  for (const auto& name : canonical_project_names()) {
    auto spec = canonical_project(name, seed);
    spec.settings.workers = workers;
    render_synthetic_project(spec, out_dir / name);
  }
}

}  // namespace delight
