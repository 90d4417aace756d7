#include "delight/gbuffer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "delight/error.hpp"
#include "delight/parallel.hpp"

namespace delight {

double shadow_bias(const Bvh& bvh) { return 1e-4 * bvh.scene_diagonal(); }

float trace_sun_visibility(const Bvh& bvh, const Vec3& point, const Vec3& normal,
                           const Vec3& sun, double bias) {
  if (sun.dot(normal) <= 0.0) return 0.0f;
  Ray ray;
  ray.origin = point + bias * normal;
  ray.direction = sun;
  return bvh.occluded(ray) ? 0.0f : 1.0f;
}

GBuffer rasterize_gbuffer(const Bvh& bvh, const CameraPose& cam, const LightingFrame& light,
                          int width, int height, int workers) {
  if (width <= 0 || height <= 0) throw InvalidArgument("rasterize_gbuffer: empty raster");
  const float inf = std::numeric_limits<float>::infinity();
  GBuffer g{Raster(width, height, 1, inf),  Raster(width, height, 3),
            Raster(width, height, 1),       Raster(width, height, 1),
            Raster(width, height, 1),       Raster(width, height, 1, -1.0f)};
  const TriangleMesh& mesh = bvh.mesh();
  const double bias = shadow_bias(bvh);
  const Vec3 center = cam.center();

  parallel_for(static_cast<std::size_t>(height), workers, [&](std::size_t row) {
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
      g.depth.at(x, y) = static_cast<float>(cam.depth_of(p));
      for (int c = 0; c < 3; ++c) g.normal.at(x, y, c) = static_cast<float>(n[c]);
      g.k_sun.at(x, y) = static_cast<float>(std::clamp(light.sun.dot(n), 0.0, 1.0));
      g.k_sky.at(x, y) = static_cast<float>(std::clamp(0.5 + 0.5 * light.zenith.dot(n), 0.0, 1.0));
      g.alpha_sun.at(x, y) = trace_sun_visibility(bvh, p, n, light.sun, bias);
      g.face_id.at(x, y) = static_cast<float>(hit->triangle);
    }
  });
  return g;
}

void write_gbuffer(const GBuffer& gbuf, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_pfm(gbuf.depth, dir / "depth.pfm");
  write_pfm(gbuf.normal, dir / "normal.pfm");
  write_pfm(gbuf.k_sun, dir / "ksun.pfm");
  write_pfm(gbuf.k_sky, dir / "ksky.pfm");
  write_pfm(gbuf.alpha_sun, dir / "alpha.pfm");
  write_pfm(gbuf.face_id, dir / "faceid.pfm");
}

GBuffer read_gbuffer(const std::filesystem::path& dir) {
  GBuffer g{read_pfm(dir / "depth.pfm"), read_pfm(dir / "normal.pfm"), read_pfm(dir / "ksun.pfm"),
            read_pfm(dir / "ksky.pfm"),  read_pfm(dir / "alpha.pfm"),  read_pfm(dir / "faceid.pfm")};
  const int w = g.depth.width(), h = g.depth.height();
  for (const Raster* r : {&g.normal, &g.k_sun, &g.k_sky, &g.alpha_sun, &g.face_id}) {
    if (r->width() != w || r->height() != h) {
      throw IoError(dir.string() + ": G-buffer layers disagree in size");
    }
  }
  if (g.normal.channels() != 3) throw IoError(dir.string() + ": normal.pfm must have 3 channels");
  return g;
}

}  // namespace delight
