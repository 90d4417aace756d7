#pragma once

#include <filesystem>

#include "delight/bvh.hpp"
#include "delight/image.hpp"
#include "delight/solar.hpp"

namespace delight {

/// Per-pixel geometric attributes of one view. Background pixels have
/// depth +inf, valid = 0 and zero coefficients.
struct GBuffer {
  Raster depth;      // camera-space z in meters
  Raster normal;     // 3 channels, world frame, unit on valid pixels
  Raster k_sun;      // max(0, sun . n)
  Raster k_sky;      // 0.5 + 0.5 zenith . n
  Raster alpha_sun;  // binary sun visibility from shadow rays
  Raster face_id;    // index of the visible triangle, -1 on background

  int width() const { return depth.width(); }
  int height() const { return depth.height(); }
  bool valid(int x, int y) const { return face_id.at(x, y) >= 0.0f; }
  Vec3 normal_at(int x, int y) const {
    return {normal.at(x, y, 0), normal.at(x, y, 1), normal.at(x, y, 2)};
  }
};

/// Shadow-ray origin offset along the normal: 1e-4 of the scene diagonal.
double shadow_bias(const Bvh& bvh);

/// 1 when the ray from point + bias * normal toward `sun` escapes the scene,
/// 0 when it is blocked or when sun . normal <= 0.
float trace_sun_visibility(const Bvh& bvh, const Vec3& point, const Vec3& normal,
                           const Vec3& sun, double bias);

/// Nearest-hit primary ray through each pixel center. Normals are
/// barycentric interpolations of the vertex normals, renormalized, and
/// flipped toward the camera when the ray meets a back face.
GBuffer rasterize_gbuffer(const Bvh& bvh, const CameraPose& cam, const LightingFrame& light,
                          int width, int height, int workers = 1);

/// Writes depth.pfm, normal.pfm, ksun.pfm, ksky.pfm, alpha.pfm, faceid.pfm.
void write_gbuffer(const GBuffer& gbuf, const std::filesystem::path& dir);
GBuffer read_gbuffer(const std::filesystem::path& dir);

}  // namespace delight
