#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "delight/gbuffer.hpp"
#include "delight/image.hpp"

namespace delight {

enum class PixelFlag : std::uint8_t { ok = 0, invalid_geometry = 1, shading_floor = 2, overexposed = 3 };

/// Albedo up to the global gauge, shading in sky units (L_sky = 1).
struct AlbedoResult {
  LinearImage albedo;
  LinearImage shading;
  std::vector<PixelFlag> flags;  // row-major

  PixelFlag flag(int x, int y) const {
    return flags[static_cast<std::size_t>(y) * albedo.width() + x];
  }
};

struct DecomposeParams {
  double shading_floor = 1e-4;
  /// Pixels with any channel at or above this value are flagged overexposed;
  /// 0 disables the check.
  double saturation = 0.0;

  void validate() const;
};

/// S = ratio * alpha * k_sun + k_sky per channel on valid pixels, 0 elsewhere.
LinearImage assemble_shading(const GBuffer& gbuf, const Raster& alpha, const Vec3& ratio);

/// invalid_geometry where the G-buffer has no hit, ok elsewhere.
std::vector<PixelFlag> geometry_flags(const GBuffer& gbuf);

/// R = I / S. Shading channels below the floor are divided at the floor and
/// flagged; invalid-geometry pixels copy the input.
AlbedoResult decompose_albedo(const LinearImage& img, const LinearImage& shading,
                              std::vector<PixelFlag> flags, const DecomposeParams& params);

/// albedo.pfm, shading.pfm and the palette-coded flags.png.
void write_albedo_result(const AlbedoResult& result, const std::filesystem::path& dir);
AlbedoResult read_albedo_result(const std::filesystem::path& dir);

}  // namespace delight
