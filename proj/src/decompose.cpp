#include "delight/decompose.hpp"

#include <algorithm>
#include <array>

#include "delight/error.hpp"

namespace delight {

namespace {

constexpr std::array<PaletteEntry, 4> kPalette{{
    {60, 170, 60},    // ok
    {0, 0, 0},        // invalid_geometry
    {220, 40, 40},    // shading_floor
    {250, 230, 60},   // overexposed
}};

}  // namespace

void DecomposeParams::validate() const {
  if (!(shading_floor > 0)) throw ConfigError("decompose: shading_floor must be positive");
  if (!(saturation >= 0)) throw ConfigError("decompose: saturation must be >= 0");
}

LinearImage assemble_shading(const GBuffer& gbuf, const Raster& alpha, const Vec3& ratio) {
  if (alpha.width() != gbuf.width() || alpha.height() != gbuf.height()) {
    throw InvalidArgument("assemble_shading: dimension mismatch");
  }
  LinearImage s(gbuf.width(), gbuf.height());
  for (int y = 0; y < gbuf.height(); ++y) {
    for (int x = 0; x < gbuf.width(); ++x) {
      if (!gbuf.valid(x, y)) continue;
      const double sun = double(alpha.at(x, y)) * gbuf.k_sun.at(x, y);
      s.set_pixel(x, y, ratio * sun + Vec3::Constant(gbuf.k_sky.at(x, y)));
    }
  }
  return s;
}

std::vector<PixelFlag> geometry_flags(const GBuffer& gbuf) {
  std::vector<PixelFlag> flags(static_cast<std::size_t>(gbuf.width()) * gbuf.height());
  for (int y = 0; y < gbuf.height(); ++y) {
    for (int x = 0; x < gbuf.width(); ++x) {
      flags[static_cast<std::size_t>(y) * gbuf.width() + x] =
          gbuf.valid(x, y) ? PixelFlag::ok : PixelFlag::invalid_geometry;
    }
  }
  return flags;
}

AlbedoResult decompose_albedo(const LinearImage& img, const LinearImage& shading,
                              std::vector<PixelFlag> flags, const DecomposeParams& params) {
  params.validate();
  const int w = img.width(), h = img.height();
  if (shading.width() != w || shading.height() != h || flags.size() != img.pixel_count()) {
    throw InvalidArgument("decompose_albedo: dimension mismatch");
  }
  AlbedoResult out{LinearImage(w, h), shading, std::move(flags)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      auto& flag = out.flags[static_cast<std::size_t>(y) * w + x];
      if (flag == PixelFlag::invalid_geometry) {
        out.albedo.set_pixel(x, y, img.pixel(x, y));
        continue;
      }
      bool floored = false, saturated = false;
      for (int c = 0; c < 3; ++c) {
        float s = shading.at(x, y, c);
        if (!(s >= params.shading_floor)) {
          floored = true;
          s = static_cast<float>(params.shading_floor);
        }
        if (params.saturation > 0.0 && img.at(x, y, c) >= params.saturation) saturated = true;
        out.albedo.at(x, y, c) = img.at(x, y, c) / s;
      }
      if (floored) {
        flag = PixelFlag::shading_floor;
      } else if (saturated) {
        flag = PixelFlag::overexposed;
      }
    }
  }
  return out;
}

void write_albedo_result(const AlbedoResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_linear_image(result.albedo, dir / "albedo.pfm");
  write_linear_image(result.shading, dir / "shading.pfm");
  std::vector<std::uint8_t> idx(result.flags.size());
  std::transform(result.flags.begin(), result.flags.end(), idx.begin(),
                 [](PixelFlag f) { return static_cast<std::uint8_t>(f); });
  write_palette_png(dir / "flags.png", result.albedo.width(), result.albedo.height(), idx,
                    kPalette);
}

AlbedoResult read_albedo_result(const std::filesystem::path& dir) {
  AlbedoResult r;
  r.albedo = load_linear_image(dir / "albedo.pfm");
  r.shading = load_linear_image(dir / "shading.pfm");
  int w = 0, h = 0;
  const auto idx = read_palette_png(dir / "flags.png", w, h);
  if (w != r.albedo.width() || h != r.albedo.height()) {
    throw IoError(dir.string() + ": flags.png size differs from albedo.pfm");
  }
  r.flags.resize(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= kPalette.size()) throw IoError(dir.string() + ": unknown flag in flags.png");
    r.flags[i] = static_cast<PixelFlag>(idx[i]);
  }
  return r;
}

}  // namespace delight
