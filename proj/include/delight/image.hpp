#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace delight {

using Vec3 = Eigen::Vector3d;

/// Row-major float raster with 1..4 interleaved channels. Row 0 is the top
/// image row. Used for every per-pixel layer (depth, masks, G-buffer, ...).
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, int channels, float fill = 0.0f);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
  bool empty() const { return pixel_count() == 0; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  float& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  float at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }
  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  /// Bilinear sample at continuous pixel coordinates (pixel centers at
  /// integer positions). Coordinates are clamped to the raster.
  float bilinear(double x, double y, int c = 0) const;

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  bool operator==(const Raster& other) const = default;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

/// Three-channel raster of linear radiance: finite and non-negative in every
/// channel. Construction through from_raster() enforces the invariants.
class LinearImage {
 public:
  LinearImage() = default;
  LinearImage(int width, int height, float fill = 0.0f) : raster_(width, height, 3, fill) {}

  /// Throws InvalidArgument unless `raster` has 3 channels, non-zero size,
  /// and only finite non-negative values.
  static LinearImage from_raster(Raster raster);

  int width() const { return raster_.width(); }
  int height() const { return raster_.height(); }
  std::size_t pixel_count() const { return raster_.pixel_count(); }

  Vec3 pixel(int x, int y) const {
    return {raster_.at(x, y, 0), raster_.at(x, y, 1), raster_.at(x, y, 2)};
  }
  void set_pixel(int x, int y, const Vec3& v) {
    for (int c = 0; c < 3; ++c) raster_.at(x, y, c) = static_cast<float>(v[c]);
  }
  float& at(int x, int y, int c) { return raster_.at(x, y, c); }
  float at(int x, int y, int c) const { return raster_.at(x, y, c); }

  /// Mean of the three channels.
  double luminance(int x, int y) const {
    return (double(raster_.at(x, y, 0)) + raster_.at(x, y, 1) + raster_.at(x, y, 2)) / 3.0;
  }

  const Raster& raster() const { return raster_; }
  Raster& raster() { return raster_; }

  bool operator==(const LinearImage& other) const = default;

 private:
  Raster raster_;
};

/// Reads a PFM raster ("PF" three channels, "Pf" one channel), either
/// endianness. Throws IoError.
Raster read_pfm(const std::filesystem::path& path);

/// Writes a little-endian PFM (negative scale). 1 or 3 channels only.
void write_pfm(const Raster& raster, const std::filesystem::path& path);

/// Loads a linear RGB float image. Gamma-encoded or integer formats (PNG,
/// JPEG, PPM/PGM, TIFF) are rejected, as are single-channel files.
LinearImage load_linear_image(const std::filesystem::path& path);

/// Writes `img` as PFM; round-trips bit-exactly through load_linear_image.
void write_linear_image(const LinearImage& img, const std::filesystem::path& path);

/// q-th percentile (0..100) of `values` by nearest rank. Empty input yields 0.
double percentile(std::vector<float> values, double q);

/// Writes an 8-bit palette PNG; every index must be < palette.size().
struct PaletteEntry {
  std::uint8_t r, g, b;
};
void write_palette_png(const std::filesystem::path& path, int width, int height,
                       std::span<const std::uint8_t> indices,
                       std::span<const PaletteEntry> palette);

/// Reads back an 8-bit palette PNG as raw indices.
std::vector<std::uint8_t> read_palette_png(const std::filesystem::path& path, int& width,
                                           int& height);

}  // namespace delight
