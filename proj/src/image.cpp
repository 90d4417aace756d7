#include "delight/image.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "delight/error.hpp"

namespace delight {

Raster::Raster(int width, int height, int channels, float fill)
    : width_(width), height_(height), channels_(channels) {
  if (width < 0 || height < 0 || channels < 1 || channels > 4) {
    throw InvalidArgument("raster: bad dimensions");
  }
  data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

float Raster::bilinear(double x, double y, int c) const {
  x = std::clamp(x, 0.0, double(width_ - 1));
  y = std::clamp(y, 0.0, double(height_ - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, width_ - 1);
  const int y1 = std::min(y0 + 1, height_ - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = (1 - fx) * at(x0, y0, c) + fx * at(x1, y0, c);
  const double bottom = (1 - fx) * at(x0, y1, c) + fx * at(x1, y1, c);
  return static_cast<float>((1 - fy) * top + fy * bottom);
}

LinearImage LinearImage::from_raster(Raster raster) {
  if (raster.channels() != 3) {
    throw InvalidArgument("linear image: expected 3 channels, got " +
                          std::to_string(raster.channels()));
  }
  if (raster.empty()) throw InvalidArgument("linear image: zero-sized image");
  for (float v : raster.data()) {
    if (!std::isfinite(v) || v < 0.0f) {
      throw InvalidArgument("linear image: pixel values must be finite and >= 0");
    }
  }
  LinearImage img;
  img.raster_ = std::move(raster);
  return img;
}

namespace {

bool host_is_little_endian() { return std::endian::native == std::endian::little; }

std::uint32_t byteswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

std::string read_token(std::istream& in) {
  std::string token;
  char ch;
  while (in.get(ch)) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!token.empty()) break;
    } else {
      token.push_back(ch);
    }
  }
  return token;
}

}  // namespace

Raster read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string magic = read_token(in);
  int channels = 0;
  if (magic == "PF") {
    channels = 3;
  } else if (magic == "Pf") {
    channels = 1;
  } else {
    throw IoError(path.string() + ": not a PFM file");
  }
  int width = 0, height = 0;
  double scale = 0.0;
  try {
    width = std::stoi(read_token(in));
    height = std::stoi(read_token(in));
    scale = std::stod(read_token(in));
  } catch (const std::exception&) {
    throw IoError(path.string() + ": malformed PFM header");
  }
  if (width <= 0 || height <= 0 || scale == 0.0) {
    throw IoError(path.string() + ": malformed PFM header");
  }
  const bool file_little = scale < 0.0;
  Raster raster(width, height, channels);
  const std::size_t row_values = static_cast<std::size_t>(width) * channels;
  std::vector<std::uint32_t> row(row_values);
  for (int y = height - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row_values * sizeof(float)));
    if (!in) throw IoError(path.string() + ": truncated PFM data");
    for (std::size_t i = 0; i < row_values; ++i) {
      std::uint32_t bits = row[i];
      if (file_little != host_is_little_endian()) bits = byteswap32(bits);
      raster[static_cast<std::size_t>(y) * row_values + i] = std::bit_cast<float>(bits);
    }
  }
  return raster;
}

void write_pfm(const Raster& raster, const std::filesystem::path& path) {
  if (raster.empty()) throw InvalidArgument("write_pfm: zero-sized image");
  if (raster.channels() != 1 && raster.channels() != 3) {
    throw InvalidArgument("write_pfm: only 1 or 3 channels supported");
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << (raster.channels() == 3 ? "PF" : "Pf") << '\n'
      << raster.width() << ' ' << raster.height() << '\n'
      << "-1.0\n";
  const std::size_t row_values = static_cast<std::size_t>(raster.width()) * raster.channels();
  std::vector<std::uint32_t> row(row_values);
  for (int y = raster.height() - 1; y >= 0; --y) {
    for (std::size_t i = 0; i < row_values; ++i) {
      std::uint32_t bits =
          std::bit_cast<std::uint32_t>(raster[static_cast<std::size_t>(y) * row_values + i]);
      if (!host_is_little_endian()) bits = byteswap32(bits);
      row[i] = bits;
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row_values * sizeof(float)));
  }
  if (!out) throw IoError("write failed: " + path.string());
}

LinearImage load_linear_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("missing image file: " + path.string());
  std::array<unsigned char, 8> sig{};
  in.read(reinterpret_cast<char*>(sig.data()), sig.size());
  const auto got = static_cast<std::size_t>(in.gcount());
  in.close();

  const auto starts_with = [&](std::initializer_list<unsigned char> prefix) {
    if (got < prefix.size()) return false;
    return std::equal(prefix.begin(), prefix.end(), sig.begin());
  };
  if (starts_with({0x89, 'P', 'N', 'G'})) {
    throw IoError(path.string() + ": non-linear encoding rejected (PNG)");
  }
  if (starts_with({0xFF, 0xD8, 0xFF})) {
    throw IoError(path.string() + ": non-linear encoding rejected (JPEG)");
  }
  if (starts_with({'I', 'I', 42, 0}) || starts_with({'M', 'M', 0, 42})) {
    throw IoError(path.string() + ": non-linear encoding rejected (TIFF)");
  }
  if (got >= 2 && sig[0] == 'P' && sig[1] >= '1' && sig[1] <= '6') {
    throw IoError(path.string() + ": non-linear encoding rejected (integer PNM)");
  }
  if (starts_with({0x76, 0x2f, 0x31, 0x01})) {
    throw IoError(path.string() + ": OpenEXR input is not supported; convert to PFM");
  }
  if (got >= 2 && sig[0] == 'P' && sig[1] == 'f') {
    throw IoError(path.string() + ": non-RGB channel count (1), expected 3");
  }
  Raster raster = read_pfm(path);
  try {
    return LinearImage::from_raster(std::move(raster));
  } catch (const InvalidArgument& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_linear_image(const LinearImage& img, const std::filesystem::path& path) {
  if (img.pixel_count() == 0) throw InvalidArgument("write_linear_image: zero-sized image");
  write_pfm(img.raster(), path);
}

double percentile(std::vector<float> values, double q) {
  if (values.empty()) return 0.0;
  q = std::clamp(q, 0.0, 100.0);
  const auto rank = static_cast<std::size_t>(
      std::ceil(q / 100.0 * static_cast<double>(values.size())));
  const std::size_t k = rank == 0 ? 0 : rank - 1;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k),
                   values.end());
  return values[k];
}

}  // namespace delight
