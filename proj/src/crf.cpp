#include "delight/crf.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "delight/error.hpp"

namespace delight {

namespace {

constexpr double kNoNeighbors = 1e-9;

Raster validity(const GBuffer& gbuf) {
  Raster valid(gbuf.width(), gbuf.height(), 1);
  for (int y = 0; y < gbuf.height(); ++y) {
    for (int x = 0; x < gbuf.width(); ++x) valid.at(x, y) = gbuf.valid(x, y) ? 1.0f : 0.0f;
  }
  return valid;
}

// Separable truncated Gaussian with unit center tap.
std::vector<double> blur_1d(const std::vector<double>& in, int w, int h, double sigma,
                            bool along_x) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(radius + 1);
  for (int d = 0; d <= radius; ++d) taps[d] = std::exp(-0.5 * d * d / (sigma * sigma));
  std::vector<double> out(in.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int d = -radius; d <= radius; ++d) {
        const int xx = along_x ? x + d : x;
        const int yy = along_x ? y : y + d;
        if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
        acc += taps[std::abs(d)] * in[static_cast<std::size_t>(yy) * w + xx];
      }
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  return out;
}

std::vector<double> gaussian_blur(const std::vector<double>& in, int w, int h, double sigma) {
  return blur_1d(blur_1d(in, w, h, sigma, true), w, h, sigma, false);
}

// Dense 5-D bilateral grid over (x, y, r, g, b) with one cell per sigma.
// Splat and slice are multilinear; the blur is [1 2 1]/4 along every axis.
class BilateralGrid {
 public:
  BilateralGrid(const Raster& guide, const Raster& valid, double sigma_xy, double sigma_rgb)
      : w_(guide.width()), h_(guide.height()) {
    const std::array<double, 5> extent{double(w_ - 1), double(h_ - 1), 255.0, 255.0, 255.0};
    const std::array<double, 5> sigma{sigma_xy, sigma_xy, sigma_rgb, sigma_rgb, sigma_rgb};
    std::size_t cells = 1;
    for (int d = 0; d < 5; ++d) {
      dims_[d] = static_cast<int>(std::floor(extent[d] / sigma[d])) + 3;
      cells *= dims_[d];
    }
    if (cells > (std::size_t{1} << 26)) {
      throw InvalidArgument("CRF grid too large; increase sigma_xy or sigma_rgb");
    }
    cells_ = cells;
    stride_[0] = 1;
    for (int d = 1; d < 5; ++d) stride_[d] = stride_[d - 1] * dims_[d - 1];

    const std::size_t n = guide.pixel_count();
    base_.resize(n);
    frac_.resize(n);
    self_.assign(n, 0.0);
    for (int y = 0; y < h_; ++y) {
      for (int x = 0; x < w_; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w_ + x;
        const std::array<double, 5> v{double(x), double(y), guide.at(x, y, 0), guide.at(x, y, 1),
                                      guide.at(x, y, 2)};
        std::size_t base = 0;
        double self = 1.0;
        for (int d = 0; d < 5; ++d) {
          const double pos = v[d] / sigma[d] + 1.0;
          const int cell = static_cast<int>(std::floor(pos));
          const double f = pos - cell;
          frac_[i][d] = f;
          base += static_cast<std::size_t>(cell) * stride_[d];
          self *= 0.5 * (1 - f) * (1 - f) + 0.5 * f * f + 0.5 * f * (1 - f);
        }
        base_[i] = base;
        if (valid[i] > 0.0f) self_[i] = self;
      }
    }
  }

  /// Blurred response at every pixel of the field `values` (0 where invalid).
  std::vector<double> filter(const std::vector<double>& values) const {
    std::vector<float> grid(cells_, 0.0f);
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i] == 0.0) continue;
      for (int corner = 0; corner < 32; ++corner) {
        double wgt = values[i];
        std::size_t idx = base_[i];
        for (int d = 0; d < 5; ++d) {
          const bool hi = (corner >> d) & 1;
          wgt *= hi ? frac_[i][d] : 1.0 - frac_[i][d];
          if (hi) idx += stride_[d];
        }
        grid[idx] += static_cast<float>(wgt);
      }
    }
    blur(grid);
    std::vector<double> out(values.size(), 0.0);
    for (std::size_t i = 0; i < values.size(); ++i) {
      double acc = 0.0;
      for (int corner = 0; corner < 32; ++corner) {
        double wgt = 1.0;
        std::size_t idx = base_[i];
        for (int d = 0; d < 5; ++d) {
          const bool hi = (corner >> d) & 1;
          wgt *= hi ? frac_[i][d] : 1.0 - frac_[i][d];
          if (hi) idx += stride_[d];
        }
        acc += wgt * grid[idx];
      }
      out[i] = acc;
    }
    return out;
  }

  /// Response of pixel i to its own splat, per unit value.
  double self(std::size_t i) const { return self_[i]; }

 private:
  void blur(std::vector<float>& grid) const {
    std::vector<float> tmp(grid.size());
    for (int d = 0; d < 5; ++d) {
      const std::size_t s = stride_[d];
      const int n = dims_[d];
      for (std::size_t idx = 0; idx < grid.size(); ++idx) {
        const int coord = static_cast<int>((idx / s) % n);
        float acc = 0.5f * grid[idx];
        if (coord > 0) acc += 0.25f * grid[idx - s];
        if (coord + 1 < n) acc += 0.25f * grid[idx + s];
        tmp[idx] = acc;
      }
      grid.swap(tmp);
    }
  }

  int w_, h_;
  std::array<int, 5> dims_{};
  std::array<std::size_t, 5> stride_{};
  std::size_t cells_ = 0;
  std::vector<std::size_t> base_;
  std::vector<std::array<double, 5>> frac_;
  std::vector<double> self_;
};

}  // namespace

struct DenseCrf::Grid : BilateralGrid {
  using BilateralGrid::BilateralGrid;
};

void CrfParams::validate() const {
  if (!(sigma_xy > 0) || !(sigma_rgb > 0) || !(sigma_s > 0)) {
    throw ConfigError("crf: kernel widths must be positive");
  }
  if (!(w_appearance >= 0) || !(w_smooth >= 0)) {
    throw ConfigError("crf: kernel weights must be non-negative");
  }
  if (iterations < 0 || iterations > 100) throw ConfigError("crf: iterations must be in [0, 100]");
  if (!(unary_confidence > 0.5 && unary_confidence < 1.0)) {
    throw ConfigError("crf: unary_confidence must be in (0.5, 1)");
  }
  if (backend != "auto" && backend != "explicit" && backend != "grid") {
    throw ConfigError("crf: backend must be auto, explicit or grid");
  }
  if (explicit_max_pixels < 0) throw ConfigError("crf: explicit_max_pixels must be >= 0");
}

VisibilityMask projected_mask(const GBuffer& gbuf, double confidence) {
  VisibilityMask mask;
  mask.alpha = gbuf.alpha_sun;
  for (auto& v : mask.alpha.data()) v = v >= 0.5f ? 1.0f : 0.0f;
  mask.confidence = Raster(gbuf.width(), gbuf.height(), 1, static_cast<float>(confidence));
  mask.provenance = MaskProvenance::projected;
  return mask;
}

Raster normalized_guide(const LinearImage& img, const Raster& valid) {
  std::vector<float> values;
  values.reserve(img.pixel_count() * 3);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (valid.at(x, y) <= 0.0f) continue;
      for (int c = 0; c < 3; ++c) values.push_back(img.at(x, y, c));
    }
  }
  const double white = percentile(std::move(values), 99.9);
  Raster guide(img.width(), img.height(), 3);
  if (white <= 0.0) return guide;
  for (std::size_t i = 0; i < guide.data().size(); ++i) {
    guide[i] = static_cast<float>(std::min(255.0, img.raster()[i] * 255.0 / white));
  }
  return guide;
}

DenseCrf::DenseCrf(Raster guide, Raster valid, const CrfParams& params)
    : guide_(std::move(guide)), valid_(std::move(valid)), params_(params) {
  params_.validate();
  if (guide_.width() != valid_.width() || guide_.height() != valid_.height() ||
      guide_.channels() != 3) {
    throw InvalidArgument("crf: guide and validity dimensions differ");
  }
  use_grid_ = params_.backend == "grid" ||
              (params_.backend == "auto" &&
               guide_.pixel_count() > static_cast<std::size_t>(params_.explicit_max_pixels));
  if (use_grid_ && params_.w_appearance > 0.0) {
    grid_ = std::make_shared<const Grid>(guide_, valid_, params_.sigma_xy, params_.sigma_rgb);
  }
  Raster ones(guide_.width(), guide_.height(), 1, 1.0f);
  filter(ones, app_norm_, smooth_norm_);
}

void DenseCrf::filter(const Raster& q1, std::vector<double>& app,
                      std::vector<double>& smooth) const {
  const int w = guide_.width(), h = guide_.height();
  const std::size_t n = guide_.pixel_count();
  std::vector<double> mq(n);
  for (std::size_t i = 0; i < n; ++i) mq[i] = valid_[i] > 0.0f ? double(q1[i]) : 0.0;

  app.assign(n, 0.0);
  if (params_.w_appearance > 0.0) {
    if (grid_) {
      const auto fq = grid_->filter(mq);
      for (std::size_t i = 0; i < n; ++i) {
        if (valid_[i] > 0.0f) app[i] = fq[i] - grid_->self(i) * mq[i];
      }
    } else {
      const int radius = static_cast<int>(std::ceil(3.0 * params_.sigma_xy));
      const double ixy = 0.5 / (params_.sigma_xy * params_.sigma_xy);
      const double irgb = 0.5 / (params_.sigma_rgb * params_.sigma_rgb);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const std::size_t i = static_cast<std::size_t>(y) * w + x;
          if (valid_[i] <= 0.0f) continue;
          double acc = 0.0;
          for (int yy = std::max(0, y - radius); yy <= std::min(h - 1, y + radius); ++yy) {
            for (int xx = std::max(0, x - radius); xx <= std::min(w - 1, x + radius); ++xx) {
              const std::size_t j = static_cast<std::size_t>(yy) * w + xx;
              if (j == i || mq[j] == 0.0) continue;
              double dc = 0.0;
              for (int c = 0; c < 3; ++c) {
                const double diff = double(guide_.at(x, y, c)) - guide_.at(xx, yy, c);
                dc += diff * diff;
              }
              const double dxy = double(x - xx) * (x - xx) + double(y - yy) * (y - yy);
              acc += std::exp(-dxy * ixy - dc * irgb) * mq[j];
            }
          }
          app[i] = acc;
        }
      }
    }
  }

  smooth.assign(n, 0.0);
  if (params_.w_smooth > 0.0) {
    smooth = gaussian_blur(mq, w, h, params_.sigma_s);
    for (std::size_t i = 0; i < n; ++i) smooth[i] = valid_[i] > 0.0f ? smooth[i] - mq[i] : 0.0;
  }
}

void DenseCrf::messages(const Raster& q1, Raster& app, Raster& smooth) const {
  std::vector<double> fa, fs;
  filter(q1, fa, fs);
  const int w = guide_.width(), h = guide_.height();
  app = Raster(w, h, 1, 0.5f);
  smooth = Raster(w, h, 1, 0.5f);
  for (std::size_t i = 0; i < guide_.pixel_count(); ++i) {
    if (valid_[i] <= 0.0f) continue;
    if (app_norm_[i] > kNoNeighbors) {
      app[i] = static_cast<float>(std::clamp(fa[i] / app_norm_[i], 0.0, 1.0));
    }
    if (smooth_norm_[i] > kNoNeighbors) {
      smooth[i] = static_cast<float>(std::clamp(fs[i] / smooth_norm_[i], 0.0, 1.0));
    }
  }
}

Raster unary_distribution(const Raster& unary) {
  Raster q(unary.width(), unary.height(), 2);
  for (std::size_t i = 0; i < unary.pixel_count(); ++i) {
    const double logit = double(unary[2 * i]) - unary[2 * i + 1];
    const double q1 = 1.0 / (1.0 + std::exp(-logit));
    q[2 * i] = static_cast<float>(1.0 - q1);
    q[2 * i + 1] = static_cast<float>(q1);
  }
  return q;
}

Raster DenseCrf::step(const Raster& q, const Raster& unary) const {
  if (q.channels() != 2 || unary.channels() != 2 || q.width() != guide_.width() ||
      q.height() != guide_.height() || unary.width() != q.width() ||
      unary.height() != q.height()) {
    throw InvalidArgument("crf: distribution dimensions differ");
  }
  const std::size_t n = q.pixel_count();
  Raster q1(q.width(), q.height(), 1);
  for (std::size_t i = 0; i < n; ++i) q1[i] = q[2 * i + 1];
  Raster app, smooth;
  messages(q1, app, smooth);
  Raster out = q;
  for (std::size_t i = 0; i < n; ++i) {
    if (valid_[i] <= 0.0f) continue;
    // Potts: label l gains w * (average neighbor belief in l) for each kernel.
    const double logit = double(unary[2 * i]) - unary[2 * i + 1] +
                         params_.w_appearance * (2.0 * app[i] - 1.0) +
                         params_.w_smooth * (2.0 * smooth[i] - 1.0);
    const double p1 = 1.0 / (1.0 + std::exp(-logit));
    out[2 * i] = static_cast<float>(1.0 - p1);
    out[2 * i + 1] = static_cast<float>(p1);
  }
  return out;
}

Raster DenseCrf::infer(const Raster& unary, int iterations) const {
  Raster q = unary_distribution(unary);
  for (int it = 0; it < iterations; ++it) q = step(q, unary);
  return q;
}

VisibilityMask refine_visibility(const VisibilityMask& init, const LinearImage& guide,
                                 const GBuffer& gbuf, const CrfParams& params) {
  const int w = init.width(), h = init.height();
  if (guide.width() != w || guide.height() != h || gbuf.width() != w || gbuf.height() != h ||
      init.confidence.width() != w || init.confidence.height() != h) {
    throw InvalidArgument("refine_visibility: dimension mismatch");
  }
  const Raster valid = validity(gbuf);
  Raster unary(w, h, 2);
  for (std::size_t i = 0; i < init.alpha.pixel_count(); ++i) {
    const double c = std::clamp(double(init.confidence[i]), 1e-6, 1.0 - 1e-6);
    const bool lit = init.alpha[i] >= 0.5f;
    unary[2 * i + (lit ? 1 : 0)] = static_cast<float>(-std::log(c));
    unary[2 * i + (lit ? 0 : 1)] = static_cast<float>(-std::log(1.0 - c));
  }
  const DenseCrf crf(normalized_guide(guide, valid), valid, params);
  const Raster q = crf.infer(unary, params.iterations);

  VisibilityMask out = init;
  out.provenance = MaskProvenance::refined;
  for (std::size_t i = 0; i < init.alpha.pixel_count(); ++i) {
    if (valid[i] <= 0.0f) continue;
    const float q1 = q[2 * i + 1];
    if (q1 > 0.5f) {
      out.alpha[i] = 1.0f;
    } else if (q1 < 0.5f) {
      out.alpha[i] = 0.0f;
    }
    out.confidence[i] = out.alpha[i] > 0.5f ? q1 : 1.0f - q1;
  }
  return out;
}

void write_mask(const VisibilityMask& mask, const std::filesystem::path& path) {
  write_pfm(mask.alpha, path);
}

VisibilityMask read_mask(const std::filesystem::path& path) {
  VisibilityMask mask;
  mask.alpha = read_pfm(path);
  if (mask.alpha.channels() != 1) throw IoError(path.string() + ": mask must be single-channel");
  for (float v : mask.alpha.data()) {
    if (v != 0.0f && v != 1.0f) throw IoError(path.string() + ": mask values must be 0 or 1");
  }
  mask.confidence = Raster(mask.alpha.width(), mask.alpha.height(), 1, 1.0f);
  mask.provenance = MaskProvenance::refined;
  return mask;
}

double shadow_iou(const Raster& a, const Raster& b, const Raster& valid) {
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.pixel_count(); ++i) {
    if (valid[i] <= 0.0f) continue;
    const bool sa = a[i] < 0.5f, sb = b[i] < 0.5f;
    inter += sa && sb;
    uni += sa || sb;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace delight
