#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "delight/gbuffer.hpp"
#include "delight/image.hpp"

namespace delight {

enum class MaskProvenance { projected, refined };

/// Binary sun-visibility labels with a per-pixel confidence in the label.
struct VisibilityMask {
  Raster alpha;       // 0 or 1
  Raster confidence;  // probability of the stored label
  MaskProvenance provenance = MaskProvenance::projected;

  int width() const { return alpha.width(); }
  int height() const { return alpha.height(); }
};

struct CrfParams {
  double sigma_xy = 40.0;   // appearance kernel, pixels
  double sigma_rgb = 13.0;  // appearance kernel, on the 0..255 guide
  double w_appearance = 10.0;
  double sigma_s = 3.0;  // smoothness kernel, pixels
  double w_smooth = 3.0;
  int iterations = 5;
  double unary_confidence = 0.8;
  /// "explicit", "grid" or "auto" (explicit up to explicit_max_pixels).
  std::string backend = "auto";
  int explicit_max_pixels = 8192;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

/// Mask from the G-buffer's ray-traced visibility, every pixel at `confidence`.
VisibilityMask projected_mask(const GBuffer& gbuf, double confidence);

/// Guide scaled so its 99.9th percentile over valid pixels maps to 255,
/// clamped to [0, 255]. Used only for appearance distances.
Raster normalized_guide(const LinearImage& img, const Raster& valid);

/// Two-label fully connected CRF with Potts compatibility and Gaussian
/// appearance and smoothness kernels. Messages are kernel-weighted averages
/// over all other valid pixels.
class DenseCrf {
 public:
  /// `guide` is the normalized guide; `valid` is 1 on pixels taking part.
  DenseCrf(Raster guide, Raster valid, const CrfParams& params);

  /// One parallel mean-field update. `q` and `unary` have 2 channels; unary
  /// holds -log p per label. Invalid pixels copy q.
  Raster step(const Raster& q, const Raster& unary) const;
  /// Runs `iterations` steps starting from the unary distribution.
  Raster infer(const Raster& unary, int iterations) const;

  bool uses_grid() const { return use_grid_; }

 private:
  // Kernel-weighted sums of q1 over the other valid pixels.
  void filter(const Raster& q1, std::vector<double>& app, std::vector<double>& smooth) const;
  // The same sums divided by the kernel mass.
  void messages(const Raster& q1, Raster& app, Raster& smooth) const;

  struct Grid;

  Raster guide_;
  Raster valid_;
  CrfParams params_;
  bool use_grid_ = false;
  std::shared_ptr<const Grid> grid_;
  // Kernel mass over the other valid pixels, per pixel.
  std::vector<double> app_norm_, smooth_norm_;
};

/// Softmax of -unary (the q of a CRF without pairwise terms).
Raster unary_distribution(const Raster& unary);

VisibilityMask refine_visibility(const VisibilityMask& init, const LinearImage& guide,
                                 const GBuffer& gbuf, const CrfParams& params);

/// Single-channel PFM of the labels.
void write_mask(const VisibilityMask& mask, const std::filesystem::path& path);
VisibilityMask read_mask(const std::filesystem::path& path);

/// Intersection over union of the 0-labels (shadow) of two masks over
/// pixels where `valid` is nonzero. 1 when both are empty.
double shadow_iou(const Raster& a, const Raster& b, const Raster& valid);

}  // namespace delight
