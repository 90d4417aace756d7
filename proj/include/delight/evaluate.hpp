#pragma once

#include <vector>

#include "delight/image.hpp"

namespace delight {

struct Metrics {
  std::size_t pixels = 0;
  /// 10 log10(peak^2 / MSE), peak = max truth value in the mask; +inf when
  /// the images agree exactly.
  double psnr = 0.0;
  double rmse = 0.0;
  /// RMS of (pred - truth) / truth over samples with truth > 0.
  double relative_rmse = 0.0;
  /// After fitting one least-squares scale per channel:
  /// ||s pred - truth|| / ||truth||.
  double scale_invariant_rmse = 0.0;
  Vec3 scale = Vec3::Ones();
};

/// Metrics over pixels where `mask` is nonzero (all pixels when mask is
/// empty). Throws InvalidArgument on size mismatch or an empty selection.
Metrics evaluate(const LinearImage& pred, const LinearImage& truth, const Raster& mask = {});

/// Cross-image consistency: for every surface patch id seen by at least two
/// images with `min_pixels` pixels each, the per-image median albedo
/// luminance; returns the mean over patches of std/mean across images.
double cross_image_consistency(const std::vector<LinearImage>& albedo,
                               const std::vector<Raster>& patch_id,
                               const std::vector<Raster>& masks, std::size_t min_pixels = 20);

}  // namespace delight
