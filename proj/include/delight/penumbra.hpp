#pragma once

#include <vector>

#include "delight/crf.hpp"
#include "delight/gbuffer.hpp"
#include "delight/image.hpp"
#include "delight/light_estimate.hpp"

namespace delight {

/// Samples along a line crossing a shadow boundary, shadow side first.
struct ShadowProfile {
  Eigen::Vector2d anchor = Eigen::Vector2d::Zero();     // pixel position of t = 0
  Eigen::Vector2d direction = Eigen::Vector2d::UnitX();  // unit, toward the lit side
  std::vector<double> t;       // pixels along direction
  std::vector<double> alpha0;  // binary labels
  std::vector<double> lum;     // image luminance
  std::vector<double> k_sun;
  std::vector<double> k_sky;
  std::vector<double> a;  // sun gain r * k_sun / I, normalized
  std::vector<double> b;  // sky term k_sky / I, normalized
  int transition = 0;     // first lit sample

  std::size_t size() const { return t.size(); }
};

struct PenumbraParams {
  int half_length = 12;  // samples each side of the anchor
  int stride = 2;        // boundary pixels between profiles
  double lambda = 1.0;
  double transition_halfwidth = 4.0;  // low data weight within this distance
  double low_weight = 0.01;
  double max_normal_deg = 5.0;
  double exposure_floor = 0.02;  // fraction of the image white point

  void validate() const;
};

/// One profile per `stride` lit boundary pixels. Profiles leaving the image,
/// touching invalid pixels, with more than one label transition, below the
/// exposure floor, or crossing a normal change larger than max_normal_deg
/// are discarded.
std::vector<ShadowProfile> extract_profiles(const VisibilityMask& mask, const GBuffer& gbuf,
                                            const LinearImage& img, const IlluminationRatio& ratio,
                                            const PenumbraParams& params);

/// Data weights: low_weight within transition_halfwidth of the transition,
/// rising linearly to 1 over the next transition_halfwidth samples.
std::vector<double> profile_weights(const ShadowProfile& p, const PenumbraParams& params);

/// 1/2 sum P (alpha - alpha0)^2 + lambda/2 sum (D (a alpha + b))^2.
double profile_objective(const ShadowProfile& p, const std::vector<double>& weights, double lambda,
                         const std::vector<double>& alpha);

/// Unconstrained minimizer of profile_objective with both end samples held
/// at alpha0 (tridiagonal solve).
std::vector<double> solve_profile_unconstrained(const ShadowProfile& p,
                                                const std::vector<double>& weights, double lambda);

/// Minimizer subject to 0 <= alpha <= 1 and fixed end samples, by a primal
/// active-set method over tridiagonal subproblems.
std::vector<double> solve_profile(const ShadowProfile& p, const std::vector<double>& weights,
                                  double lambda);

/// Soft visibility after splatting solved profiles.
struct SoftVisibility {
  Raster alpha;
  Raster blend_weight;
};

/// Splats every sample with weight (1 - |u|) * exp(-v^2 / 2), u along and v
/// across the profile line, and normalizes. Untouched pixels keep the
/// binary mask value.
SoftVisibility composite_soft_mask(const VisibilityMask& mask,
                                   const std::vector<ShadowProfile>& profiles,
                                   const std::vector<std::vector<double>>& solved);

/// Sum of |1/R(t+1) - 1/R(t)| along a profile for the given visibility.
double inverse_albedo_tv(const ShadowProfile& p, const std::vector<double>& alpha);

}  // namespace delight
