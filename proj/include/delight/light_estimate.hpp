#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "delight/crf.hpp"
#include "delight/gbuffer.hpp"
#include "delight/gmm.hpp"
#include "delight/image.hpp"

namespace delight {

/// Two pixels of one image on either side of a shadow boundary.
struct LitShadowPair {
  int image_id = 0;
  int lit_x = 0, lit_y = 0;
  int shadow_x = 0, shadow_y = 0;
  Vec3 i_lit = Vec3::Zero();
  Vec3 i_shadow = Vec3::Zero();
  double k_sun_lit = 0.0, k_sky_lit = 0.0;
  double k_sun_shadow = 0.0, k_sky_shadow = 0.0;
  Vec3 n_lit = Vec3::UnitZ();
  Vec3 n_shadow = Vec3::UnitZ();
  double depth_lit = 0.0, depth_shadow = 0.0;
  /// Per-channel L_sun / L_sky implied by the pair.
  Vec3 ratio = Vec3::Zero();
};

struct PairParams {
  int offset = 3;             // pixels stepped into each side
  int stride = 1;             // use every stride-th boundary pixel
  double max_normal_deg = 5.0;
  double depth_tau = 0.5;     // meters
  double k_ratio_lo = 0.1;    // bounds on k_sky / k_sun of the lit pixel
  double k_ratio_hi = 10.0;
  double exposure_lo = 0.02;  // fractions of the image white point
  double exposure_hi = 0.98;
  double white_percentile = 99.9;

  void validate() const;
};

struct RatioParams {
  double min_major_weight = 0.95;
  double max_variance_ratio = 0.25;  // major variance <= factor * minor variance

  void validate() const;
};

/// Boundary unit normal of a binary mask at (x, y), pointing toward the lit
/// side; zero when undefined.
Eigen::Vector2d boundary_normal(const Raster& alpha, const GBuffer& gbuf, int x, int y);

/// Pair ratio (I_lit * k_sky_shadow - I_shadow * k_sky_lit) / (I_shadow * k_sun_lit).
/// With equal sky factors this is ((I_lit - I_shadow) / I_shadow) * k_sky / k_sun.
Vec3 pair_ratio(const Vec3& i_lit, const Vec3& i_shadow, double k_sun_lit, double k_sky_lit,
                double k_sky_shadow);

/// Candidates from every lit pixel with a 4-connected shadow neighbor,
/// stepping `offset` pixels along the boundary normal to each side.
std::vector<LitShadowPair> extract_boundary_pairs(const VisibilityMask& mask, const GBuffer& gbuf,
                                                  const LinearImage& img, const PairParams& params,
                                                  int image_id = 0);

/// Exposure, normal, depth and k_sky/k_sun tests.
std::vector<LitShadowPair> filter_pairs(const std::vector<LitShadowPair>& pairs,
                                        const LinearImage& img, const PairParams& params);

struct IlluminationRatio {
  Vec3 ratio = Vec3::Zero();
  std::size_t n_pairs_total = 0;
  std::size_t n_inliers = 0;
  std::array<Gmm2, 3> gmm{};
  bool accepted = false;
  std::string reason;  // why the estimate was rejected
  std::vector<std::pair<std::string, std::size_t>> per_image_pairs;
};

/// Per-channel GMM over pooled pair ratios. Never throws on too few pairs;
/// the result is then rejected.
IlluminationRatio estimate_ratio(const std::vector<LitShadowPair>& pairs,
                                 const RatioParams& params);

void write_light_json(const IlluminationRatio& ratio, const std::filesystem::path& path);
IlluminationRatio read_light_json(const std::filesystem::path& path);

}  // namespace delight
