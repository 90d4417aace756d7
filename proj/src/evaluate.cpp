#include "delight/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "delight/error.hpp"

namespace delight {

Metrics evaluate(const LinearImage& pred, const LinearImage& truth, const Raster& mask) {
  if (pred.width() != truth.width() || pred.height() != truth.height() ||
      (!mask.empty() && (mask.width() != pred.width() || mask.height() != pred.height()))) {
    throw InvalidArgument("evaluate: dimension mismatch");
  }
  Metrics m;
  double se = 0.0, peak = 0.0, rel = 0.0;
  std::size_t rel_n = 0;
  Vec3 pt = Vec3::Zero(), pp = Vec3::Zero(), tt = Vec3::Zero();
  for (int y = 0; y < pred.height(); ++y) {
    for (int x = 0; x < pred.width(); ++x) {
      if (!mask.empty() && mask.at(x, y) == 0.0f) continue;
      ++m.pixels;
      for (int c = 0; c < 3; ++c) {
        const double p = pred.at(x, y, c), t = truth.at(x, y, c);
        se += (p - t) * (p - t);
        peak = std::max(peak, t);
        if (t > 0.0) {
          rel += (p - t) * (p - t) / (t * t);
          ++rel_n;
        }
        pt[c] += p * t;
        pp[c] += p * p;
        tt[c] += t * t;
      }
    }
  }
  if (m.pixels == 0) throw InvalidArgument("evaluate: empty mask");
  const double mse = se / (3.0 * static_cast<double>(m.pixels));
  m.rmse = std::sqrt(mse);
  m.psnr = mse == 0.0 ? std::numeric_limits<double>::infinity()
                      : 10.0 * std::log10(peak * peak / mse);
  m.relative_rmse = rel_n ? std::sqrt(rel / static_cast<double>(rel_n)) : 0.0;
  for (int c = 0; c < 3; ++c) m.scale[c] = pp[c] > 0.0 ? pt[c] / pp[c] : 1.0;
  double res = 0.0, norm = 0.0;
  for (int y = 0; y < pred.height(); ++y) {
    for (int x = 0; x < pred.width(); ++x) {
      if (!mask.empty() && mask.at(x, y) == 0.0f) continue;
      for (int c = 0; c < 3; ++c) {
        const double d = m.scale[c] * pred.at(x, y, c) - truth.at(x, y, c);
        res += d * d;
      }
    }
  }
  norm = tt.sum();
  m.scale_invariant_rmse = norm > 0.0 ? std::sqrt(res / norm) : std::sqrt(res);
  return m;
}

double cross_image_consistency(const std::vector<LinearImage>& albedo,
                               const std::vector<Raster>& patch_id,
                               const std::vector<Raster>& masks, std::size_t min_pixels) {
  if (albedo.size() != patch_id.size() || albedo.size() != masks.size()) {
    throw InvalidArgument("consistency: input counts differ");
  }
  // patch -> per-image medians
  std::map<long, std::vector<double>> medians;
  for (std::size_t k = 0; k < albedo.size(); ++k) {
    std::map<long, std::vector<double>> values;
    for (int y = 0; y < albedo[k].height(); ++y) {
      for (int x = 0; x < albedo[k].width(); ++x) {
        const float id = patch_id[k].at(x, y);
        if (id < 0.0f || masks[k].at(x, y) == 0.0f) continue;
        values[std::lround(id)].push_back(albedo[k].luminance(x, y));
      }
    }
    for (auto& [id, v] : values) {
      if (v.size() < min_pixels) continue;
      std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
      medians[id].push_back(v[v.size() / 2]);
    }
  }
  double total = 0.0;
  std::size_t patches = 0;
  for (const auto& [id, v] : medians) {
    if (v.size() < 2) continue;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size());
    if (mean <= 0.0) continue;
    total += std::sqrt(var) / mean;
    ++patches;
  }
  return patches ? total / static_cast<double>(patches) : 0.0;
}

}  // namespace delight
