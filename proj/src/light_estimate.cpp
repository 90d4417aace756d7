#include "delight/light_estimate.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "delight/error.hpp"

namespace delight {

void PairParams::validate() const {
  if (offset < 1 || offset > 64) throw ConfigError("pairs: offset must be in [1, 64]");
  if (stride < 1) throw ConfigError("pairs: stride must be >= 1");
  if (!(max_normal_deg > 0 && max_normal_deg < 90)) {
    throw ConfigError("pairs: max_normal_deg must be in (0, 90)");
  }
  if (!(depth_tau > 0)) throw ConfigError("pairs: depth_tau must be positive");
  if (!(k_ratio_lo > 0 && k_ratio_hi > k_ratio_lo)) {
    throw ConfigError("pairs: need 0 < k_ratio_lo < k_ratio_hi");
  }
  if (!(exposure_lo >= 0 && exposure_hi > exposure_lo && exposure_hi <= 1)) {
    throw ConfigError("pairs: need 0 <= exposure_lo < exposure_hi <= 1");
  }
  if (!(white_percentile > 0 && white_percentile <= 100)) {
    throw ConfigError("pairs: white_percentile must be in (0, 100]");
  }
}

void RatioParams::validate() const {
  if (!(min_major_weight > 0.5 && min_major_weight <= 1)) {
    throw ConfigError("ratio: min_major_weight must be in (0.5, 1]");
  }
  if (!(max_variance_ratio > 0 && max_variance_ratio <= 1)) {
    throw ConfigError("ratio: max_variance_ratio must be in (0, 1]");
  }
}

Eigen::Vector2d boundary_normal(const Raster& alpha, const GBuffer& gbuf, int x, int y) {
  Eigen::Vector2d g = Eigen::Vector2d::Zero();
  for (int dy = -2; dy <= 2; ++dy) {
    for (int dx = -2; dx <= 2; ++dx) {
      const int xx = x + dx, yy = y + dy;
      if (!alpha.contains(xx, yy) || !gbuf.valid(xx, yy)) continue;
      const double s = alpha.at(xx, yy) >= 0.5f ? 1.0 : -1.0;
      g += s * Eigen::Vector2d(dx, dy);
    }
  }
  const double n = g.norm();
  return n > 0.0 ? Eigen::Vector2d(g / n) : Eigen::Vector2d::Zero();
}

Vec3 pair_ratio(const Vec3& i_lit, const Vec3& i_shadow, double k_sun_lit, double k_sky_lit,
                double k_sky_shadow) {
  Vec3 r;
  for (int c = 0; c < 3; ++c) {
    r[c] = (i_lit[c] * k_sky_shadow - i_shadow[c] * k_sky_lit) / (i_shadow[c] * k_sun_lit);
  }
  return r;
}

std::vector<LitShadowPair> extract_boundary_pairs(const VisibilityMask& mask, const GBuffer& gbuf,
                                                  const LinearImage& img, const PairParams& params,
                                                  int image_id) {
  const int w = mask.width(), h = mask.height();
  if (gbuf.width() != w || gbuf.height() != h || img.width() != w || img.height() != h) {
    throw InvalidArgument("extract_boundary_pairs: dimension mismatch");
  }
  const Raster& a = mask.alpha;
  const auto lit = [&](int x, int y) { return gbuf.valid(x, y) && a.at(x, y) >= 0.5f; };
  const auto shadow = [&](int x, int y) { return gbuf.valid(x, y) && a.at(x, y) < 0.5f; };

  std::vector<LitShadowPair> pairs;
  long counter = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!lit(x, y)) continue;
      const bool boundary = (x > 0 && shadow(x - 1, y)) || (x + 1 < w && shadow(x + 1, y)) ||
                            (y > 0 && shadow(x, y - 1)) || (y + 1 < h && shadow(x, y + 1));
      if (!boundary) continue;
      if (counter++ % params.stride != 0) continue;
      const Eigen::Vector2d d = boundary_normal(a, gbuf, x, y);
      if (d.isZero()) continue;
      const int lx = static_cast<int>(std::lround(x + params.offset * d.x()));
      const int ly = static_cast<int>(std::lround(y + params.offset * d.y()));
      const int sx = static_cast<int>(std::lround(x - params.offset * d.x()));
      const int sy = static_cast<int>(std::lround(y - params.offset * d.y()));
      if (!a.contains(lx, ly) || !a.contains(sx, sy) || !lit(lx, ly) || !shadow(sx, sy)) continue;
      LitShadowPair p;
      p.image_id = image_id;
      p.lit_x = lx;
      p.lit_y = ly;
      p.shadow_x = sx;
      p.shadow_y = sy;
      p.i_lit = img.pixel(lx, ly);
      p.i_shadow = img.pixel(sx, sy);
      p.k_sun_lit = gbuf.k_sun.at(lx, ly);
      p.k_sky_lit = gbuf.k_sky.at(lx, ly);
      p.k_sun_shadow = gbuf.k_sun.at(sx, sy);
      p.k_sky_shadow = gbuf.k_sky.at(sx, sy);
      p.n_lit = gbuf.normal_at(lx, ly);
      p.n_shadow = gbuf.normal_at(sx, sy);
      p.depth_lit = gbuf.depth.at(lx, ly);
      p.depth_shadow = gbuf.depth.at(sx, sy);
      p.ratio = pair_ratio(p.i_lit, p.i_shadow, p.k_sun_lit, p.k_sky_lit, p.k_sky_shadow);
      pairs.push_back(p);
    }
  }
  return pairs;
}

std::vector<LitShadowPair> filter_pairs(const std::vector<LitShadowPair>& pairs,
                                        const LinearImage& img, const PairParams& params) {
  std::vector<float> values(img.raster().data().begin(), img.raster().data().end());
  const double white = percentile(std::move(values), params.white_percentile);
  const double lo = params.exposure_lo * white, hi = params.exposure_hi * white;
  const double cos_max = std::cos(params.max_normal_deg * std::numbers::pi / 180.0);

  std::vector<LitShadowPair> kept;
  for (const auto& p : pairs) {
    const auto exposed = [&](const Vec3& v) { return (v.array() >= lo).all() && (v.array() <= hi).all(); };
    if (!exposed(p.i_lit) || !exposed(p.i_shadow)) continue;
    if (!(p.n_lit.dot(p.n_shadow) > cos_max)) continue;
    if (!(std::abs(p.depth_lit - p.depth_shadow) < params.depth_tau)) continue;
    if (!(p.k_sun_lit > 0.0)) continue;
    const double kr = p.k_sky_lit / p.k_sun_lit;
    if (!(kr > params.k_ratio_lo && kr < params.k_ratio_hi)) continue;
    if (!p.ratio.allFinite() || (p.ratio.array() <= 0.0).any()) continue;
    kept.push_back(p);
  }
  return kept;
}

IlluminationRatio estimate_ratio(const std::vector<LitShadowPair>& pairs,
                                 const RatioParams& params) {
  params.validate();
  IlluminationRatio out;
  out.n_pairs_total = pairs.size();
  if (pairs.size() < 8) {
    out.reason = pairs.empty() ? "no lit/shadow pairs found"
                               : "fewer than 8 lit/shadow pairs found";
    return out;
  }
  out.accepted = true;
  std::size_t inliers = pairs.size();
  for (int c = 0; c < 3; ++c) {
    std::vector<double> xs;
    xs.reserve(pairs.size());
    for (const auto& p : pairs) xs.push_back(p.ratio[c]);
    const Gmm2 g = fit_gmm2(xs);
    out.gmm[c] = g;
    const int k = g.major();
    out.ratio[c] = g.mean[k];
    const bool weight_ok = g.weight[k] >= params.min_major_weight;
    const bool variance_ok =
        g.merged || g.variance[k] <= params.max_variance_ratio * g.variance[g.minor()];
    if (!weight_ok || !variance_ok) {
      out.accepted = false;
      if (out.reason.empty()) {
        out.reason = "channel " + std::to_string(c) +
                     (weight_ok ? ": major component not tight enough"
                                : ": major component below weight threshold");
      }
    }
    inliers = std::min(
        inliers, static_cast<std::size_t>(std::llround(g.weight[k] * static_cast<double>(xs.size()))));
  }
  out.n_inliers = inliers;
  return out;
}

void write_light_json(const IlluminationRatio& r, const std::filesystem::path& path) {
  using nlohmann::json;
  json gmms = json::array();
  for (const auto& g : r.gmm) {
    gmms.push_back({{"weight", g.weight},
                    {"mean", g.mean},
                    {"variance", g.variance},
                    {"merged", g.merged},
                    {"iterations", g.iterations}});
  }
  json per_image = json::object();
  for (const auto& [stem, n] : r.per_image_pairs) per_image[stem] = n;
  const json doc{{"ratio", {r.ratio.x(), r.ratio.y(), r.ratio.z()}},
                 {"accepted", r.accepted},
                 {"reason", r.reason},
                 {"n_pairs_total", r.n_pairs_total},
                 {"n_inliers", r.n_inliers},
                 {"gmm", gmms},
                 {"per_image_pairs", per_image}};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

IlluminationRatio read_light_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    const auto doc = nlohmann::json::parse(in);
    IlluminationRatio r;
    const auto ratio = doc.at("ratio").get<std::vector<double>>();
    if (ratio.size() != 3) throw IoError(path.string() + ": ratio must have 3 entries");
    r.ratio = Vec3(ratio[0], ratio[1], ratio[2]);
    r.accepted = doc.at("accepted").get<bool>();
    r.reason = doc.value("reason", "");
    r.n_pairs_total = doc.value("n_pairs_total", std::size_t{0});
    r.n_inliers = doc.value("n_inliers", std::size_t{0});
    if (doc.contains("gmm")) {
      for (std::size_t c = 0; c < 3 && c < doc["gmm"].size(); ++c) {
        const auto& g = doc["gmm"][c];
        r.gmm[c].weight = g.at("weight").get<std::array<double, 2>>();
        r.gmm[c].mean = g.at("mean").get<std::array<double, 2>>();
        r.gmm[c].variance = g.at("variance").get<std::array<double, 2>>();
        r.gmm[c].merged = g.value("merged", false);
        r.gmm[c].iterations = g.value("iterations", 0);
      }
    }
    if (doc.contains("per_image_pairs")) {
      for (const auto& [stem, n] : doc["per_image_pairs"].items()) {
        r.per_image_pairs.emplace_back(stem, n.get<std::size_t>());
      }
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace delight
