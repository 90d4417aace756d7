#include <doctest.h>

#include <cmath>
#include <random>

#include "delight/error.hpp"
#include "delight/gmm.hpp"
#include "delight/light_estimate.hpp"
#include "test_util.hpp"

using namespace delight;

namespace {

GBuffer plane_gbuffer(int w, int h, double k_sun) {
  GBuffer g;
  g.depth = Raster(w, h, 1, 20.0f);
  g.normal = Raster(w, h, 3);
  for (std::size_t i = 0; i < g.normal.pixel_count(); ++i) g.normal[3 * i + 2] = 1.0f;
  g.k_sun = Raster(w, h, 1, static_cast<float>(k_sun));
  g.k_sky = Raster(w, h, 1, 1.0f);
  g.alpha_sun = Raster(w, h, 1, 1.0f);
  g.face_id = Raster(w, h, 1, 0.0f);
  return g;
}

// Shadow left of column `edge`, rendered with the image model.
LinearImage step_image(const GBuffer& g, int edge, double albedo, double ratio) {
  LinearImage img(g.width(), g.height());
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      const double alpha = x >= edge ? 1.0 : 0.0;
      img.set_pixel(x, y, Vec3::Constant(albedo * (ratio * alpha * g.k_sun.at(x, y) + g.k_sky.at(x, y))));
    }
  }
  return img;
}

LitShadowPair good_pair(double ratio_value) {
  LitShadowPair p;
  p.i_lit = Vec3::Constant(0.5);
  p.i_shadow = Vec3::Constant(0.1);
  p.k_sun_lit = 0.7;
  p.k_sky_lit = p.k_sky_shadow = 1.0;
  p.depth_lit = p.depth_shadow = 10.0;
  p.ratio = Vec3::Constant(ratio_value);
  return p;
}

}  // namespace

TEST_CASE("pair ratio inverts the image model") {
  const double r = 0.4, ratio = 4.0, ks = 0.6;
  const Vec3 lit = Vec3::Constant(r * (ratio * ks + 1.0));
  const Vec3 shadow = Vec3::Constant(r * 1.0);
  CHECK(pair_ratio(lit, shadow, ks, 1.0, 1.0)[0] == doctest::Approx(ratio).epsilon(1e-12));
  // Different sky factors on the two sides.
  const Vec3 lit2 = Vec3::Constant(r * (ratio * ks + 0.8));
  const Vec3 shadow2 = Vec3::Constant(r * 0.9);
  CHECK(pair_ratio(lit2, shadow2, ks, 0.8, 0.9)[1] == doctest::Approx(ratio).epsilon(1e-12));
}

TEST_CASE("pairs straddle a straight boundary at the given offset") {
  const int edge = 20;
  GBuffer g = plane_gbuffer(40, 30, 0.6);
  for (int y = 0; y < 30; ++y) {
    for (int x = 0; x < edge; ++x) g.alpha_sun.at(x, y) = 0.0f;
  }
  const auto mask = projected_mask(g, 0.8);
  LinearImage img = step_image(g, edge, 0.3, 4.0);
  img.set_pixel(0, 0, Vec3::Constant(2.0));
  PairParams params;
  params.white_percentile = 100;
  const auto pairs = extract_boundary_pairs(mask, g, img, params, 2);
  REQUIRE(pairs.size() >= 20);
  for (const auto& p : pairs) {
    CHECK(p.image_id == 2);
    CHECK(p.lit_x == edge + params.offset);
    CHECK(p.shadow_x == edge - params.offset);
    CHECK(p.lit_y == p.shadow_y);
    CHECK(p.ratio[0] == doctest::Approx(4.0).epsilon(1e-5));
  }
  CHECK(filter_pairs(pairs, img, params).size() == pairs.size());
  const auto ratio = estimate_ratio(filter_pairs(pairs, img, params), RatioParams{});
  CHECK(ratio.accepted);
  CHECK(ratio.ratio[2] == doctest::Approx(4.0).epsilon(1e-5));
}

TEST_CASE("boundary normal points into the lit side") {
  GBuffer g = plane_gbuffer(20, 20, 0.6);
  for (int y = 10; y < 20; ++y) {
    for (int x = 0; x < 20; ++x) g.alpha_sun.at(x, y) = 0.0f;
  }
  const auto n = boundary_normal(g.alpha_sun, g, 8, 9);
  CHECK(n.x() == doctest::Approx(0.0));
  CHECK(n.y() == doctest::Approx(-1.0));
  const Raster uniform(5, 5, 1, 1.0f);
  CHECK(boundary_normal(uniform, plane_gbuffer(5, 5, 0.6), 2, 2).isZero());
}

TEST_CASE("filters reject unreliable pairs") {
  LinearImage img(4, 4, 0.5f);
  img.at(0, 0, 0) = 1.0f;  // white point
  PairParams params;
  params.white_percentile = 100;
  std::vector<LitShadowPair> pairs(7, good_pair(4.0));
  pairs[1].i_lit = Vec3::Constant(0.99);            // overexposed
  pairs[2].i_shadow = Vec3::Constant(0.01);         // underexposed
  pairs[3].n_shadow = Vec3(std::sin(0.1), 0, std::cos(0.1));  // about 5.7 degrees
  pairs[4].depth_shadow = 10.6;                     // depth jump
  pairs[5].k_sun_lit = 0.05;                        // grazing sun: k_sky / k_sun = 20
  pairs[6].ratio[1] = -1.0;
  const auto kept = filter_pairs(pairs, img, params);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].i_lit == pairs[0].i_lit);
}

TEST_CASE("too few pairs give a rejected estimate, not an exception") {
  std::vector<LitShadowPair> pairs(5, good_pair(4.0));
  IlluminationRatio r;
  CHECK_NOTHROW(r = estimate_ratio(pairs, RatioParams{}));
  CHECK_FALSE(r.accepted);
  CHECK_FALSE(r.reason.empty());
  CHECK_FALSE(estimate_ratio({}, RatioParams{}).accepted);
}

TEST_CASE("ratio survives 3% contamination") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> inlier(4.0, 0.02);
  std::uniform_real_distribution<double> outlier(0.5, 12.0);
  std::vector<LitShadowPair> pairs;
  for (int i = 0; i < 1000; ++i) {
    LitShadowPair p = good_pair(0);
    p.ratio = i % 33 == 0 ? Vec3(outlier(rng), outlier(rng), outlier(rng))
                          : Vec3(inlier(rng), inlier(rng), inlier(rng));
    pairs.push_back(p);
  }
  const auto r = estimate_ratio(pairs, RatioParams{});
  CHECK(r.accepted);
  for (int c = 0; c < 3; ++c) CHECK(r.ratio[c] == doctest::Approx(4.0).epsilon(0.01));
  CHECK(r.n_inliers >= 950);
}

TEST_CASE("bimodal ratios are rejected") {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> a(2.0, 0.05), b(6.0, 0.05);
  std::vector<LitShadowPair> pairs;
  for (int i = 0; i < 400; ++i) pairs.push_back(good_pair(i % 2 ? a(rng) : b(rng)));
  const auto r = estimate_ratio(pairs, RatioParams{});
  CHECK_FALSE(r.accepted);
  CHECK(r.reason.find("weight") != std::string::npos);
}

TEST_CASE("light.json round trip") {
  testutil::TempDir dir("light");
  std::vector<LitShadowPair> pairs(20, good_pair(3.5));
  auto r = estimate_ratio(pairs, RatioParams{});
  r.per_image_pairs = {{"view_00", 12}, {"view_01", 8}};
  write_light_json(r, dir / "light.json");
  const auto back = read_light_json(dir / "light.json");
  CHECK(back.ratio == r.ratio);
  CHECK(back.accepted == r.accepted);
  CHECK(back.n_pairs_total == 20);
  CHECK(back.per_image_pairs.size() == 2);
  CHECK(back.gmm[1].merged == r.gmm[1].merged);
}

TEST_CASE("GMM separates two clusters") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> a(1.0, 0.1), b(5.0, 0.3);
  std::vector<double> xs;
  for (int i = 0; i < 700; ++i) xs.push_back(a(rng));
  for (int i = 0; i < 300; ++i) xs.push_back(b(rng));
  const Gmm2 g = fit_gmm2(xs);
  CHECK_FALSE(g.merged);
  CHECK(g.major() == 0);
  CHECK(g.mean[0] == doctest::Approx(1.0).epsilon(0.02));
  CHECK(g.mean[1] == doctest::Approx(5.0).epsilon(0.02));
  CHECK(g.weight[0] == doctest::Approx(0.7).epsilon(0.01));
  CHECK(std::sqrt(g.variance[1]) == doctest::Approx(0.3).epsilon(0.1));
}

TEST_CASE("GMM log-likelihood never decreases") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> a(0.0, 1.0), b(2.0, 0.5);
  std::vector<double> xs;
  for (int i = 0; i < 500; ++i) xs.push_back(i % 3 ? a(rng) : b(rng));
  const Gmm2 g = fit_gmm2(xs);
  REQUIRE(g.loglik.size() >= 2);
  for (std::size_t i = 1; i < g.loglik.size(); ++i) CHECK(g.loglik[i] >= g.loglik[i - 1] - 1e-12);
  CHECK(gmm_loglik(g, xs) == doctest::Approx(g.loglik.back()).epsilon(1e-9));
}

TEST_CASE("identical samples collapse into one component") {
  const std::vector<double> xs(50, 3.25);
  const Gmm2 g = fit_gmm2(xs);
  CHECK(g.merged);
  CHECK(g.mean[g.major()] == 3.25);
  CHECK(g.weight[g.major()] == 1.0);
  CHECK(std::isfinite(g.variance[0]));
  CHECK(std::isfinite(g.variance[1]));
}

TEST_CASE("GMM input validation") {
  CHECK_THROWS_AS(fit_gmm2(std::vector<double>(7, 1.0)), InvalidArgument);
  std::vector<double> xs(10, 1.0);
  xs[3] = std::nan("");
  CHECK_THROWS_AS(fit_gmm2(xs), InvalidArgument);
}

TEST_CASE("float rounding levels do not form separate clusters") {
  std::vector<double> xs;
  for (int i = 0; i < 90; ++i) xs.push_back(i % 9 < 5 ? 3.9999999418 : 4.0000001261);
  const Gmm2 g = fit_gmm2(xs);
  CHECK(g.merged);
  CHECK(g.weight[g.major()] == 1.0);
  std::vector<LitShadowPair> pairs;
  for (double x : xs) pairs.push_back(good_pair(x));
  CHECK(estimate_ratio(pairs, RatioParams{}).accepted);
}
