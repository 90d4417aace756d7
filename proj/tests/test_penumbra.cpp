#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "delight/crf.hpp"
#include "delight/error.hpp"
#include "delight/gbuffer.hpp"
#include "delight/penumbra.hpp"
#include "delight/solar.hpp"
#include "test_util.hpp"

using namespace delight;

namespace {

// Box shadow on a plane under an area sun, seen from above.
struct SoftScene {
  RenderedView view;
  GBuffer gbuf;
  IlluminationRatio ratio;
};

SoftScene soft_scene(int size) {
  SyntheticScene s = testutil::flat_scene(0.4, 80.0);
  add_box(s, Vec3::Zero(), 8, 8, 10, Vec3::Constant(0.5), Vec3::Constant(0.35));
  const Bvh bvh(s.mesh);
  LightingFrame light;
  light.sun = SunDirection::from_angles(160, 35).vector;
  RenderSettings rs;
  rs.l_sun = Vec3::Constant(4.0);
  rs.l_sky = Vec3::Constant(1.0);
  rs.sun_radius_deg = 2.5;
  rs.sun_samples = 64;
  const CameraPose cam = testutil::nadir(40, 50, size, 0, 8);
  SoftScene out;
  out.view = render_view(s, bvh, cam, light, rs, size, size);
  out.gbuf = rasterize_gbuffer(bvh, cam, light, size, size);
  out.ratio.ratio = Vec3::Constant(4.0);
  out.ratio.accepted = true;
  return out;
}

std::vector<double> dense_fixed_solve(const ShadowProfile& p, const std::vector<double>& w,
                                      double lambda) {
  const int n = static_cast<int>(p.size());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    h(i, i) += w[i];
    g(i) += w[i] * p.alpha0[i];
  }
  for (int i = 0; i + 1 < n; ++i) {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
    d(i) = -p.a[i];
    d(i + 1) = p.a[i + 1];
    h += lambda * d * d.transpose();
    g -= lambda * d * (p.b[i + 1] - p.b[i]);
  }
  // Eliminate the two pinned ends.
  Eigen::VectorXd x(n);
  x(0) = p.alpha0.front();
  x(n - 1) = p.alpha0.back();
  const Eigen::VectorXd rhs = g.segment(1, n - 2) - h.block(1, 0, n - 2, 1) * x(0) -
                              h.block(1, n - 1, n - 2, 1) * x(n - 1);
  x.segment(1, n - 2) = h.block(1, 1, n - 2, n - 2).ldlt().solve(rhs);
  return {x.data(), x.data() + n};
}

}  // namespace

TEST_CASE("parameter validation") {
  PenumbraParams p;
  CHECK_NOTHROW(p.validate());
  p.lambda = -1;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = {};
  p.half_length = 0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("data weights dip around the transition") {
  std::mt19937_64 rng(1);
  const auto p = testutil::random_profile(rng);
  const auto w = profile_weights(p, PenumbraParams{});
  REQUIRE(w.size() == 25);
  CHECK(w[12] == 0.01);
  CHECK(w[11] == 0.01);
  CHECK(w[0] == 1.0);
  CHECK(w[24] == 1.0);
  for (std::size_t i = 12; i + 1 < w.size(); ++i) CHECK(w[i + 1] >= w[i]);
}

TEST_CASE("lambda = 0 returns the binary labels") {
  std::mt19937_64 rng(2);
  const auto p = testutil::random_profile(rng);
  const auto w = profile_weights(p, PenumbraParams{});
  CHECK(solve_profile(p, w, 0.0) == p.alpha0);
}

TEST_CASE("a lit profile on constant albedo stays lit") {
  std::mt19937_64 rng(3);
  auto p = testutil::random_profile(rng);
  for (std::size_t i = 0; i < p.size(); ++i) {
    p.alpha0[i] = 1.0;
    p.a[i] = 2.0;
    p.b[i] = 1.0;
  }
  const auto x = solve_profile(p, profile_weights(p, PenumbraParams{}), 1.0);
  for (double v : x) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("unconstrained solve matches a dense solve") {
  std::mt19937_64 rng(4);
  for (int k = 0; k < 20; ++k) {
    const auto p = testutil::random_profile(rng);
    const auto w = profile_weights(p, PenumbraParams{});
    const auto a = solve_profile_unconstrained(p, w, 1.0);
    const auto b = dense_fixed_solve(p, w, 1.0);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-9));
  }
}

TEST_CASE("box-constrained solve matches a projected-gradient oracle") {
  std::mt19937_64 rng(5);
  int active = 0;
  for (int k = 0; k < 100; ++k) {
    const auto p = testutil::random_profile(rng);
    const auto w = profile_weights(p, PenumbraParams{});
    const double lambda = k % 2 ? 1.0 : 5.0;
    const auto x = solve_profile(p, w, lambda);
    const auto ref = testutil::fista_profile(p, w, lambda);
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK(std::abs(x[i] - ref[i]) <= 1e-6);
      CHECK(x[i] >= 0.0);
      CHECK(x[i] <= 1.0);
      active += i > 0 && i + 1 < x.size() && (x[i] == 0.0 || x[i] == 1.0);
    }
    CHECK(x.front() == p.alpha0.front());
    CHECK(x.back() == p.alpha0.back());
    CHECK(profile_objective(p, w, lambda, x) <= profile_objective(p, w, lambda, ref) + 1e-12);
  }
  CHECK(active > 0);
}

TEST_CASE("solver rejects non-positive weights") {
  std::mt19937_64 rng(6);
  const auto p = testutil::random_profile(rng);
  std::vector<double> w(p.size(), 1.0);
  w[3] = 0.0;
  CHECK_THROWS_AS(solve_profile(p, w, 1.0), InvalidArgument);
}

TEST_CASE("profiles need an accepted ratio") {
  const auto sc = soft_scene(48);
  IlluminationRatio rejected = sc.ratio;
  rejected.accepted = false;
  CHECK_THROWS(extract_profiles(projected_mask(sc.gbuf, 0.8), sc.gbuf, sc.view.image, rejected,
                                PenumbraParams{}));
}

TEST_CASE("soft shadows move toward the true visibility") {
  const auto sc = soft_scene(96);
  const auto mask = projected_mask(sc.gbuf, 0.8);
  const PenumbraParams params;
  const auto profiles = extract_profiles(mask, sc.gbuf, sc.view.image, sc.ratio, params);
  REQUIRE(profiles.size() >= 10);
  std::vector<std::vector<double>> solved;
  double err_binary = 0, err_soft = 0;
  double tv_binary = 0, tv_soft = 0;
  for (const auto& p : profiles) {
    REQUIRE(p.size() == 2u * params.half_length + 1);
    CHECK(p.direction.norm() == doctest::Approx(1.0));
    CHECK(p.alpha0.front() == 0.0);
    CHECK(p.alpha0.back() == 1.0);
    solved.push_back(solve_profile(p, profile_weights(p, params), params.lambda));
    tv_binary += inverse_albedo_tv(p, p.alpha0);
    tv_soft += inverse_albedo_tv(p, solved.back());
    for (std::size_t i = 0; i < p.size(); ++i) {
      const Eigen::Vector2d q = p.anchor + p.t[i] * p.direction;
      const double truth = sc.view.alpha.bilinear(q.x(), q.y());
      err_binary += std::pow(p.alpha0[i] - truth, 2);
      err_soft += std::pow(solved.back()[i] - truth, 2);
    }
  }
  CHECK(err_soft < 0.5 * err_binary);
  CHECK(tv_soft < tv_binary);

  const auto soft = composite_soft_mask(mask, profiles, solved);
  std::size_t touched = 0;
  for (std::size_t i = 0; i < soft.alpha.pixel_count(); ++i) {
    CHECK(soft.alpha[i] >= 0.0f);
    CHECK(soft.alpha[i] <= 1.0f);
    if (soft.blend_weight[i] == 0.0f) {
      CHECK(soft.alpha[i] == mask.alpha[i]);
    } else {
      ++touched;
    }
  }
  CHECK(touched > 0);
}
