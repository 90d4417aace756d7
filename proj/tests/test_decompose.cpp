#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "delight/decompose.hpp"
#include "delight/error.hpp"
#include "delight/evaluate.hpp"
#include "test_util.hpp"

using namespace delight;

namespace {

GBuffer unit_gbuffer(int w, int h) {
  GBuffer g;
  g.depth = Raster(w, h, 1, 5.0f);
  g.normal = Raster(w, h, 3);
  g.k_sun = Raster(w, h, 1, 1.0f);
  g.k_sky = Raster(w, h, 1, 1.0f);
  g.alpha_sun = Raster(w, h, 1, 1.0f);
  g.face_id = Raster(w, h, 1, 0.0f);
  return g;
}

}  // namespace

TEST_CASE("shading assembles ratio * alpha * k_sun + k_sky") {
  GBuffer g = unit_gbuffer(3, 1);
  g.k_sun.at(1, 0) = 0.5f;
  g.k_sky.at(1, 0) = 0.75f;
  g.face_id.at(2, 0) = -1.0f;
  Raster alpha(3, 1, 1, 1.0f);
  alpha.at(1, 0) = 0.5f;
  const LinearImage s = assemble_shading(g, alpha, Vec3(4, 3, 2));
  CHECK(s.pixel(0, 0) == Vec3(5, 4, 3));
  CHECK(s.pixel(1, 0) == Vec3(1.75, 1.5, 1.25));
  CHECK(s.pixel(2, 0) == Vec3::Zero());
}

TEST_CASE("lit unit geometry: S = 5 and R = 0.2") {
  const GBuffer g = unit_gbuffer(2, 2);
  const LinearImage s = assemble_shading(g, g.alpha_sun, Vec3::Constant(4.0));
  const auto r = decompose_albedo(LinearImage(2, 2, 1.0f), s, geometry_flags(g), DecomposeParams{});
  for (int y = 0; y < 2; ++y) {
    for (int x = 0; x < 2; ++x) {
      CHECK(s.pixel(x, y) == Vec3::Constant(5.0));
      CHECK(r.albedo.at(x, y, 0) == doctest::Approx(0.2).epsilon(1e-7));
      CHECK(r.flag(x, y) == PixelFlag::ok);
    }
  }
}

TEST_CASE("near-zero shading is floored and flagged") {
  GBuffer g = unit_gbuffer(2, 1);
  g.k_sun.at(0, 0) = 0.0f;
  g.k_sky.at(0, 0) = 0.0f;
  const LinearImage s = assemble_shading(g, g.alpha_sun, Vec3::Constant(4.0));
  const auto r = decompose_albedo(LinearImage(2, 1, 0.3f), s, geometry_flags(g), DecomposeParams{});
  CHECK(r.flag(0, 0) == PixelFlag::shading_floor);
  CHECK(r.albedo.at(0, 0, 0) == doctest::Approx(0.3 / 1e-4).epsilon(1e-6));
  CHECK(std::isfinite(r.albedo.at(0, 0, 1)));
  CHECK(r.flag(1, 0) == PixelFlag::ok);
}

TEST_CASE("invalid geometry copies the input and saturation is flagged") {
  GBuffer g = unit_gbuffer(3, 1);
  g.face_id.at(0, 0) = -1.0f;
  LinearImage img(3, 1, 0.5f);
  img.at(2, 0, 1) = 0.95f;
  DecomposeParams params;
  params.saturation = 0.9;
  const auto r = decompose_albedo(img, assemble_shading(g, g.alpha_sun, Vec3::Constant(4.0)),
                                  geometry_flags(g), params);
  CHECK(r.flag(0, 0) == PixelFlag::invalid_geometry);
  CHECK(r.albedo.pixel(0, 0) == img.pixel(0, 0));
  CHECK(r.flag(1, 0) == PixelFlag::ok);
  CHECK(r.flag(2, 0) == PixelFlag::overexposed);
}

TEST_CASE("decomposition validates its inputs") {
  DecomposeParams p;
  p.shading_floor = 0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  const GBuffer g = unit_gbuffer(2, 2);
  CHECK_THROWS_AS(decompose_albedo(LinearImage(3, 2, 1.0f), LinearImage(2, 2, 1.0f),
                                   geometry_flags(g), DecomposeParams{}),
                  InvalidArgument);
}

TEST_CASE("albedo result files round trip") {
  testutil::TempDir dir("albedo");
  GBuffer g = unit_gbuffer(4, 3);
  g.face_id.at(1, 1) = -1.0f;
  g.k_sun.at(2, 2) = 0.0f;
  g.k_sky.at(2, 2) = 0.0f;
  LinearImage img(4, 3, 0.7f);
  img.at(3, 0, 0) = 2.0f;
  DecomposeParams params;
  params.saturation = 1.5;
  const auto r = decompose_albedo(img, assemble_shading(g, g.alpha_sun, Vec3(4, 4.5, 5)),
                                  geometry_flags(g), params);
  write_albedo_result(r, dir.path);
  const auto back = read_albedo_result(dir.path);
  CHECK(back.albedo == r.albedo);
  CHECK(back.shading == r.shading);
  CHECK(back.flags == r.flags);
}

TEST_CASE("a 0.01 error on unit truth is 40 dB") {
  std::mt19937 rng(1);
  LinearImage truth(20, 20, 1.0f), pred(20, 20);
  for (auto& v : pred.raster().data()) v = rng() % 2 ? 1.01f : 0.99f;
  const Metrics m = evaluate(pred, truth);
  CHECK(m.psnr == doctest::Approx(40.0).epsilon(0.2 / 40.0));
  CHECK(m.rmse == doctest::Approx(0.01).epsilon(1e-4));
  CHECK(m.pixels == 400);
  CHECK(std::isinf(evaluate(truth, truth).psnr));
}

TEST_CASE("scale-invariant error ignores a per-channel gain") {
  std::mt19937 rng(2);
  std::uniform_real_distribution<float> u(0.1f, 0.9f);
  LinearImage truth(16, 16), pred(16, 16);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      for (int c = 0; c < 3; ++c) {
        truth.at(x, y, c) = u(rng);
        pred.at(x, y, c) = truth.at(x, y, c) * static_cast<float>(c + 2);
      }
    }
  }
  const Metrics m = evaluate(pred, truth);
  CHECK(m.scale_invariant_rmse < 1e-6);
  CHECK(m.scale[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-5));
  CHECK(m.relative_rmse > 1.0);
}

TEST_CASE("evaluation rejects empty selections and size mismatches") {
  const LinearImage a(4, 4, 1.0f);
  CHECK_THROWS_AS(evaluate(a, a, Raster(4, 4, 1, 0.0f)), InvalidArgument);
  CHECK_THROWS_AS(evaluate(a, LinearImage(4, 5, 1.0f)), InvalidArgument);
  Raster half(4, 4, 1, 0.0f);
  half.at(0, 0) = 1.0f;
  CHECK(evaluate(a, a, half).pixels == 1);
}

TEST_CASE("cross-image consistency") {
  LinearImage a(10, 10, 0.5f), b(10, 10, 0.5f);
  const Raster ids(10, 10, 1, 3.0f), all(10, 10, 1, 1.0f);
  CHECK(cross_image_consistency({a, b}, {ids, ids}, {all, all}) == 0.0);
  for (auto& v : b.raster().data()) v = 1.5f;
  CHECK(cross_image_consistency({a, b}, {ids, ids}, {all, all}) == doctest::Approx(0.5));
  // One image alone shares no patches.
  CHECK(cross_image_consistency({a}, {ids}, {all}) == 0.0);
}
