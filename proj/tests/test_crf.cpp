#include <doctest.h>

#include <cmath>
#include <random>

#include "delight/crf.hpp"
#include "delight/error.hpp"

using namespace delight;

namespace {

GBuffer all_valid(int w, int h) {
  GBuffer g;
  g.depth = Raster(w, h, 1, 10.0f);
  g.normal = Raster(w, h, 3);
  g.k_sun = Raster(w, h, 1, 0.7f);
  g.k_sky = Raster(w, h, 1, 1.0f);
  g.alpha_sun = Raster(w, h, 1, 1.0f);
  g.face_id = Raster(w, h, 1, 0.0f);
  return g;
}

struct Case {
  LinearImage image;
  Raster truth;
  VisibilityMask noisy;
  GBuffer gbuf;
};

// Disc-shaped shadow on a textured lit background, labels flipped at `noise`.
Case noisy_case(int size, double noise, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  std::normal_distribution<double> jitter(0, 0.01);
  Case c;
  c.image = LinearImage(size, size);
  c.truth = Raster(size, size, 1, 1.0f);
  c.gbuf = all_valid(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double r = std::hypot(x - 0.45 * size, y - 0.55 * size);
      const bool shadow = r < 0.3 * size;
      const double base = shadow ? 0.12 : 0.55;
      for (int ch = 0; ch < 3; ++ch) {
        c.image.at(x, y, ch) = static_cast<float>(std::max(0.0, base * (1.0 + 0.1 * ch) + jitter(rng)));
      }
      c.truth.at(x, y) = shadow ? 0.0f : 1.0f;
    }
  }
  c.gbuf.alpha_sun = c.truth;
  for (auto& v : c.gbuf.alpha_sun.data()) {
    if (u(rng) < noise) v = 1.0f - v;
  }
  c.noisy = projected_mask(c.gbuf, 0.8);
  return c;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("parameter validation") {
  CrfParams p;
  CHECK_NOTHROW(p.validate());
  p.unary_confidence = 0.5;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = {};
  p.sigma_xy = 0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = {};
  p.backend = "gpu";
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("projected mask keeps ray-traced labels at the given confidence") {
  GBuffer g = all_valid(4, 3);
  g.alpha_sun.at(1, 1) = 0.0f;
  const auto m = projected_mask(g, 0.8);
  CHECK(m.alpha == g.alpha_sun);
  CHECK(m.provenance == MaskProvenance::projected);
  for (float v : m.confidence.data()) CHECK(v == 0.8f);
}

TEST_CASE("constant guide leaves a clean half split unchanged") {
  for (const char* backend : {"explicit", "grid"}) {
    const int w = 40, h = 30;
    GBuffer g = all_valid(w, h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w / 2; ++x) g.alpha_sun.at(x, y) = 0.0f;
    }
    CrfParams p;
    p.backend = backend;
    const auto init = projected_mask(g, 0.8);
    const auto out = refine_visibility(init, LinearImage(w, h, 0.3f), g, p);
    CHECK(out.alpha == init.alpha);
    CHECK(out.provenance == MaskProvenance::refined);
  }
}

TEST_CASE("without pairwise terms inference returns the unary distribution") {
  const auto c = noisy_case(24, 0.1, 1);
  CrfParams p;
  p.w_appearance = 0;
  p.w_smooth = 0;
  const auto out = refine_visibility(c.noisy, c.image, c.gbuf, p);
  CHECK(out.alpha == c.noisy.alpha);
  for (float v : out.confidence.data()) CHECK(v == doctest::Approx(0.8).epsilon(1e-6));
}

TEST_CASE("two-pixel fixed point matches a bisection oracle") {
  Raster guide(2, 1, 3, 100.0f);
  Raster valid(2, 1, 1, 1.0f);
  CrfParams p;
  p.w_appearance = 0.6;
  p.w_smooth = 0.3;
  p.backend = "explicit";
  const DenseCrf crf(guide, valid, p);
  Raster unary(2, 1, 2);
  unary[0] = static_cast<float>(-std::log(0.3));  // pixel a prefers label 1
  unary[1] = static_cast<float>(-std::log(0.7));
  unary[2] = static_cast<float>(-std::log(0.6));  // pixel b prefers label 0
  unary[3] = static_cast<float>(-std::log(0.4));
  const double da = double(unary[0]) - unary[1], db = double(unary[2]) - unary[3];
  const double wsum = p.w_appearance + p.w_smooth;
  const auto fa = [&](double qb) { return sigmoid(da + wsum * (2 * qb - 1)); };
  const auto fb = [&](double qa) { return sigmoid(db + wsum * (2 * qa - 1)); };
  double lo = 0, hi = 1;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (fa(fb(mid)) > mid ? lo : hi) = mid;
  }
  const double qa = 0.5 * (lo + hi), qb = fb(qa);
  const Raster q = crf.infer(unary, 100);
  CHECK(q[1] == doctest::Approx(qa).epsilon(1e-6));
  CHECK(q[3] == doctest::Approx(qb).epsilon(1e-6));
}

TEST_CASE("every update is a distribution") {
  const auto c = noisy_case(32, 0.05, 2);
  CrfParams p;
  const Raster valid(32, 32, 1, 1.0f);
  const DenseCrf crf(normalized_guide(c.image, valid), valid, p);
  std::mt19937 rng(4);
  std::uniform_real_distribution<float> u(0.01f, 0.99f);
  Raster q(32, 32, 2), unary(32, 32, 2);
  for (std::size_t i = 0; i < q.pixel_count(); ++i) {
    q[2 * i + 1] = u(rng);
    q[2 * i] = 1.0f - q[2 * i + 1];
    unary[2 * i] = u(rng);
    unary[2 * i + 1] = u(rng);
  }
  const Raster next = crf.step(q, unary);
  for (std::size_t i = 0; i < q.pixel_count(); ++i) {
    CHECK(next[2 * i] + next[2 * i + 1] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(next[2 * i] >= 0.0f);
    CHECK(next[2 * i + 1] >= 0.0f);
  }
}

TEST_CASE("refinement improves shadow IoU on both backends") {
  for (const char* backend : {"explicit", "grid"}) {
    const auto c = noisy_case(64, 0.05, 3);
    CrfParams p;
    p.backend = backend;
    const Raster valid(64, 64, 1, 1.0f);
    const double before = shadow_iou(c.noisy.alpha, c.truth, valid);
    const auto out = refine_visibility(c.noisy, c.image, c.gbuf, p);
    const double after = shadow_iou(out.alpha, c.truth, valid);
    INFO(backend << ": " << before << " -> " << after);
    CHECK(after > before);
    CHECK(after > 0.97);
  }
}

TEST_CASE("grid and explicit backends agree on labels") {
  const auto c = noisy_case(64, 0.05, 5);
  CrfParams pe, pg;
  pe.backend = "explicit";
  pg.backend = "grid";
  const auto a = refine_visibility(c.noisy, c.image, c.gbuf, pe);
  const auto b = refine_visibility(c.noisy, c.image, c.gbuf, pg);
  std::size_t differ = 0;
  for (std::size_t i = 0; i < a.alpha.pixel_count(); ++i) differ += a.alpha[i] != b.alpha[i];
  CHECK(differ <= a.alpha.pixel_count() / 100);
}

TEST_CASE("labels are invariant to an exposure change of the guide") {
  const auto c = noisy_case(48, 0.05, 6);
  LinearImage bright = c.image;
  for (auto& v : bright.raster().data()) v *= 2.7f;
  CrfParams p;
  const auto a = refine_visibility(c.noisy, c.image, c.gbuf, p);
  const auto b = refine_visibility(c.noisy, bright, c.gbuf, p);
  CHECK(a.alpha == b.alpha);
}

TEST_CASE("invalid pixels keep their labels") {
  auto c = noisy_case(32, 0.05, 7);
  for (int x = 0; x < 32; ++x) c.gbuf.face_id.at(x, 0) = -1.0f;
  CrfParams p;
  const auto out = refine_visibility(c.noisy, c.image, c.gbuf, p);
  for (int x = 0; x < 32; ++x) CHECK(out.alpha.at(x, 0) == c.noisy.alpha.at(x, 0));
}

TEST_CASE("mask files hold 0/1 labels") {
  GBuffer g = all_valid(5, 4);
  g.alpha_sun.at(2, 3) = 0.0f;
  const auto m = projected_mask(g, 0.9);
  const auto dir = std::filesystem::temp_directory_path() / "delight_mask_test.pfm";
  write_mask(m, dir);
  CHECK(read_mask(dir).alpha == m.alpha);
  Raster bad(2, 2, 1, 0.5f);
  write_pfm(bad, dir);
  CHECK_THROWS(read_mask(dir));
  std::filesystem::remove(dir);
}

TEST_CASE("IoU of identical and disjoint shadows") {
  Raster a(4, 1, 1, 1.0f), b(4, 1, 1, 1.0f), valid(4, 1, 1, 1.0f);
  CHECK(shadow_iou(a, b, valid) == 1.0);
  a[0] = 0.0f;
  b[1] = 0.0f;
  CHECK(shadow_iou(a, b, valid) == 0.0);
  b[0] = 0.0f;
  CHECK(shadow_iou(a, b, valid) == doctest::Approx(0.5));
}

TEST_CASE("refining a refined mask changes almost nothing") {
  const auto c = noisy_case(64, 0.05, 8);
  CrfParams p;
  const auto once = refine_visibility(c.noisy, c.image, c.gbuf, p);
  VisibilityMask again_in = once;
  for (auto& v : again_in.confidence.data()) v = static_cast<float>(p.unary_confidence);
  const auto twice = refine_visibility(again_in, c.image, c.gbuf, p);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < once.alpha.pixel_count(); ++i) changed += once.alpha[i] != twice.alpha[i];
  CHECK(changed * 1000 < once.alpha.pixel_count());
}
