#include <doctest.h>

#include <cmath>

#include "delight/gbuffer.hpp"
#include "delight/solar.hpp"
#include "delight/synth.hpp"
#include "test_util.hpp"

using namespace delight;

namespace {

constexpr double kDeg = M_PI / 180.0;

LightingFrame frame_from(double azimuth, double elevation) {
  LightingFrame f;
  f.sun = SunDirection::from_angles(azimuth, elevation).vector;
  return f;
}

SyntheticScene box_scene(double size_x, double size_y, double h) {
  SyntheticScene s = testutil::flat_scene(0.5, 80.0);
  add_box(s, Vec3::Zero(), size_x, size_y, h, Vec3::Constant(0.4), Vec3::Constant(0.3));
  return s;
}

}  // namespace

TEST_CASE("flat plane under a nadir camera: k_sky = 1, normals +z") {
  const SyntheticScene s = testutil::flat_scene(0.5);
  const Bvh bvh(s.mesh);
  const GBuffer g = rasterize_gbuffer(bvh, testutil::nadir(50, 40, 48), frame_from(200, 35), 48, 48);
  for (int y = 0; y < 48; ++y) {
    for (int x = 0; x < 48; ++x) {
      REQUIRE(g.valid(x, y));
      CHECK(g.k_sky.at(x, y) == 1.0f);
      CHECK((g.normal_at(x, y) - Vec3::UnitZ()).norm() < 1e-6);
      CHECK(g.k_sun.at(x, y) == doctest::Approx(std::sin(35 * kDeg)).epsilon(1e-6));
      CHECK(g.alpha_sun.at(x, y) == 1.0f);
      CHECK(g.depth.at(x, y) > 49.9);
    }
  }
}

TEST_CASE("vertical facades have k_sky = 0.5 and background is invalid") {
  const SyntheticScene s = box_scene(10, 10, 10);
  const Bvh bvh(s.mesh);
  const CameraPose cam = CameraPose::look_at({40, -50, 25}, {0, 0, 4}, Vec3::UnitZ(), 60, 60, 31.5, 31.5);
  const GBuffer g = rasterize_gbuffer(bvh, cam, frame_from(150, 40), 64, 64);
  int facade = 0, background = 0;
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      if (!g.valid(x, y)) {
        ++background;
        CHECK(std::isinf(g.depth.at(x, y)));
        CHECK(g.k_sky.at(x, y) == 0.0f);
        continue;
      }
      const Vec3 n = s.mesh.face_normal(static_cast<std::size_t>(g.face_id.at(x, y)));
      if (std::abs(n.z()) < 1e-12) {
        ++facade;
        CHECK(g.k_sky.at(x, y) == doctest::Approx(0.5).epsilon(1e-6));
      }
    }
  }
  CHECK(facade > 50);
  CHECK(background > 0);
}

TEST_CASE("shadow-ray cases") {
  const SyntheticScene s = box_scene(10, 10, 10);
  const Bvh bvh(s.mesh);
  const double bias = shadow_bias(bvh);
  const Vec3 sun = SunDirection::from_angles(180, 45).vector;  // due south
  CHECK(trace_sun_visibility(bvh, {0, 7, 0}, Vec3::UnitZ(), sun, bias) == 0.0f);
  CHECK(trace_sun_visibility(bvh, {0, -7, 0}, Vec3::UnitZ(), sun, bias) == 1.0f);
  CHECK(trace_sun_visibility(bvh, {0, 16, 0}, Vec3::UnitZ(), sun, bias) == 1.0f);
  // North wall faces away from the sun.
  CHECK(trace_sun_visibility(bvh, {0, 5, 5}, Vec3::UnitY(), sun, bias) == 0.0f);
  CHECK(trace_sun_visibility(bvh, {0, -5, 5}, -Vec3::UnitY(), sun, bias) == 1.0f);
  CHECK(trace_sun_visibility(bvh, {0, 0, 10}, Vec3::UnitZ(), sun, bias) == 1.0f);
}

TEST_CASE("cast shadow area matches the analytic value within 2%") {
  const double sx = 10, sy = 6, h = 8;
  const SyntheticScene s = box_scene(sx, sy, h);
  const Bvh bvh(s.mesh);
  const double bias = shadow_bias(bvh);
  for (const auto& [az, el] : {std::pair{135.0, 40.0}, {210.0, 55.0}, {290.0, 30.0}}) {
    const Vec3 sun = SunDirection::from_angles(az, el).vector;
    const double dx = -h * sun.x() / sun.z(), dy = -h * sun.y() / sun.z();
    const double expected = std::abs(dx) * sy + std::abs(dy) * sx;
    const double step = 0.05;
    std::size_t blocked = 0;
    for (double x = -40 + step / 2; x < 40; x += step) {
      for (double y = -40 + step / 2; y < 40; y += step) {
        if (std::abs(x) < sx / 2 && std::abs(y) < sy / 2) continue;
        blocked += trace_sun_visibility(bvh, {x, y, 0}, Vec3::UnitZ(), sun, bias) == 0.0f;
      }
    }
    const double area = static_cast<double>(blocked) * step * step;
    INFO("azimuth " << az << " expected " << expected << " measured " << area);
    CHECK(std::abs(area - expected) <= 0.02 * expected);
  }
}

TEST_CASE("ray-traced visibility is binary and worker-count independent") {
  const SyntheticScene s = box_scene(10, 10, 10);
  const Bvh bvh(s.mesh);
  const CameraPose cam = testutil::nadir(60, 50, 64);
  const auto light = frame_from(120, 35);
  const GBuffer a = rasterize_gbuffer(bvh, cam, light, 64, 64, 1);
  const GBuffer b = rasterize_gbuffer(bvh, cam, light, 64, 64, 4);
  std::size_t shadow = 0;
  for (float v : a.alpha_sun.data()) {
    CHECK((v == 0.0f || v == 1.0f));
    shadow += v == 0.0f;
  }
  CHECK(shadow > 100);
  CHECK(a.alpha_sun == b.alpha_sun);
  CHECK(a.depth == b.depth);
  CHECK(a.normal == b.normal);
}

TEST_CASE("G-buffer files round trip") {
  testutil::TempDir dir("gbuf");
  const SyntheticScene s = box_scene(10, 10, 10);
  const Bvh bvh(s.mesh);
  const GBuffer g = rasterize_gbuffer(bvh, testutil::nadir(20, 60, 24), frame_from(120, 35), 24, 24);
  write_gbuffer(g, dir.path);
  const GBuffer r = read_gbuffer(dir.path);
  CHECK(r.depth == g.depth);
  CHECK(r.normal == g.normal);
  CHECK(r.k_sun == g.k_sun);
  CHECK(r.k_sky == g.k_sky);
  CHECK(r.alpha_sun == g.alpha_sun);
  CHECK(r.face_id == g.face_id);
}

TEST_CASE("renderer on a lit plane matches albedo * (L_sun cos + L_sky)") {
  const SyntheticScene s = testutil::flat_scene(0.5);
  const Bvh bvh(s.mesh);
  RenderSettings rs;
  rs.l_sun = Vec3::Constant(4.0);
  rs.l_sky = Vec3::Constant(1.0);
  const double el = 37.0;
  const auto view = render_view(s, bvh, testutil::nadir(50, 40, 16), frame_from(100, el), rs, 16, 16);
  const double expected = 0.5 * (4.0 * std::sin(el * kDeg) + 1.0);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      for (int c = 0; c < 3; ++c) CHECK(view.image.at(x, y, c) == doctest::Approx(expected).epsilon(1e-6));
      CHECK(view.alpha.at(x, y) == 1.0f);
    }
  }
}

TEST_CASE("area-sun penumbra width follows the disk geometry within 20%") {
  const double h = 10.0, el = 40.0, radius = 0.53;
  const SyntheticScene s = box_scene(10, 10, h);
  const Bvh bvh(s.mesh);
  const double bias = shadow_bias(bvh);
  const Vec3 sun = SunDirection::from_angles(180, el).vector;
  const auto disk = sun_disk_directions(sun, radius, 256, 7);
  const auto cot = [](double deg) { return 1.0 / std::tan(deg * kDeg); };
  const double expected = h * (cot(el - radius) - cot(el + radius));
  double first = -1, last = -1;
  const double edge = 5.0 + h * cot(el);
  for (double y = edge - 1.0; y <= edge + 1.0; y += 0.002) {
    const float v = area_sun_visibility(bvh, {0.0, y, 0.0}, Vec3::UnitZ(), disk, bias);
    if (v > 0.0f && v < 1.0f) {
      if (first < 0) first = y;
      last = y;
    }
  }
  REQUIRE(first > 0);
  const double width = last - first;
  INFO("expected " << expected << " measured " << width);
  CHECK(std::abs(width - expected) <= 0.2 * expected);
}

TEST_CASE("sun disk directions are unit, within the radius, and reproducible") {
  const Vec3 c = SunDirection::from_angles(80, 50).vector;
  const auto a = sun_disk_directions(c, 0.53, 64, 3);
  CHECK(a == sun_disk_directions(c, 0.53, 64, 3));
  for (const auto& d : a) {
    CHECK(d.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::acos(std::min(1.0, d.dot(c))) <= 0.53 * kDeg + 1e-12);
  }
  const auto point = sun_disk_directions(c, 0.0, 16, 3);
  for (const auto& d : point) CHECK((d - c).norm() < 1e-15);
}
