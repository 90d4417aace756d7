#include <doctest.h>

#include <random>

#include "delight/bvh.hpp"
#include "delight/error.hpp"

using namespace delight;

namespace {

TriangleMesh random_soup(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> pos(-10, 10), off(-0.8, 0.8);
  TriangleMesh m;
  for (int i = 0; i < n; ++i) {
    const Vec3 c(pos(rng), pos(rng), pos(rng));
    for (int k = 0; k < 3; ++k) m.vertices.push_back(c + Vec3(off(rng), off(rng), off(rng)));
    const auto b = static_cast<std::uint32_t>(3 * i);
    m.faces.push_back({b, b + 1, b + 2});
  }
  return m;
}

bool same_hit(const std::optional<Hit>& a, const std::optional<Hit>& b) {
  if (a.has_value() != b.has_value()) return false;
  if (!a) return true;
  return a->triangle == b->triangle && std::abs(a->t - b->t) <= 1e-9 * std::abs(b->t);
}

void check_structure(const Bvh& bvh, std::size_t faces) {
  std::vector<int> seen(faces, 0);
  for (const auto& node : bvh.nodes()) {
    if (node.leaf()) {
      CHECK(node.count <= Bvh::kMaxLeafSize);
      for (std::uint32_t k = 0; k < node.count; ++k) ++seen[bvh.triangle_order()[node.first + k]];
    } else {
      CHECK(node.box.contains(bvh.nodes()[node.first].box));
      CHECK(node.box.contains(bvh.nodes()[node.first + 1].box));
    }
  }
  for (int s : seen) CHECK(s == 1);
}

}  // namespace

TEST_CASE("empty mesh is rejected") { CHECK_THROWS_AS(Bvh(TriangleMesh{}), InvalidArgument); }

TEST_CASE("single triangle: root is a leaf") {
  TriangleMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  m.faces = {{0, 1, 2}};
  const Bvh bvh(m);
  REQUIRE(bvh.nodes().size() == 1);
  CHECK(bvh.nodes()[0].leaf());
}

TEST_CASE("quad hits match brute force") {
  TriangleMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
  m.faces = {{0, 1, 2}, {0, 2, 3}};
  const Bvh bvh(m);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.2, 1.2);
  for (int i = 0; i < 500; ++i) {
    Ray r;
    r.origin = Vec3(u(rng), u(rng), 2.0);
    r.direction = Vec3(0.1 * u(rng), 0.1 * u(rng), -1).normalized();
    CHECK(same_hit(bvh.intersect(r), bvh.intersect_brute_force(r)));
  }
  Ray diag;  // exactly through the shared edge
  diag.origin = Vec3(0.5, 0.5, 1);
  diag.direction = -Vec3::UnitZ();
  const auto hit = bvh.intersect(diag);
  REQUIRE(hit);
  CHECK(hit->triangle == 0);
}

TEST_CASE("10k random triangles, 1k random rays agree with brute force") {
  std::mt19937_64 rng(11);
  const TriangleMesh m = random_soup(rng, 10000);
  const Bvh bvh(m);
  check_structure(bvh, m.faces.size());
  std::uniform_real_distribution<double> pos(-12, 12), dir(-1, 1);
  int hits = 0;
  for (int i = 0; i < 1000; ++i) {
    Ray r;
    r.origin = Vec3(pos(rng), pos(rng), pos(rng));
    r.direction = Vec3(dir(rng), dir(rng), dir(rng)).normalized();
    const auto a = bvh.intersect(r), b = bvh.intersect_brute_force(r);
    REQUIRE(same_hit(a, b));
    hits += a.has_value();
    CHECK(bvh.occluded(r) == b.has_value());
  }
  CHECK(hits > 100);
}

TEST_CASE("t range limits are honored") {
  TriangleMesh m;
  m.vertices = {{-1, -1, 0}, {1, -1, 0}, {0, 1, 0}};
  m.faces = {{0, 1, 2}};
  const Bvh bvh(m);
  Ray r;
  r.origin = Vec3(0, 0, 5);
  r.direction = -Vec3::UnitZ();
  CHECK(bvh.intersect(r));
  r.t_max = 4.9;
  CHECK_FALSE(bvh.intersect(r));
  CHECK_FALSE(bvh.occluded(r));
}
