#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Geometry>

#include "delight/scene.hpp"

namespace delight {

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();
  double t_min = 0.0;
  double t_max = std::numeric_limits<double>::infinity();
};

struct Hit {
  double t = 0.0;
  std::uint32_t triangle = 0;
  double u = 0.0;  // barycentric weight of vertex 1
  double v = 0.0;  // barycentric weight of vertex 2
};

/// Möller–Trumbore ray/triangle test (two-sided). Hits with t outside
/// [ray.t_min, ray.t_max] are ignored.
std::optional<Hit> intersect_triangle(const Ray& ray, const Vec3& p0, const Vec3& p1,
                                      const Vec3& p2, std::uint32_t id);

/// Axis-aligned bounding volume hierarchy over a mesh's triangles. Nearest
/// hits resolve ties in t toward the lower triangle id, so traversal and
/// brute-force iteration agree exactly.
class Bvh {
 public:
  static constexpr std::uint32_t kMaxLeafSize = 4;

  struct Node {
    Eigen::AlignedBox3d box;
    std::uint32_t first = 0;  // leaf: first entry in triangle_order(); inner: left child
    std::uint32_t count = 0;  // leaf: triangle count; inner: 0 (right child = left + 1)
    bool leaf() const { return count > 0; }
  };

  /// Throws InvalidArgument when the mesh has no faces.
  explicit Bvh(const TriangleMesh& mesh);

  std::optional<Hit> intersect(const Ray& ray) const;
  /// Any hit in (t_min, t_max); early exit.
  bool occluded(const Ray& ray) const;
  /// Reference nearest-hit search over every triangle.
  std::optional<Hit> intersect_brute_force(const Ray& ray) const;

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<std::uint32_t>& triangle_order() const { return order_; }
  const TriangleMesh& mesh() const { return mesh_; }
  /// Diagonal length of the mesh bounding box.
  double scene_diagonal() const { return nodes_.front().box.diagonal().norm(); }

 private:
  std::uint32_t build(std::uint32_t node_index, std::uint32_t begin, std::uint32_t end,
                      const std::vector<Vec3>& centroids);
  std::optional<Hit> test(const Ray& ray, std::uint32_t tri) const;

  TriangleMesh mesh_;
  std::vector<Node> nodes_;
  std::vector<std::uint32_t> order_;
};

}  // namespace delight
