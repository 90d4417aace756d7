#include "delight/bvh.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "delight/error.hpp"

namespace delight {

std::optional<Hit> intersect_triangle(const Ray& ray, const Vec3& p0, const Vec3& p1,
                                      const Vec3& p2, std::uint32_t id) {
  constexpr double kEdgeTolerance = 1e-12;
  const Vec3 e1 = p1 - p0;
  const Vec3 e2 = p2 - p0;
  const Vec3 pvec = ray.direction.cross(e2);
  const double det = e1.dot(pvec);
  if (det == 0.0) return std::nullopt;
  const double inv_det = 1.0 / det;
  const Vec3 tvec = ray.origin - p0;
  const double u = tvec.dot(pvec) * inv_det;
  if (u < -kEdgeTolerance || u > 1.0 + kEdgeTolerance) return std::nullopt;
  const Vec3 qvec = tvec.cross(e1);
  const double v = ray.direction.dot(qvec) * inv_det;
  if (v < -kEdgeTolerance || u + v > 1.0 + kEdgeTolerance) return std::nullopt;
  const double t = e2.dot(qvec) * inv_det;
  if (!(t > ray.t_min) || !(t < ray.t_max)) return std::nullopt;
  return Hit{t, id, u, v};
}

namespace {

bool slab_test(const Eigen::AlignedBox3d& box, const Ray& ray, const Vec3& inv_dir,
               double t_max) {
  // Conservative: a small relative slack keeps boxes whose entry distance
  // equals the current best hit, so tie-breaking on triangle id stays exact.
  double t0 = ray.t_min;
  double t1 = t_max;
  for (int a = 0; a < 3; ++a) {
    double near = (box.min()[a] - ray.origin[a]) * inv_dir[a];
    double far = (box.max()[a] - ray.origin[a]) * inv_dir[a];
    if (near > far) std::swap(near, far);
    // NaN (0 * inf) means the origin lies on a slab plane: keep the interval.
    if (near == near) t0 = std::max(t0, near);
    if (far == far) t1 = std::min(t1, far);
  }
  const double slack = 1e-9 * (std::abs(t1) + std::abs(t0)) + 1e-12;
  return t0 <= t1 + slack;
}

bool closer(const Hit& a, const std::optional<Hit>& best) {
  return !best || a.t < best->t || (a.t == best->t && a.triangle < best->triangle);
}

}  // namespace

Bvh::Bvh(const TriangleMesh& mesh) : mesh_(mesh) {
  if (mesh_.faces.empty()) throw InvalidArgument("bvh: mesh has no faces");
  mesh_.validate();
  const auto n = static_cast<std::uint32_t>(mesh_.faces.size());
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), 0u);
  std::vector<Vec3> centroids(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto& f = mesh_.faces[i];
    centroids[i] = (mesh_.vertices[f[0]] + mesh_.vertices[f[1]] + mesh_.vertices[f[2]]) / 3.0;
  }
  nodes_.reserve(2 * n);
  nodes_.emplace_back();
  build(0, 0, n, centroids);
}

std::uint32_t Bvh::build(std::uint32_t node_index, std::uint32_t begin, std::uint32_t end,
                         const std::vector<Vec3>& centroids) {
  Eigen::AlignedBox3d box;
  Eigen::AlignedBox3d centroid_box;
  for (std::uint32_t i = begin; i < end; ++i) {
    const auto& f = mesh_.faces[order_[i]];
    for (auto idx : f) box.extend(mesh_.vertices[idx]);
    centroid_box.extend(centroids[order_[i]]);
  }
  nodes_[node_index].box = box;
  const std::uint32_t count = end - begin;
  if (count <= kMaxLeafSize) {
    nodes_[node_index].first = begin;
    nodes_[node_index].count = count;
    return node_index;
  }
  int axis = 0;
  centroid_box.diagonal().maxCoeff(&axis);
  const std::uint32_t mid = begin + count / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     if (centroids[a][axis] != centroids[b][axis]) {
                       return centroids[a][axis] < centroids[b][axis];
                     }
                     return a < b;
                   });
  const auto left = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();
  nodes_.emplace_back();
  nodes_[node_index].first = left;
  nodes_[node_index].count = 0;
  build(left, begin, mid, centroids);
  build(left + 1, mid, end, centroids);
  return node_index;
}

std::optional<Hit> Bvh::test(const Ray& ray, std::uint32_t tri) const {
  const auto& f = mesh_.faces[tri];
  return intersect_triangle(ray, mesh_.vertices[f[0]], mesh_.vertices[f[1]],
                            mesh_.vertices[f[2]], tri);
}

std::optional<Hit> Bvh::intersect(const Ray& ray) const {
  const Vec3 inv_dir = ray.direction.cwiseInverse();
  std::optional<Hit> best;
  std::uint32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    const double t_limit = best ? best->t : ray.t_max;
    if (!slab_test(node.box, ray, inv_dir, t_limit)) continue;
    if (node.leaf()) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
        const auto hit = test(ray, order_[i]);
        if (hit && closer(*hit, best)) best = hit;
      }
    } else {
      stack[top++] = node.first + 1;
      stack[top++] = node.first;
    }
  }
  return best;
}

bool Bvh::occluded(const Ray& ray) const {
  const Vec3 inv_dir = ray.direction.cwiseInverse();
  std::uint32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (!slab_test(node.box, ray, inv_dir, ray.t_max)) continue;
    if (node.leaf()) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
        if (test(ray, order_[i])) return true;
      }
    } else {
      stack[top++] = node.first + 1;
      stack[top++] = node.first;
    }
  }
  return false;
}

std::optional<Hit> Bvh::intersect_brute_force(const Ray& ray) const {
  std::optional<Hit> best;
  for (std::uint32_t i = 0; i < mesh_.faces.size(); ++i) {
    const auto hit = test(ray, i);
    if (hit && closer(*hit, best)) best = hit;
  }
  return best;
}

}  // namespace delight
