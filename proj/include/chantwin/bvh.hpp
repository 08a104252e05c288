#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "chantwin/geometry.hpp"
#include "chantwin/scene.hpp"

namespace chantwin {

struct RayHit {
    std::uint32_t triangle_id = 0;
    double distance = 0.0;
    Vec3 point;
    Vec3 normal;  // faces the incoming ray
};

/// Moller-Trumbore in double precision; returns the distance along `dir` or nullopt.
std::optional<double> intersect_triangle(const std::array<Vec3, 3>& tri, const Vec3& origin,
                                         const Vec3& dir);

/// Binned-SAH bounding volume hierarchy over a posed scene. Immutable after construction.
class BvhIndex {
public:
    BvhIndex() = default;
    explicit BvhIndex(const PosedScene& posed);

    /// Nearest hit with distance in (t_min, t_max]. Ties resolve to the lower triangle id.
    std::optional<RayHit> intersect(const Vec3& origin, const Vec3& dir, double t_min,
                                    double t_max) const;

    /// True when any triangle is hit with distance in (t_min, t_max).
    bool occluded(const Vec3& origin, const Vec3& dir, double t_min, double t_max) const;

    /// Segment a->b is free of geometry, excluding `eps` at both ends.
    bool visible(const Vec3& a, const Vec3& b, double eps = 1e-6) const;

    const Aabb& root_bounds() const;
    std::size_t triangle_count() const { return triangles_.size(); }
    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Aabb box;
        std::uint32_t first = 0;  // leaf: first primitive; inner: right child
        std::uint32_t count = 0;  // leaf primitive count, 0 for inner nodes
    };

    void build(std::uint32_t node, std::uint32_t begin, std::uint32_t end,
               std::span<const Aabb> boxes, std::span<const Vec3> centroids);

    std::vector<Node> nodes_;
    std::vector<std::uint32_t> order_;
    std::vector<std::array<Vec3, 3>> triangles_;  // in leaf order
    std::vector<Vec3> normals_;
    Aabb empty_;
};

BvhIndex build_bvh(const PosedScene& posed);
BvhIndex build_bvh(const Scene& scene, double time_s);

}  // namespace chantwin
