#include "chantwin/bvh.hpp"

#include <algorithm>
#include <limits>

namespace chantwin {

namespace {

constexpr int kBins = 16;
constexpr std::uint32_t kLeafSize = 4;

double surface_area(const Aabb& b) {
    if (b.empty()) return 0.0;
    const Vec3 e = b.extent();
    return 2.0 * (e.x * e.y + e.y * e.z + e.z * e.x);
}

// Slab test with a small relative padding so grazing rays never skip a node the brute-force
// scan would hit.
bool ray_box(const Aabb& b, const Vec3& origin, const Vec3& inv_dir, double t_min, double t_max,
             double& t_entry) {
    double t0 = t_min, t1 = t_max;
    for (int a = 0; a < 3; ++a) {
        double ta = (b.lo[a] - origin[a]) * inv_dir[a];
        double tb = (b.hi[a] - origin[a]) * inv_dir[a];
        if (ta > tb) std::swap(ta, tb);
        if (std::isnan(ta)) ta = -std::numeric_limits<double>::infinity();
        if (std::isnan(tb)) tb = std::numeric_limits<double>::infinity();
        tb *= 1.0 + 4.0 * std::numeric_limits<double>::epsilon();
        t0 = ta > t0 ? ta : t0;
        t1 = tb < t1 ? tb : t1;
        if (t0 > t1) return false;
    }
    t_entry = t0;
    return true;
}

}  // namespace

std::optional<double> intersect_triangle(const std::array<Vec3, 3>& tri, const Vec3& origin,
                                         const Vec3& dir) {
    const Vec3 e1 = tri[1] - tri[0];
    const Vec3 e2 = tri[2] - tri[0];
    const Vec3 p = cross(dir, e2);
    const double det = dot(e1, p);
    if (std::fabs(det) < 1e-14 * norm(e1) * norm(e2)) return std::nullopt;
    const double inv = 1.0 / det;
    const Vec3 s = origin - tri[0];
    const double u = dot(s, p) * inv;
    if (u < 0.0 || u > 1.0) return std::nullopt;
    const Vec3 q = cross(s, e1);
    const double v = dot(dir, q) * inv;
    if (v < 0.0 || u + v > 1.0) return std::nullopt;
    return dot(e2, q) * inv;
}

BvhIndex::BvhIndex(const PosedScene& posed) {
    const auto n = static_cast<std::uint32_t>(posed.size());
    if (n == 0) return;
    std::vector<Aabb> boxes(n);
    std::vector<Vec3> centroids(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        for (const auto& v : posed.triangles[i]) boxes[i].extend(v);
        centroids[i] = boxes[i].center();
    }
    order_.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) order_[i] = i;
    nodes_.reserve(2 * n);
    nodes_.push_back({});
    build(0, 0, n, boxes, centroids);

    triangles_.reserve(n);
    normals_.reserve(n);
    for (auto id : order_) {
        triangles_.push_back(posed.triangles[id]);
        normals_.push_back(posed.normals[id]);
    }
}

void BvhIndex::build(std::uint32_t node, std::uint32_t begin, std::uint32_t end,
                     std::span<const Aabb> boxes, std::span<const Vec3> centroids) {
    Aabb box, centroid_box;
    for (std::uint32_t i = begin; i < end; ++i) {
        box.extend(boxes[order_[i]]);
        centroid_box.extend(centroids[order_[i]]);
    }
    nodes_[node].box = box;
    const std::uint32_t count = end - begin;
    auto make_leaf = [&] {
        nodes_[node].first = begin;
        nodes_[node].count = count;
    };
    if (count <= kLeafSize) return make_leaf();

    // Binned SAH over the widest centroid axis.
    const Vec3 ext = centroid_box.extent();
    int axis = 0;
    if (ext.y > ext[axis]) axis = 1;
    if (ext.z > ext[axis]) axis = 2;
    if (ext[axis] <= 0.0) return make_leaf();

    struct Bin {
        Aabb box;
        std::uint32_t count = 0;
    };
    std::array<Bin, kBins> bins{};
    const double lo = centroid_box.lo[axis];
    const double scale = kBins / ext[axis];
    auto bin_of = [&](std::uint32_t prim) {
        const int b = static_cast<int>((centroids[prim][axis] - lo) * scale);
        return std::clamp(b, 0, kBins - 1);
    };
    for (std::uint32_t i = begin; i < end; ++i) {
        auto& bin = bins[bin_of(order_[i])];
        bin.box.extend(boxes[order_[i]]);
        ++bin.count;
    }
    std::array<double, kBins - 1> cost{};
    Aabb left;
    std::uint32_t left_count = 0;
    for (int i = 0; i < kBins - 1; ++i) {
        left.extend(bins[i].box);
        left_count += bins[i].count;
        cost[i] = surface_area(left) * left_count;
    }
    Aabb right;
    std::uint32_t right_count = 0;
    for (int i = kBins - 1; i > 0; --i) {
        right.extend(bins[i].box);
        right_count += bins[i].count;
        cost[i - 1] += surface_area(right) * right_count;
    }
    const int split = static_cast<int>(std::min_element(cost.begin(), cost.end()) - cost.begin());
    const double leaf_cost = surface_area(box) * count;
    if (cost[split] >= leaf_cost && count <= 4 * kLeafSize) return make_leaf();

    auto mid_it = std::partition(order_.begin() + begin, order_.begin() + end,
                                 [&](std::uint32_t prim) { return bin_of(prim) <= split; });
    auto mid = static_cast<std::uint32_t>(mid_it - order_.begin());
    if (mid == begin || mid == end) {
        mid = begin + count / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](std::uint32_t a, std::uint32_t b) {
                             return centroids[a][axis] < centroids[b][axis] ||
                                    (centroids[a][axis] == centroids[b][axis] && a < b);
                         });
    }

    const auto left_node = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back({});
    build(left_node, begin, mid, boxes, centroids);
    const auto right_node = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back({});
    build(right_node, mid, end, boxes, centroids);
    nodes_[node].first = right_node;
    nodes_[node].count = 0;
}

std::optional<RayHit> BvhIndex::intersect(const Vec3& origin, const Vec3& dir, double t_min,
                                          double t_max) const {
    if (nodes_.empty()) return std::nullopt;
    const Vec3 inv{1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z};
    double best_t = t_max;
    std::uint32_t best_slot = std::numeric_limits<std::uint32_t>::max();
    std::uint32_t best_id = best_slot;

    std::uint32_t stack[128];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const Node& node = nodes_[stack[--top]];
        double entry;
        if (!ray_box(node.box, origin, inv, t_min, best_t, entry)) continue;
        if (node.count > 0) {
            for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
                const auto t = intersect_triangle(triangles_[i], origin, dir);
                if (!t || !(*t > t_min) || *t > best_t) continue;
                if (*t < best_t || order_[i] < best_id) {
                    best_t = *t;
                    best_slot = i;
                    best_id = order_[i];
                }
            }
        } else {
            const auto self = static_cast<std::uint32_t>(&node - nodes_.data());
            stack[top++] = node.first;
            stack[top++] = self + 1;
        }
    }
    if (best_slot == std::numeric_limits<std::uint32_t>::max()) return std::nullopt;
    RayHit hit;
    hit.triangle_id = best_id;
    hit.distance = best_t;
    hit.point = origin + dir * best_t;
    const Vec3& n = normals_[best_slot];
    hit.normal = dot(n, dir) < 0.0 ? n : -n;
    return hit;
}

bool BvhIndex::occluded(const Vec3& origin, const Vec3& dir, double t_min, double t_max) const {
    if (nodes_.empty()) return false;
    const Vec3 inv{1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z};
    std::uint32_t stack[128];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const Node& node = nodes_[stack[--top]];
        double entry;
        if (!ray_box(node.box, origin, inv, t_min, t_max, entry)) continue;
        if (node.count > 0) {
            for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
                const auto t = intersect_triangle(triangles_[i], origin, dir);
                if (t && *t > t_min && *t < t_max) return true;
            }
        } else {
            const auto self = static_cast<std::uint32_t>(&node - nodes_.data());
            stack[top++] = node.first;
            stack[top++] = self + 1;
        }
    }
    return false;
}

bool BvhIndex::visible(const Vec3& a, const Vec3& b, double eps) const {
    const Vec3 d = b - a;
    const double len = norm(d);
    if (len <= 2.0 * eps) return true;
    return !occluded(a, d / len, eps, len - eps);
}

const Aabb& BvhIndex::root_bounds() const { return nodes_.empty() ? empty_ : nodes_.front().box; }

BvhIndex build_bvh(const PosedScene& posed) { return BvhIndex(posed); }

BvhIndex build_bvh(const Scene& scene, double time_s) { return BvhIndex(snapshot(scene, time_s)); }

}  // namespace chantwin
