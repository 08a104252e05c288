#pragma once

#include <optional>
#include <set>
#include <vector>

#include "chantwin/engine.hpp"

namespace chantwin::detail {

inline constexpr double kVisibilityEps = 1e-6;
inline constexpr double kContainTol = 1e-9;

/// Fills length, delay, departure/arrival directions and angles from the interaction points.
void finish_path(PropagationPath& path);

/// Lowest-id triangle of `triangle_id`'s plane group containing `p`.
std::optional<std::uint32_t> snap_to_group(const SceneSnapshot& snap, std::uint32_t triangle_id, const Vec3& p);

/// Same strict side of a plane for both points.
bool same_side(const Vec3& a, const Vec3& b, const Vec3& anchor, const Vec3& n);

/// Receiver positions bucketed on an xy grid for reception-sphere queries.
class ReceiverSet {
public:
    explicit ReceiverSet(std::vector<Vec3> points);

    std::size_t size() const { return points_.size(); }
    const Vec3& point(std::size_t i) const { return points_[i]; }

    /// Calls hit(i) for every receiver within radius(L0 + s) of the segment o + d*s, s in [0, len].
    template <class Hit>
    void query(const Vec3& o, const Vec3& d, double len, double l0, double radius_per_m, Hit&& hit,
               std::vector<std::uint64_t>& stamp, std::uint64_t segment_id) const;

private:
    std::vector<Vec3> points_;
    Aabb box_;
    double cell_ = 1.0;
    int nx_ = 1, ny_ = 1;
    std::vector<std::uint32_t> cell_start_;
    std::vector<std::uint32_t> cell_items_;
};

/// Signatures collected per receiver by tracing the ray tree from `origin`.
std::vector<std::set<Signature>> trace_tree(const SceneSnapshot& snap, const Vec3& origin,
                                            const ReceiverSet& receivers, const EngineConfig& cfg, int threads);

Signature reversed(const Signature& s);

template <class Hit>
void ReceiverSet::query(const Vec3& o, const Vec3& d, double len, double l0, double radius_per_m, Hit&& hit,
                        std::vector<std::uint64_t>& stamp, std::uint64_t segment_id) const {
    if (points_.empty()) return;
    const double r_max = radius_per_m * (l0 + len);
    // Clip the segment to the receiver box grown by the largest possible radius.
    double t0 = 0.0, t1 = len;
    for (int a = 0; a < 3; ++a) {
        const double lo = box_.lo[a] - r_max, hi = box_.hi[a] + r_max;
        if (std::fabs(d[a]) < 1e-300) {
            if (o[a] < lo || o[a] > hi) return;
            continue;
        }
        double ta = (lo - o[a]) / d[a], tb = (hi - o[a]) / d[a];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1) return;
    }
    auto test = [&](std::uint32_t i) {
        if (stamp[i] == segment_id) return;
        const Vec3& p = points_[i];
        const double s = std::clamp(dot(p - o, d), 0.0, len);
        const double dist = norm(o + d * s - p);
        if (dist <= radius_per_m * (l0 + s)) {
            stamp[i] = segment_id;
            hit(i);
        }
    };
    if (nx_ * ny_ == 1) {
        for (std::uint32_t i = 0; i < points_.size(); ++i) test(i);
        return;
    }
    const double dxy = std::hypot(d.x, d.y);
    const double step = dxy > 1e-12 ? cell_ / dxy : (t1 - t0) + 1.0;
    for (double t = t0;; t += step) {
        const double tc = std::min(t, t1);
        const Vec3 c = o + d * tc;
        const double reach = radius_per_m * (l0 + std::min(tc + step, len)) + 0.5 * cell_;
        const int ix0 = std::max(0, static_cast<int>(std::floor((c.x - reach - box_.lo.x) / cell_)));
        const int ix1 = std::min(nx_ - 1, static_cast<int>(std::floor((c.x + reach - box_.lo.x) / cell_)));
        const int iy0 = std::max(0, static_cast<int>(std::floor((c.y - reach - box_.lo.y) / cell_)));
        const int iy1 = std::min(ny_ - 1, static_cast<int>(std::floor((c.y + reach - box_.lo.y) / cell_)));
        for (int iy = iy0; iy <= iy1; ++iy)
            for (int ix = ix0; ix <= ix1; ++ix) {
                const auto cell = static_cast<std::size_t>(iy) * nx_ + ix;
                for (auto k = cell_start_[cell]; k < cell_start_[cell + 1]; ++k) test(cell_items_[k]);
            }
        if (tc >= t1) break;
    }
}

}  // namespace chantwin::detail
