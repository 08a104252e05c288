#include <algorithm>

#include "chantwin/errors.hpp"
#include "engine_internal.hpp"

namespace chantwin {

using detail::kVisibilityEps;

namespace {

Interaction surface_interaction(const SceneSnapshot& snap, InteractionKind kind, std::uint32_t id, const Vec3& p) {
    Interaction it;
    it.kind = kind;
    it.point = p;
    it.surface_id = id;
    it.material_id = snap.posed.material_ids[id];
    it.normal = snap.posed.normals[id];
    return it;
}

// Parameter of the intersection of segment a->b with a plane, or a negative value.
double segment_plane(const Vec3& a, const Vec3& b, const Vec3& anchor, const Vec3& n) {
    const double denom = dot(b - a, n);
    if (std::fabs(denom) < 1e-15) return -1.0;
    return dot(anchor - a, n) / denom;
}

}  // namespace

std::optional<PropagationPath> refine_specular(const Signature& signature, const SceneSnapshot& snap, const Vec3& tx,
                                               const Vec3& rx) {
    const auto& posed = snap.posed;
    std::vector<std::size_t> refl;  // positions of reflections in the signature
    for (std::size_t k = 0; k < signature.size(); ++k) {
        const auto& e = signature[k];
        if (e.kind != InteractionKind::Reflection && e.kind != InteractionKind::Transmission) return std::nullopt;
        if (e.surface_id >= posed.size()) return std::nullopt;
        if (e.kind == InteractionKind::Reflection) {
            if (!refl.empty() && posed.plane_group[signature[refl.back()].surface_id] == posed.plane_group[e.surface_id])
                return std::nullopt;
            refl.push_back(k);
        }
    }

    // Chained images of the Tx, then back-trace from the Rx.
    std::vector<Vec3> images(refl.size() + 1);
    images[0] = tx;
    for (std::size_t r = 0; r < refl.size(); ++r) {
        const auto id = signature[refl[r]].surface_id;
        images[r + 1] = mirror_point(images[r], posed.anchor(id), posed.normal(id));
    }
    std::vector<Vec3> rpoints(refl.size());
    Vec3 target = rx;
    for (std::size_t r = refl.size(); r-- > 0;) {
        const auto id = signature[refl[r]].surface_id;
        const double s = segment_plane(target, images[r + 1], posed.anchor(id), posed.normal(id));
        if (!(s > 1e-12 && s < 1.0 - 1e-12)) return std::nullopt;
        rpoints[r] = target + (images[r + 1] - target) * s;
        target = rpoints[r];
    }

    PropagationPath path;
    path.tx = tx;
    path.rx = rx;
    std::vector<Vec3> nodes;  // tx, reflection points, rx
    nodes.push_back(tx);
    for (const auto& p : rpoints) nodes.push_back(p);
    nodes.push_back(rx);

    std::size_t leg = 0;
    double last_s = 0.0;
    for (std::size_t k = 0; k < signature.size(); ++k) {
        const auto& e = signature[k];
        if (e.kind == InteractionKind::Reflection) {
            const Vec3& p = nodes[leg + 1];
            const auto id = detail::snap_to_group(snap, e.surface_id, p);
            if (!id) return std::nullopt;
            if (!detail::same_side(nodes[leg], nodes[leg + 2], posed.anchor(*id), posed.normal(*id)))
                return std::nullopt;
            path.interactions.push_back(surface_interaction(snap, InteractionKind::Reflection, *id, p));
            ++leg;
            last_s = 0.0;
        } else {
            const Vec3 &a = nodes[leg], &b = nodes[leg + 1];
            const double s = segment_plane(a, b, posed.anchor(e.surface_id), posed.normal(e.surface_id));
            if (!(s > last_s + 1e-12 && s < 1.0 - 1e-12)) return std::nullopt;
            const Vec3 p = a + (b - a) * s;
            const auto id = detail::snap_to_group(snap, e.surface_id, p);
            if (!id) return std::nullopt;
            path.interactions.push_back(surface_interaction(snap, InteractionKind::Transmission, *id, p));
            last_s = s;
        }
    }

    Vec3 prev = tx;
    for (const auto& it : path.interactions) {
        if (!snap.bvh.visible(prev, it.point, kVisibilityEps)) return std::nullopt;
        prev = it.point;
    }
    if (!snap.bvh.visible(prev, rx, kVisibilityEps)) return std::nullopt;
    detail::finish_path(path);
    return path;
}

std::vector<PropagationPath> enumerate_images(const SceneSnapshot& snap, const Vec3& tx, const Vec3& rx,
                                              int max_order) {
    const auto& posed = snap.posed;
    if (posed.size() > kImageMethodFacetLimit)
        throw SceneTooLargeError("scene too large for IM: " + std::to_string(posed.size()) + " facets (limit " +
                                 std::to_string(kImageMethodFacetLimit) + ")");
    if (max_order < 0 || max_order > 3) throw ValidationError("image method order must be in [0, 3]");
    const auto n = static_cast<std::uint32_t>(posed.size());

    std::vector<PropagationPath> out;
    if (snap.bvh.visible(tx, rx, kVisibilityEps)) {
        PropagationPath los;
        los.tx = tx;
        los.rx = rx;
        detail::finish_path(los);
        out.push_back(std::move(los));
    }

    std::vector<std::uint32_t> seq;
    std::vector<Vec3> images{tx};
    auto validate = [&]() -> std::optional<PropagationPath> {
        const std::size_t k = seq.size();
        std::vector<Vec3> pts(k);
        Vec3 to = rx;
        for (std::size_t r = k; r-- > 0;) {
            const Vec3& a = posed.anchor(seq[r]);
            const Vec3& nn = posed.normal(seq[r]);
            const Vec3 dir = images[r + 1] - to;
            const double denom = dot(dir, nn);
            if (std::fabs(denom) < 1e-15) return std::nullopt;
            const double s = dot(a - to, nn) / denom;
            if (s <= 0.0 || s >= 1.0) return std::nullopt;
            pts[r] = to + dir * s;
            if (!triangle_contains(posed.triangles[seq[r]], pts[r], detail::kContainTol)) return std::nullopt;
            to = pts[r];
        }
        for (std::size_t r = 0; r < k; ++r) {
            const Vec3 before = r == 0 ? tx : pts[r - 1];
            const Vec3 after = r + 1 == k ? rx : pts[r + 1];
            const double sb = dot(before - posed.anchor(seq[r]), posed.normal(seq[r]));
            const double sa = dot(after - posed.anchor(seq[r]), posed.normal(seq[r]));
            if (!(sb * sa > 0.0)) return std::nullopt;
            if (!snap.bvh.visible(before, pts[r], kVisibilityEps)) return std::nullopt;
        }
        if (!snap.bvh.visible(pts[k - 1], rx, kVisibilityEps)) return std::nullopt;
        PropagationPath p;
        p.tx = tx;
        p.rx = rx;
        for (std::size_t r = 0; r < k; ++r) {
            Interaction it;
            it.kind = InteractionKind::Reflection;
            it.point = pts[r];
            it.surface_id = seq[r];
            it.material_id = posed.material_ids[seq[r]];
            it.normal = posed.normals[seq[r]];
            p.interactions.push_back(it);
        }
        detail::finish_path(p);
        return p;
    };
    auto recurse = [&](auto&& self) -> void {
        if (static_cast<int>(seq.size()) == max_order) return;
        for (std::uint32_t t = 0; t < n; ++t) {
            if (!seq.empty() && posed.plane_group[seq.back()] == posed.plane_group[t]) continue;
            seq.push_back(t);
            images.push_back(mirror_point(images.back(), posed.anchor(t), posed.normal(t)));
            if (auto p = validate()) out.push_back(std::move(*p));
            self(self);
            images.pop_back();
            seq.pop_back();
        }
    };
    recurse(recurse);
    canonicalize_paths(out);
    return out;
}

namespace {

double angle_from_face0(const Vec3& v, const Vec3& e, const Vec3& t0, const Vec3& n0) {
    const Vec3 perp = v - e * dot(v, e);
    double phi = std::atan2(dot(perp, n0), dot(perp, t0));
    if (phi < 0.0) phi += 2.0 * kPi;
    return phi;
}

Vec3 face_tangent(const std::array<Vec3, 3>& tri, const Vec3& p0, const Vec3& e) {
    Vec3 best;
    double best_len = -1.0;
    for (const auto& v : tri) {
        Vec3 d = v - p0;
        d -= e * dot(d, e);
        const double len = norm(d);
        if (len > best_len) {
            best_len = len;
            best = d / len;
        }
    }
    return best;
}

struct EdgeFrame {
    Vec3 p0;
    Vec3 e;
    double length;
    Vec3 t0, tn, n0, nn;
    double wedge_n;
};

EdgeFrame edge_frame(const SceneSnapshot& snap, const DiffractionEdge& edge) {
    EdgeFrame f;
    f.p0 = edge.endpoints[0];
    const Vec3 d = edge.endpoints[1] - edge.endpoints[0];
    f.length = norm(d);
    f.e = d / f.length;
    f.t0 = face_tangent(snap.posed.triangles[edge.faces[0]], f.p0, f.e);
    f.tn = face_tangent(snap.posed.triangles[edge.faces[1]], f.p0, f.e);
    f.n0 = edge.face_normals[0];
    f.nn = edge.face_normals[1];
    f.wedge_n = edge.exterior_n();
    return f;
}

// Point on the edge satisfying the Keller cone condition for source s and observer o
// (unfolded straight line), as an axial distance from p0.
std::optional<double> diffraction_point(const EdgeFrame& f, const Vec3& s, const Vec3& o) {
    const double zs = dot(s - f.p0, f.e), zo = dot(o - f.p0, f.e);
    const double rs = norm((s - f.p0) - f.e * zs), ro = norm((o - f.p0) - f.e * zo);
    if (rs + ro < 1e-12) return std::nullopt;
    const double z = zs + (zo - zs) * rs / (rs + ro);
    const double margin = 1e-9 * std::max(1.0, f.length);
    if (!(z > margin && z < f.length - margin)) return std::nullopt;
    return z;
}

bool in_exterior(const EdgeFrame& f, const Vec3& q, const Vec3& p) {
    const double phi = angle_from_face0(p - q, f.e, f.t0, f.n0);
    const double lim = f.wedge_n * kPi;
    return phi > 1e-9 && phi < lim - 1e-9;
}

Interaction diffraction_interaction(const EdgeFrame& f, const DiffractionEdge& edge, std::uint32_t id, const Vec3& q) {
    Interaction it;
    it.kind = InteractionKind::Diffraction;
    it.point = q;
    it.surface_id = id;
    it.material_id = edge.material_id;
    it.edge_dir = f.e;
    it.face_normals = {f.n0, f.nn};
    it.face_tangents = {f.t0, f.tn};
    it.wedge_n = f.wedge_n;
    return it;
}

}  // namespace

std::vector<PropagationPath> diffraction_paths(const SceneSnapshot& snap, const Vec3& tx, const Vec3& rx,
                                               const EngineConfig& cfg) {
    std::vector<PropagationPath> out;
    if (cfg.max_diffractions < 1 || cfg.max_order < 1) return out;
    const auto& posed = snap.posed;
    const bool with_reflection = cfg.diffraction_reflections >= 1 && cfg.max_order >= 2 && cfg.max_reflections >= 1;

    for (std::uint32_t ei = 0; ei < snap.edges.size(); ++ei) {
        const auto& edge = snap.edges[ei];
        if (!(edge.exterior_n() > 1.0)) continue;
        const EdgeFrame f = edge_frame(snap, edge);

        if (auto z = diffraction_point(f, tx, rx)) {
            const Vec3 q = f.p0 + f.e * *z;
            if (in_exterior(f, q, tx) && in_exterior(f, q, rx) && snap.bvh.visible(tx, q, kVisibilityEps) &&
                snap.bvh.visible(q, rx, kVisibilityEps)) {
                PropagationPath p;
                p.tx = tx;
                p.rx = rx;
                p.interactions.push_back(diffraction_interaction(f, edge, ei, q));
                detail::finish_path(p);
                out.push_back(std::move(p));
            }
        }
        if (!with_reflection) continue;

        const auto g0 = posed.plane_group[edge.faces[0]], g1 = posed.plane_group[edge.faces[1]];
        for (std::uint32_t g = 0; g < snap.group_members.size(); ++g) {
            if (g == g0 || g == g1 || snap.group_members[g].empty()) continue;
            const auto rep = snap.group_members[g].front();
            const Vec3& anchor = posed.anchor(rep);
            const Vec3& n = posed.normal(rep);

            // Reflection before the edge.
            {
                const Vec3 img = mirror_point(tx, anchor, n);
                if (auto z = diffraction_point(f, img, rx)) {
                    const Vec3 q = f.p0 + f.e * *z;
                    const double s = segment_plane(img, q, anchor, n);
                    if (s > 1e-12 && s < 1.0 - 1e-12 && in_exterior(f, q, img) && in_exterior(f, q, rx) &&
                        detail::same_side(tx, q, anchor, n)) {
                        const Vec3 r = img + (q - img) * s;
                        const auto id = detail::snap_to_group(snap, rep, r);
                        if (id && snap.bvh.visible(tx, r, kVisibilityEps) && snap.bvh.visible(r, q, kVisibilityEps) &&
                            snap.bvh.visible(q, rx, kVisibilityEps)) {
                            PropagationPath p;
                            p.tx = tx;
                            p.rx = rx;
                            p.interactions.push_back(surface_interaction(snap, InteractionKind::Reflection, *id, r));
                            p.interactions.push_back(diffraction_interaction(f, edge, ei, q));
                            detail::finish_path(p);
                            out.push_back(std::move(p));
                        }
                    }
                }
            }
            // Reflection after the edge.
            {
                const Vec3 img = mirror_point(rx, anchor, n);
                if (auto z = diffraction_point(f, tx, img)) {
                    const Vec3 q = f.p0 + f.e * *z;
                    const double s = segment_plane(q, img, anchor, n);
                    if (s > 1e-12 && s < 1.0 - 1e-12 && in_exterior(f, q, tx) && in_exterior(f, q, img) &&
                        detail::same_side(q, rx, anchor, n)) {
                        const Vec3 r = q + (img - q) * s;
                        const auto id = detail::snap_to_group(snap, rep, r);
                        if (id && snap.bvh.visible(tx, q, kVisibilityEps) && snap.bvh.visible(q, r, kVisibilityEps) &&
                            snap.bvh.visible(r, rx, kVisibilityEps)) {
                            PropagationPath p;
                            p.tx = tx;
                            p.rx = rx;
                            p.interactions.push_back(diffraction_interaction(f, edge, ei, q));
                            p.interactions.push_back(surface_interaction(snap, InteractionKind::Reflection, *id, r));
                            detail::finish_path(p);
                            out.push_back(std::move(p));
                        }
                    }
                }
            }
        }
    }
    return out;
}

std::vector<PropagationPath> scattering_paths(const SceneSnapshot& snap, const Vec3& tx, const Vec3& rx,
                                              const EngineConfig& cfg, const MaterialLibrary& lib,
                                              const std::vector<bool>* include_material,
                                              const std::vector<char>* tx_visible) {
    std::vector<PropagationPath> out;
    if (cfg.max_scatterings < 1 || cfg.max_order < 1) return out;
    for (std::uint32_t ti = 0; ti < snap.tiles.size(); ++ti) {
        const auto& tile = snap.tiles[ti];
        const bool include = include_material && tile.material_id < include_material->size()
                                 ? (*include_material)[tile.material_id]
                                 : lib.at(tile.material_id).scatter_s > 0.0;
        if (!include) continue;
        if (!detail::same_side(tx, rx, tile.center, tile.normal)) continue;
        if (tx_visible ? !(*tx_visible)[ti] : !snap.bvh.visible(tx, tile.center, kVisibilityEps)) continue;
        if (!snap.bvh.visible(tile.center, rx, kVisibilityEps)) continue;
        PropagationPath p;
        p.tx = tx;
        p.rx = rx;
        Interaction it;
        it.kind = InteractionKind::Scattering;
        it.point = tile.center;
        it.surface_id = ti;
        it.material_id = tile.material_id;
        it.normal = tile.normal;
        it.tile_area = tile.area;
        p.interactions.push_back(it);
        detail::finish_path(p);
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace chantwin
