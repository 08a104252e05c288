#include <algorithm>
#include <map>

#include "chantwin/errors.hpp"
#include "chantwin/parallel.hpp"
#include "chantwin/utd.hpp"
#include "engine_internal.hpp"

namespace chantwin {

namespace {

CVec3 cross_c(const Vec3& a, const CVec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

Vec3 any_perpendicular(const Vec3& v) {
    const Vec3 helper = std::fabs(v.z) < 0.9 ? Vec3{0.0, 0.0, 1.0} : Vec3{1.0, 0.0, 0.0};
    return normalize(cross(v, helper));
}

// Perpendicular (s) and incident-plane (p) basis for a hit with surface normal n.
Vec3 s_vector(const Vec3& d_in, const Vec3& n) {
    const Vec3 c = cross(d_in, n);
    const double len = norm(c);
    return len < 1e-12 ? any_perpendicular(d_in) : c / len;
}

double exterior_angle(const Vec3& v, const Vec3& e, const Vec3& t0, const Vec3& n0) {
    const Vec3 perp = v - e * dot(v, e);
    double phi = std::atan2(dot(perp, n0), dot(perp, t0));
    if (phi < 0.0) phi += 2.0 * kPi;
    return phi;
}

}  // namespace

FieldResult compute_field(const PropagationPath& path, const MaterialLibrary& lib, double f_hz) {
    const double k = 2.0 * kPi * f_hz / kSpeedOfLight;
    const double lambda = kSpeedOfLight / f_hz;

    std::vector<Vec3> pts;
    pts.reserve(path.interactions.size() + 2);
    pts.push_back(path.tx);
    for (const auto& it : path.interactions) pts.push_back(it.point);
    pts.push_back(path.rx);
    const std::size_t n_seg = pts.size() - 1;
    std::vector<Vec3> dirs(n_seg);
    std::vector<double> lens(n_seg);
    for (std::size_t i = 0; i < n_seg; ++i) {
        const Vec3 d = pts[i + 1] - pts[i];
        lens[i] = norm(d);
        dirs[i] = d / lens[i];
    }

    const auto tx_basis = spherical_basis(dirs.front());
    std::array<CVec3, 2> field{to_complex(tx_basis[0]), to_complex(tx_basis[1])};

    double spreading = 0.0;
    bool special = false;
    double travelled = 0.0;
    for (std::size_t i = 0; i < path.interactions.size(); ++i) {
        const auto& it = path.interactions[i];
        const Vec3& d_in = dirs[i];
        const Vec3& d_out = dirs[i + 1];
        travelled += lens[i];
        const Material& mat = lib.at(it.material_id);
        switch (it.kind) {
            case InteractionKind::Reflection:
            case InteractionKind::Transmission: {
                const Vec3 n = dot(it.normal, d_in) < 0.0 ? it.normal : -it.normal;
                const double cos_i = std::clamp(-dot(d_in, n), 0.0, 1.0);
                const Vec3 s = s_vector(d_in, n);
                const Vec3 p_in = cross(d_in, s);
                const Vec3 p_out = cross(d_out, s);
                const FresnelPair c = it.kind == InteractionKind::Reflection ? fresnel_coefficients(mat, cos_i, f_hz)
                                                                             : slab_transmission(mat, cos_i, f_hz);
                for (auto& e : field) {
                    const Complex es = dot(e, s), ep = dot(e, p_in);
                    e = scaled(s, c.perp * es) + scaled(p_out, c.par * ep);
                }
                break;
            }
            case InteractionKind::Diffraction: {
                special = true;
                const Vec3 e = it.edge_dir;
                const double s_in = travelled;
                double s_out = 0.0;
                for (std::size_t j = i + 1; j < n_seg; ++j) s_out += lens[j];
                const double sin_b = std::clamp(norm(cross(d_in, e)), 1e-12, 1.0);
                const double phi_p = exterior_angle(-d_in, e, it.face_tangents[0], it.face_normals[0]);
                const double phi = exterior_angle(d_out, e, it.face_tangents[0], it.face_normals[0]);
                const double l = s_in * s_out * sin_b * sin_b / (s_in + s_out);
                const auto coef = utd_coefficients(it.wedge_n, phi, phi_p, std::asin(sin_b), l, k);
                const Vec3 phi_hat_in = -normalize(cross(e, d_in));
                const Vec3 beta_hat_in = cross(phi_hat_in, d_in);
                const Vec3 phi_hat_out = normalize(cross(e, d_out));
                const Vec3 beta_hat_out = cross(phi_hat_out, d_out);
                for (auto& f : field) {
                    const Complex eb = dot(f, beta_hat_in), ep = dot(f, phi_hat_in);
                    f = scaled(beta_hat_out, -coef.soft * eb) + scaled(phi_hat_out, -coef.hard * ep);
                }
                spreading = (1.0 / s_in) * std::sqrt(s_in / (s_out * (s_in + s_out)));
                break;
            }
            case InteractionKind::Scattering: {
                special = true;
                const Vec3 n = dot(it.normal, d_in) < 0.0 ? it.normal : -it.normal;
                const double cos_i = std::max(0.0, -dot(d_in, n));
                const double cos_s = std::max(0.0, dot(d_out, n));
                const double amp = scattering_amplitude(mat, d_in, d_out, n);
                const double gain = amp * std::sqrt(it.tile_area * cos_i * cos_s);
                for (auto& f : field) {
                    // Keep only the part transverse to the scattered direction.
                    const CVec3 t = cross_c(d_out, cross_c(d_out, f)) * Complex(-1.0, 0.0);
                    f = t * Complex(gain, 0.0);
                }
                double r_s = 0.0;
                for (std::size_t j = i + 1; j < n_seg; ++j) r_s += lens[j];
                spreading = 1.0 / (travelled * r_s);
                break;
            }
        }
    }
    if (!special) spreading = 1.0 / path.path_length;

    const Complex common = (lambda / (4.0 * kPi)) * spreading * std::polar(1.0, -k * path.path_length);
    const auto rx_basis = spherical_basis(-dirs.back());
    FieldResult out;
    out.spreading = spreading;
    for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 2; ++i) out.jones[i][j] = common * dot(field[j], rx_basis[i]);
    return out;
}

void canonicalize_paths(std::vector<PropagationPath>& paths) {
    std::vector<std::pair<Signature, std::size_t>> keyed;
    keyed.reserve(paths.size());
    for (std::size_t i = 0; i < paths.size(); ++i) keyed.emplace_back(paths[i].signature(), i);
    std::sort(keyed.begin(), keyed.end());
    keyed.erase(std::unique(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first == b.first; }),
                keyed.end());

    // Geometric duplicates: same kinds, all points within 1e-9 m; the lowest signature wins
    // because `keyed` is sorted by signature.
    std::vector<std::size_t> by_length(keyed.size());
    for (std::size_t i = 0; i < keyed.size(); ++i) by_length[i] = i;
    std::stable_sort(by_length.begin(), by_length.end(), [&](std::size_t a, std::size_t b) {
        return paths[keyed[a].second].path_length < paths[keyed[b].second].path_length;
    });
    std::vector<char> drop(keyed.size(), 0);
    auto same_geometry = [&](const PropagationPath& a, const PropagationPath& b) {
        if (a.interactions.size() != b.interactions.size()) return false;
        for (std::size_t k = 0; k < a.interactions.size(); ++k) {
            if (a.interactions[k].kind != b.interactions[k].kind) return false;
            if (distance(a.interactions[k].point, b.interactions[k].point) > 1e-9) return false;
        }
        return true;
    };
    for (std::size_t x = 0; x < by_length.size(); ++x) {
        const auto& a = paths[keyed[by_length[x]].second];
        for (std::size_t y = x + 1; y < by_length.size(); ++y) {
            const auto& b = paths[keyed[by_length[y]].second];
            if (b.path_length - a.path_length > 1e-8) break;
            if (!same_geometry(a, b)) continue;
            drop[std::max(by_length[x], by_length[y])] = 1;
        }
    }

    std::vector<std::pair<Signature, PropagationPath>> kept;
    for (std::size_t i = 0; i < keyed.size(); ++i)
        if (!drop[i]) kept.emplace_back(std::move(keyed[i].first), std::move(paths[keyed[i].second]));
    std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second.delay != b.second.delay) return a.second.delay < b.second.delay;
        return a.first < b.first;
    });
    paths.clear();
    for (auto& k : kept) paths.push_back(std::move(k.second));
}

ChannelRealization evaluate_link(const LinkGeometry& geometry, const MaterialLibrary& lib,
                                 const AntennaPattern& tx_antenna, const AntennaPattern& rx_antenna,
                                 double rel_power_floor_db) {
    ChannelRealization r;
    r.tx = geometry.tx;
    r.rx = geometry.rx;
    r.f_hz = geometry.f_hz;
    r.time_s = geometry.time_s;
    r.paths = geometry.paths;
    double strongest = 0.0;
    for (auto& p : r.paths) {
        const auto field = compute_field(p, lib, geometry.f_hz);
        p.jones = field.jones;
        const auto gt = gain_at(tx_antenna, p.departure_dir, geometry.f_hz);
        const auto gr = gain_at(rx_antenna, p.arrival_dir, geometry.f_hz);
        const std::array<Complex, 2> t{gt.theta, gt.phi}, q{gr.theta, gr.phi};
        Complex a = 0.0;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) a += q[i] * p.jones[i][j] * t[j];
        p.amplitude = a;
        strongest = std::max(strongest, std::norm(a));
    }
    const double floor = strongest * std::pow(10.0, rel_power_floor_db / 10.0);
    std::erase_if(r.paths, [&](const PropagationPath& p) {
        return !(std::norm(p.amplitude) > 0.0) || std::norm(p.amplitude) < floor;
    });
    return r;
}

LinkContext::LinkContext(std::shared_ptr<const SceneSnapshot> snap, const Vec3& tx, const EngineConfig& cfg,
                         const MaterialLibrary& lib, double f_hz, LinkOptions options)
    : snap_(std::move(snap)), tx_(tx), cfg_(cfg), lib_(&lib), f_hz_(f_hz), options_(std::move(options)) {
    validate_config(cfg_);
    scatter_materials_.resize(lib.size());
    for (std::size_t m = 0; m < lib.size(); ++m)
        scatter_materials_[m] = lib.at(m).scatter_s > 0.0 ||
                                (m < options_.force_scatter_materials.size() && options_.force_scatter_materials[m]);
    if (cfg_.max_scatterings > 0) {
        tx_tile_visible_.resize(snap_->tiles.size());
        parallel_for(snap_->tiles.size(), options_.threads, [&](std::size_t i) {
            const auto& tile = snap_->tiles[i];
            tx_tile_visible_[i] = scatter_materials_[tile.material_id] &&
                                  snap_->bvh.visible(tx_, tile.center, detail::kVisibilityEps);
        });
    }
}

void LinkContext::prepare_receivers(const std::vector<Vec3>& receivers) {
    prepared_ = receivers;
    detail::ReceiverSet set(receivers);
    prepared_candidates_ = detail::trace_tree(*snap_, tx_, set, cfg_, options_.threads);
}

LinkGeometry LinkContext::geometry(const Vec3& rx) const {
    detail::ReceiverSet one({rx});
    auto found = detail::trace_tree(*snap_, tx_, one, cfg_, options_.threads);
    return build(rx, found[0], options_.threads);
}

LinkGeometry LinkContext::geometry_for_prepared(std::size_t receiver_index) const {
    return build(prepared_.at(receiver_index), prepared_candidates_.at(receiver_index), 1);
}

LinkGeometry LinkContext::build(const Vec3& rx, const std::set<Signature>& tx_side, int threads) const {
    const SceneSnapshot& snap = *snap_;
    std::set<Signature> candidates = tx_side;
    candidates.insert(Signature{});
    if (cfg_.bidirectional) {
        detail::ReceiverSet back({tx_});
        const auto reverse = detail::trace_tree(snap, rx, back, cfg_, threads);
        for (const auto& s : reverse[0]) candidates.insert(detail::reversed(s));
    }

    LinkGeometry g;
    g.tx = tx_;
    g.rx = rx;
    g.f_hz = f_hz_;
    g.time_s = snap.posed.time_s;
    for (const auto& sig : candidates)
        if (auto p = refine_specular(sig, snap, tx_, rx)) g.paths.push_back(std::move(*p));

    if (cfg_.image_method && snap.posed.size() <= kImageMethodFacetLimit) {
        const int order = std::min({cfg_.image_method_order, cfg_.max_reflections, cfg_.max_order});
        for (auto& p : enumerate_images(snap, tx_, rx, order)) g.paths.push_back(std::move(p));
    }
    for (auto& p : diffraction_paths(snap, tx_, rx, cfg_)) g.paths.push_back(std::move(p));
    if (cfg_.max_scatterings > 0)
        for (auto& p : scattering_paths(snap, tx_, rx, cfg_, *lib_, &scatter_materials_, &tx_tile_visible_))
            g.paths.push_back(std::move(p));
    canonicalize_paths(g.paths);
    return g;
}

ChannelRealization simulate_link(const Scene& scene, const Terminal& tx, const Terminal& rx, double f_hz,
                                 const EngineConfig& cfg, double time_s, const MaterialLibrary& lib, int threads) {
    validate_config(cfg);
    if (!(f_hz > 0.0)) throw ValidationError("frequency must be positive");
    auto snap = std::make_shared<const SceneSnapshot>(make_snapshot(scene, time_s, cfg));
    const Vec3 tx_pos = tx.world_position(scene, time_s);
    const Vec3 rx_pos = rx.world_position(scene, time_s);
    if (!is_finite(tx_pos) || !is_finite(rx_pos)) throw ValidationError("terminal position must be finite");
    LinkContext ctx(snap, tx_pos, cfg, lib, f_hz, LinkOptions{threads, {}});
    return evaluate_link(ctx.geometry(rx_pos), lib, tx.antenna, rx.antenna, cfg.rel_power_floor_db);
}

void doppler_annotate(ChannelRealization& at_t, const ChannelRealization& at_t_plus_dt, double dt_s) {
    std::map<Signature, double> later;
    for (const auto& p : at_t_plus_dt.paths) later.emplace(p.signature(), p.path_length);
    for (auto& p : at_t.paths) {
        const auto it = later.find(p.signature());
        p.doppler_hz = it == later.end() || dt_s == 0.0
                           ? 0.0
                           : -(at_t.f_hz / kSpeedOfLight) * (it->second - p.path_length) / dt_s;
    }
}

}  // namespace chantwin
