#include "chantwin/scene.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "chantwin/bvh.hpp"
#include "chantwin/errors.hpp"

namespace chantwin {

using nlohmann::json;

namespace {

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
    return 0.5 * norm(cross(b - a, c - a));
}

void require_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw ParseError(where + ": expected an object");
    for (const auto& [key, _] : obj.items())
        if (!allowed.count(key)) throw ParseError(where + ": unknown key '" + key + "'");
}

Vec3 parse_vec3(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number() || !j[2].is_number())
        throw ParseError(where + ": expected [x, y, z]");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

std::vector<Vec3> parse_vertices(const json& j, const std::string& where) {
    if (!j.is_array()) throw ParseError(where + ": vertices must be an array");
    std::vector<Vec3> out;
    out.reserve(j.size());
    for (const auto& v : j) out.push_back(parse_vec3(v, where));
    return out;
}

std::vector<Triangle> parse_triangles(const json& j, const std::string& where) {
    if (!j.is_array()) throw ParseError(where + ": triangles must be an array");
    std::vector<Triangle> out;
    out.reserve(j.size());
    for (const auto& t : j) {
        if (!t.is_array() || t.size() != 4)
            throw ParseError(where + ": triangles are [i0, i1, i2, material_id]");
        Triangle tri;
        for (int k = 0; k < 4; ++k) {
            if (!t[k].is_number_integer() || t[k].get<long long>() < 0)
                throw ParseError(where + ": triangle entries must be non-negative integers");
        }
        for (int k = 0; k < 3; ++k) tri.v[k] = t[k].get<std::uint32_t>();
        tri.material_id = t[3].get<std::uint32_t>();
        out.push_back(tri);
    }
    return out;
}

// Drops degenerate triangles, checks indices and material ids.
std::size_t clean_mesh(const std::vector<Vec3>& vertices, std::vector<Triangle>& triangles,
                       const MaterialLibrary& lib, const std::string& where) {
    for (const auto& v : vertices)
        if (!is_finite(v)) throw ValidationError(where + ": non-finite vertex");
    std::size_t dropped = 0;
    std::vector<Triangle> kept;
    kept.reserve(triangles.size());
    for (std::size_t i = 0; i < triangles.size(); ++i) {
        const auto& t = triangles[i];
        for (auto idx : t.v)
            if (idx >= vertices.size())
                throw ValidationError(where + ": triangle " + std::to_string(i) + " has vertex index " +
                                      std::to_string(idx) + " out of range");
        if (t.material_id >= lib.size())
            throw ValidationError(where + ": triangle " + std::to_string(i) + " references unknown material_id " +
                                  std::to_string(t.material_id));
        if (triangle_area(vertices[t.v[0]], vertices[t.v[1]], vertices[t.v[2]]) < kDegenerateArea) {
            ++dropped;
            continue;
        }
        kept.push_back(t);
    }
    triangles = std::move(kept);
    return dropped;
}

double wrap_degrees(double a) {
    a = std::fmod(a, 360.0);
    if (a > 180.0) a -= 360.0;
    if (a <= -180.0) a += 360.0;
    return a;
}

using QuantKey = std::tuple<long long, long long, long long>;

QuantKey quantize(const Vec3& p, double q) {
    return {std::llround(p.x / q), std::llround(p.y / q), std::llround(p.z / q)};
}

}  // namespace

Vec3 Pose::apply(const Vec3& local) const {
    const double yaw = yaw_deg * kPi / 180.0;
    const double c = std::cos(yaw), s = std::sin(yaw);
    return Vec3{c * local.x - s * local.y, s * local.x + c * local.y, local.z} + position;
}

Pose DynamicObject::pose_at(double time_s) const {
    const auto& kf = keyframes;
    if (time_s <= kf.front().t) return {kf.front().position, kf.front().yaw_deg};
    if (time_s >= kf.back().t) return {kf.back().position, kf.back().yaw_deg};
    auto upper = std::upper_bound(kf.begin(), kf.end(), time_s,
                                  [](double t, const Keyframe& k) { return t < k.t; });
    auto lower = upper - 1;
    const double w = (time_s - lower->t) / (upper->t - lower->t);
    Pose p;
    p.position = lower->position + (upper->position - lower->position) * w;
    p.yaw_deg = lower->yaw_deg + wrap_degrees(upper->yaw_deg - lower->yaw_deg) * w;
    return p;
}

Scene finalize_scene(Scene scene, const MaterialLibrary& lib) {
    scene.dropped_degenerate = clean_mesh(scene.vertices, scene.triangles, lib, "scene");
    Aabb bounds;
    for (const auto& v : scene.vertices) bounds.extend(v);
    for (std::size_t i = 0; i < scene.dynamic_objects.size(); ++i) {
        auto& obj = scene.dynamic_objects[i];
        const std::string where = "dynamic_objects[" + std::to_string(i) + "]";
        scene.dropped_degenerate += clean_mesh(obj.vertices, obj.triangles, lib, where);
        if (obj.keyframes.empty()) throw ValidationError(where + ": at least one keyframe required");
        for (std::size_t k = 0; k < obj.keyframes.size(); ++k) {
            const auto& key = obj.keyframes[k];
            if (!std::isfinite(key.t) || !is_finite(key.position) || !std::isfinite(key.yaw_deg))
                throw ValidationError(where + ": non-finite keyframe");
            if (k > 0 && !(key.t > obj.keyframes[k - 1].t))
                throw ValidationError(where + ": keyframe times must be strictly increasing");
        }
        // Any yaw keeps local vertices within this horizontal radius of the pose position.
        double radius = 0.0, zlo = 0.0, zhi = 0.0;
        bool first = true;
        for (const auto& v : obj.vertices) {
            radius = std::max(radius, std::hypot(v.x, v.y));
            zlo = first ? v.z : std::min(zlo, v.z);
            zhi = first ? v.z : std::max(zhi, v.z);
            first = false;
        }
        if (!first) {
            for (const auto& key : obj.keyframes) {
                bounds.extend(key.position + Vec3{-radius, -radius, zlo});
                bounds.extend(key.position + Vec3{radius, radius, zhi});
            }
        }
    }
    scene.bounds = bounds;
    return scene;
}

Scene parse_scene(const std::string& json_text, const MaterialLibrary& lib) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("scene: ") + e.what());
    }
    require_keys(doc, {"units", "vertices", "triangles", "dynamic_objects", "schema_version"}, "scene");
    if (doc.contains("units") && doc["units"] != "m") throw ParseError("scene: units must be \"m\"");
    if (!doc.contains("vertices") || !doc.contains("triangles"))
        throw ParseError("scene: 'vertices' and 'triangles' are required");

    Scene scene;
    scene.vertices = parse_vertices(doc["vertices"], "scene");
    scene.triangles = parse_triangles(doc["triangles"], "scene");
    if (doc.contains("dynamic_objects")) {
        if (!doc["dynamic_objects"].is_array()) throw ParseError("scene: dynamic_objects must be an array");
        for (const auto& o : doc["dynamic_objects"]) {
            require_keys(o, {"vertices", "triangles", "keyframes"}, "dynamic object");
            DynamicObject obj;
            obj.vertices = parse_vertices(o.at("vertices"), "dynamic object");
            obj.triangles = parse_triangles(o.at("triangles"), "dynamic object");
            if (!o.contains("keyframes") || !o["keyframes"].is_array())
                throw ParseError("dynamic object: keyframes must be an array");
            for (const auto& k : o["keyframes"]) {
                require_keys(k, {"t", "pos", "yaw_deg"}, "keyframe");
                if (!k.contains("t") || !k["t"].is_number() || !k.contains("pos"))
                    throw ParseError("keyframe: 't' and 'pos' are required");
                Keyframe key;
                key.t = k["t"].get<double>();
                key.position = parse_vec3(k["pos"], "keyframe");
                if (k.contains("yaw_deg")) {
                    if (!k["yaw_deg"].is_number()) throw ParseError("keyframe: yaw_deg must be a number");
                    key.yaw_deg = k["yaw_deg"].get<double>();
                }
                obj.keyframes.push_back(key);
            }
            scene.dynamic_objects.push_back(std::move(obj));
        }
    }
    return finalize_scene(std::move(scene), lib);
}

Scene load_scene(const std::filesystem::path& path, const MaterialLibrary& lib) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open scene file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scene(buf.str(), lib);
}

std::string scene_to_json(const Scene& scene) {
    auto vertices = [](const std::vector<Vec3>& vs) {
        json out = json::array();
        for (const auto& v : vs) out.push_back({v.x, v.y, v.z});
        return out;
    };
    auto triangles = [](const std::vector<Triangle>& ts) {
        json out = json::array();
        for (const auto& t : ts) out.push_back({t.v[0], t.v[1], t.v[2], t.material_id});
        return out;
    };
    json doc;
    doc["units"] = "m";
    doc["vertices"] = vertices(scene.vertices);
    doc["triangles"] = triangles(scene.triangles);
    doc["dynamic_objects"] = json::array();
    for (const auto& obj : scene.dynamic_objects) {
        json o;
        o["vertices"] = vertices(obj.vertices);
        o["triangles"] = triangles(obj.triangles);
        o["keyframes"] = json::array();
        for (const auto& k : obj.keyframes)
            o["keyframes"].push_back(
                {{"t", k.t}, {"pos", {k.position.x, k.position.y, k.position.z}}, {"yaw_deg", k.yaw_deg}});
        doc["dynamic_objects"].push_back(std::move(o));
    }
    return doc.dump();
}

PosedScene snapshot(const Scene& scene, double time_s) {
    PosedScene posed;
    posed.time_s = time_s;
    auto push = [&](const Vec3& a, const Vec3& b, const Vec3& c, std::uint32_t material) {
        posed.triangles.push_back({a, b, c});
        posed.material_ids.push_back(material);
        posed.normals.push_back(normalize(cross(b - a, c - a)));
        posed.bounds.extend(a);
        posed.bounds.extend(b);
        posed.bounds.extend(c);
    };
    for (const auto& t : scene.triangles)
        push(scene.vertices[t.v[0]], scene.vertices[t.v[1]], scene.vertices[t.v[2]], t.material_id);
    posed.static_count = posed.triangles.size();
    for (const auto& obj : scene.dynamic_objects) {
        const Pose pose = obj.pose_at(time_s);
        for (const auto& t : obj.triangles)
            push(pose.apply(obj.vertices[t.v[0]]), pose.apply(obj.vertices[t.v[1]]),
                 pose.apply(obj.vertices[t.v[2]]), t.material_id);
    }

    // Coplanar grouping on a canonical (sign-fixed) plane equation.
    std::map<std::tuple<long long, long long, long long, long long>, std::uint32_t> groups;
    posed.plane_group.resize(posed.size());
    for (std::size_t i = 0; i < posed.size(); ++i) {
        Vec3 n = posed.normals[i];
        const double lead = std::fabs(n.x) > 1e-9 ? n.x : (std::fabs(n.y) > 1e-9 ? n.y : n.z);
        if (lead < 0.0) n = -n;
        const double d = dot(n, posed.triangles[i][0]);
        const auto key = std::make_tuple(std::llround(n.x * 1e6), std::llround(n.y * 1e6),
                                         std::llround(n.z * 1e6), std::llround(d * 1e6));
        auto [it, inserted] = groups.emplace(key, static_cast<std::uint32_t>(groups.size()));
        posed.plane_group[i] = it->second;
    }
    posed.plane_group_count = groups.size();
    return posed;
}

bool triangle_contains(const std::array<Vec3, 3>& tri, const Vec3& p, double tol) {
    const Vec3 e0 = tri[1] - tri[0];
    const Vec3 e1 = tri[2] - tri[0];
    const Vec3 w = p - tri[0];
    const double d00 = dot(e0, e0), d01 = dot(e0, e1), d11 = dot(e1, e1);
    const double d20 = dot(w, e0), d21 = dot(w, e1);
    const double denom = d00 * d11 - d01 * d01;
    const double v = (d11 * d20 - d01 * d21) / denom;
    const double u = (d00 * d21 - d01 * d20) / denom;
    return v >= -tol && u >= -tol && (u + v) <= 1.0 + tol;
}

std::vector<DiffractionEdge> extract_diffraction_edges(const PosedScene& posed,
                                                       double dihedral_threshold_deg) {
    // Weld vertices by position so separate meshes sharing a seam are connected.
    std::map<QuantKey, std::uint32_t> weld;
    auto vertex_id = [&](const Vec3& p) {
        auto [it, inserted] = weld.emplace(quantize(p, 1e-6), static_cast<std::uint32_t>(weld.size()));
        return it->second;
    };
    struct Incidence {
        std::uint32_t triangle;
        int opposite;  // index of the vertex not on the edge
    };
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<Incidence>> edges;
    for (std::uint32_t t = 0; t < posed.size(); ++t) {
        std::array<std::uint32_t, 3> ids{};
        for (int k = 0; k < 3; ++k) ids[k] = vertex_id(posed.triangles[t][k]);
        for (int k = 0; k < 3; ++k) {
            auto a = ids[k], b = ids[(k + 1) % 3];
            if (a == b) continue;
            edges[{std::min(a, b), std::max(a, b)}].push_back({t, (k + 2) % 3});
        }
    }

    const double threshold = dihedral_threshold_deg * kPi / 180.0;
    std::vector<DiffractionEdge> out;
    for (const auto& [key, incidences] : edges) {
        if (incidences.size() != 2) continue;
        const auto& fa = incidences[0];
        const auto& fb = incidences[1];
        const auto& ta = posed.triangles[fa.triangle];
        const Vec3 na = posed.normals[fa.triangle];
        const Vec3 nb = posed.normals[fb.triangle];
        const double theta = std::acos(std::clamp(dot(na, nb), -1.0, 1.0));
        if (theta <= threshold) continue;

        // Edge endpoints are the two vertices of face A other than its opposite vertex.
        const Vec3 p0 = ta[(fa.opposite + 1) % 3];
        const Vec3 p1 = ta[(fa.opposite + 2) % 3];
        const Vec3 e = normalize(p1 - p0);
        Vec3 into_a = ta[fa.opposite] - p0;
        into_a = normalize(into_a - e * dot(into_a, e));
        const bool convex = dot(into_a, nb) < 0.0;

        DiffractionEdge edge;
        edge.endpoints = {p0, p1};
        edge.face_normals = {na, nb};
        edge.faces = {fa.triangle, fb.triangle};
        edge.interior_wedge_angle = convex ? kPi - theta : kPi + theta;
        edge.material_id = posed.material_ids[fa.triangle];
        out.push_back(edge);
    }
    return out;
}

std::vector<DiffractionEdge> extract_diffraction_edges(const Scene& scene, double time_s,
                                                       double dihedral_threshold_deg) {
    return extract_diffraction_edges(snapshot(scene, time_s), dihedral_threshold_deg);
}

bool point_inside_geometry(const BvhIndex& bvh, const PosedScene& posed, const Vec3& p) {
    const auto hit = bvh.intersect(p, Vec3{0.0, 0.0, 1.0}, 0.0, std::numeric_limits<double>::infinity());
    return hit && posed.normals[hit->triangle_id].z > 0.0;
}

}  // namespace chantwin
