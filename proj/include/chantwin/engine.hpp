#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "chantwin/antenna.hpp"
#include "chantwin/bvh.hpp"
#include "chantwin/geometry.hpp"
#include "chantwin/materials.hpp"
#include "chantwin/scene.hpp"

namespace chantwin {

enum class InteractionKind : std::uint8_t { Reflection, Transmission, Diffraction, Scattering };

char kind_letter(InteractionKind kind);
InteractionKind kind_from_letter(char c);

struct SignatureEntry {
    InteractionKind kind;
    std::uint32_t surface_id;  // triangle id, edge id or scattering tile id

    auto operator<=>(const SignatureEntry&) const = default;
};

/// Ordered interaction chain from Tx to Rx; the duplicate-elimination key.
using Signature = std::vector<SignatureEntry>;

struct Interaction {
    InteractionKind kind = InteractionKind::Reflection;
    Vec3 point;
    std::uint32_t surface_id = 0;
    std::uint32_t material_id = 0;
    Vec3 normal;  // reflection/transmission/scattering surface normal

    // Diffraction only.
    Vec3 edge_dir;
    std::array<Vec3, 2> face_normals{};
    std::array<Vec3, 2> face_tangents{};  // in-face directions pointing away from the edge
    double wedge_n = 2.0;

    // Scattering only.
    double tile_area = 0.0;
};

using Jones = std::array<std::array<Complex, 2>, 2>;

struct PropagationPath {
    std::vector<Interaction> interactions;  // empty = line of sight
    Vec3 tx;
    Vec3 rx;
    double path_length = 0.0;
    double delay = 0.0;
    Angles aod;
    Angles aoa;
    Vec3 departure_dir;
    Vec3 arrival_dir;  // from the Rx towards the incoming wave
    Jones jones{};     // maps Tx (theta, phi) to Rx (theta, phi), includes spreading and phase
    Complex amplitude; // after antennas, unit Tx power
    double doppler_hz = 0.0;

    Signature signature() const;
    double power_db() const;
};

struct EngineConfig {
    std::size_t n_rays = 1u << 14;
    int max_order = 3;
    int max_reflections = 3;
    int max_transmissions = 1;
    int max_diffractions = 1;
    int max_scatterings = 0;
    double rel_power_floor_db = -25.0;
    double rx_sphere_scale = 1.0;
    std::uint64_t seed = 0;

    bool bidirectional = true;          // also launch from the Rx and merge reversed signatures
    bool image_method = false;          // add exact image-method paths on eligible scenes
    int image_method_order = 2;
    int diffraction_reflections = 0;    // reflections allowed around the diffracting edge (0 or 1)
    double scatter_tile_m = 1.0;
    double dihedral_threshold_deg = kDefaultDihedralThresholdDeg;

    bool operator==(const EngineConfig&) const = default;
};

void validate_config(const EngineConfig& cfg);

/// Transmitter or receiver: position, antenna, and optional attachment to a dynamic object.
struct Terminal {
    Vec3 position;  // world position, or local offset when attached
    AntennaPattern antenna;
    double power_dbm = 0.0;
    std::optional<std::size_t> attached_object;

    Vec3 world_position(const Scene& scene, double time_s) const;
};

struct ScatterTile {
    Vec3 center;
    Vec3 normal;
    double area = 0.0;
    std::uint32_t triangle_id = 0;
    std::uint32_t material_id = 0;
};

/// Posed geometry plus the derived acceleration data the solver needs at one time instant.
struct SceneSnapshot {
    PosedScene posed;
    BvhIndex bvh;
    std::vector<DiffractionEdge> edges;
    std::vector<std::vector<std::uint32_t>> group_members;  // plane group -> triangle ids
    std::vector<ScatterTile> tiles;
    double tile_size = 0.0;
};

SceneSnapshot make_snapshot(const Scene& scene, double time_s, const EngineConfig& cfg);
SceneSnapshot make_snapshot(PosedScene posed, const EngineConfig& cfg);

/// Regular tiling of every plane group at `tile_size`; one tile per cell whose centre lies on
/// the surface.
std::vector<ScatterTile> tile_surfaces(const PosedScene& posed,
                                       const std::vector<std::vector<std::uint32_t>>& group_members,
                                       double tile_size);

std::vector<Vec3> launch_directions(std::size_t n);

/// Candidate signatures from rays launched at the Tx (and at the Rx when bidirectional).
/// Geometry only: the result does not depend on materials or frequency.
std::vector<Signature> trace_sbr(const SceneSnapshot& snap, const Vec3& tx, const Vec3& rx, const EngineConfig& cfg);

/// Exact geometry for a reflection/transmission signature, or nullopt when the path is invalid.
std::optional<PropagationPath> refine_specular(const Signature& signature, const SceneSnapshot& snap,
                                               const Vec3& tx, const Vec3& rx);

inline constexpr std::size_t kImageMethodFacetLimit = 200;

/// Exhaustive image-tree enumeration of reflection paths (LoS included) up to `max_order` <= 3.
std::vector<PropagationPath> enumerate_images(const SceneSnapshot& snap, const Vec3& tx, const Vec3& rx,
                                              int max_order);

std::vector<PropagationPath> diffraction_paths(const SceneSnapshot& snap, const Vec3& tx, const Vec3& rx,
                                               const EngineConfig& cfg);

/// `include_material` selects which materials get tiles; defaults to scatter_s > 0.
std::vector<PropagationPath> scattering_paths(const SceneSnapshot& snap, const Vec3& tx, const Vec3& rx,
                                              const EngineConfig& cfg, const MaterialLibrary& lib,
                                              const std::vector<bool>* include_material = nullptr,
                                              const std::vector<char>* tx_visible = nullptr);

struct FieldResult {
    Jones jones{};
    double spreading = 0.0;  // geometric spreading factor, 1/m
};

/// Polarimetric transfer of one path (free-space factor lambda/4pi, spreading and phase included).
FieldResult compute_field(const PropagationPath& path, const MaterialLibrary& lib, double f_hz);

/// Sort by (delay, signature) and drop geometric duplicates found under different signatures.
void canonicalize_paths(std::vector<PropagationPath>& paths);

struct ChannelRealization {
    Vec3 tx;
    Vec3 rx;
    double f_hz = 0.0;
    double time_s = 0.0;
    std::vector<PropagationPath> paths;
};

/// Geometric path set of one link before field evaluation; reusable across material changes.
struct LinkGeometry {
    Vec3 tx;
    Vec3 rx;
    double f_hz = 0.0;
    double time_s = 0.0;
    std::vector<PropagationPath> paths;
};

/// Fields, antennas, power floor and delay sort applied to a geometric path set.
ChannelRealization evaluate_link(const LinkGeometry& geometry, const MaterialLibrary& lib,
                                 const AntennaPattern& tx_antenna, const AntennaPattern& rx_antenna,
                                 double rel_power_floor_db);

struct LinkOptions {
    int threads = 1;
    std::vector<bool> force_scatter_materials;  // include tiles for these materials regardless of scatter_s
};

/// Tx-side state shared by every receiver of one transmitter at one time instant.
class LinkContext {
public:
    LinkContext(std::shared_ptr<const SceneSnapshot> snap, const Vec3& tx, const EngineConfig& cfg,
                const MaterialLibrary& lib, double f_hz, LinkOptions options = {});

    /// Trace the Tx-side ray tree once against a batch of receivers (coverage and calibration).
    void prepare_receivers(const std::vector<Vec3>& receivers);

    LinkGeometry geometry(const Vec3& rx) const;
    /// Single-threaded; meant to be called concurrently for different receivers.
    LinkGeometry geometry_for_prepared(std::size_t receiver_index) const;

    const SceneSnapshot& snapshot() const { return *snap_; }
    const Vec3& tx() const { return tx_; }
    const EngineConfig& config() const { return cfg_; }

private:
    LinkGeometry build(const Vec3& rx, const std::set<Signature>& tx_side, int threads) const;

    std::shared_ptr<const SceneSnapshot> snap_;
    Vec3 tx_;
    EngineConfig cfg_;
    const MaterialLibrary* lib_;
    double f_hz_;
    LinkOptions options_;
    std::vector<bool> scatter_materials_;
    std::vector<char> tx_tile_visible_;
    std::vector<Vec3> prepared_;
    std::vector<std::set<Signature>> prepared_candidates_;
};

ChannelRealization simulate_link(const Scene& scene, const Terminal& tx, const Terminal& rx, double f_hz,
                                 const EngineConfig& cfg, double time_s, const MaterialLibrary& lib,
                                 int threads = 1);

/// Doppler from matched signatures of two snapshots: -(f/c) dL/dt. Unmatched paths get 0.
void doppler_annotate(ChannelRealization& at_t, const ChannelRealization& at_t_plus_dt, double dt_s);

}  // namespace chantwin
