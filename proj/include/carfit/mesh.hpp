#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "carfit/geometry.hpp"

namespace carfit {

/// Semantic component id. Values 0..17 are the vehicle parts, 18 is
/// background (only meaningful in rendered label maps).
class PartId {
public:
    static constexpr int kPartCount = 18;
    static constexpr int kBackground = 18;

    PartId() : value_(0) {}
    explicit PartId(int value) : value_(value) {
        require(value >= 0 && value <= kBackground, errc::invalid_argument,
                "part id must be in [0, 18], got " + std::to_string(value));
    }

    int value() const { return value_; }
    bool is_background() const { return value_ == kBackground; }

    /// Parts 14..17 are the four wheels (FL, FR, RL, RR).
    bool is_tire() const { return value_ >= 14 && value_ <= 17; }

    static PartId background() { return PartId(kBackground); }

    bool operator==(const PartId& o) const { return value_ == o.value_; }
    bool operator!=(const PartId& o) const { return value_ != o.value_; }
    bool operator<(const PartId& o) const { return value_ < o.value_; }

private:
    int value_;
};

/// Triangle mesh with a part label per face and a per-face-corner UV into the
/// shared [0,1]^2 atlas. Coordinates are meters. Per-corner UVs let atlas
/// seams between parts stay representable even where vertices are shared.
struct Mesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::uint32_t, 3>> faces;
    std::vector<PartId> face_part;
    std::vector<std::array<Vec2, 3>> corner_uv;
    std::string name;

    size_t vertex_count() const { return vertices.size(); }
    size_t face_count() const { return faces.size(); }

    /// Checks index validity, face non-degeneracy, per-face part range, and
    /// that UV atlas regions of distinct parts do not overlap (rasterized at
    /// `atlas_check_resolution`). Throws on violation.
    void validate(int atlas_check_resolution = 256) const;

    Vec3 face_centroid(std::uint32_t face) const {
        const auto& f = faces[face];
        return (vertices[f[0]] + vertices[f[1]] + vertices[f[2]]) / 3.0;
    }

    /// Axis-aligned bounding box; throws on an empty mesh.
    std::pair<Vec3, Vec3> bounding_box() const;
};

/// One-ring vertex adjacency derived from faces.
std::vector<std::vector<std::uint32_t>> vertex_adjacency(const Mesh& mesh);

/// Wavefront-style OBJ restricted to v/vt/f records with `g part_NN` group
/// headers carrying the part label of subsequent faces.
Mesh load_mesh(const std::filesystem::path& path);
void save_mesh(const std::filesystem::path& path, const Mesh& mesh);

// Same format, in memory (used by containers that embed a topology block).
Mesh mesh_from_obj(const std::string& text, const std::string& origin = "<memory>");
std::string mesh_to_obj(const Mesh& mesh);

/// ASCII PLY export for visualization; the part id rides as an integer face
/// property `part`.
void save_ply(const std::filesystem::path& path, const Mesh& mesh);

/// Uniform-Laplacian differential per vertex: v_i minus the mean of its
/// one-ring neighbors. Translation-invariant. Throws errc::isolated_vertex
/// naming the first vertex that belongs to no face.
std::vector<Vec3> mesh_gradient(const Mesh& mesh);

struct SymmetryPairs {
    /// (i, j): reflecting vertex i across the plane lands within tol of
    /// vertex j. Involution: (i, j) present implies (j, i) present; a vertex
    /// on the plane pairs with itself, listed once.
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
    std::vector<std::uint32_t> unpaired;
};

SymmetryPairs symmetry_map(const Mesh& mesh, const SymmetryPlane& plane, double tol);

} // namespace carfit
