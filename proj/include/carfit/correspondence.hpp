#pragma once

#include <optional>

#include "carfit/renderer.hpp"

namespace carfit {

/// One pixel <-> surface pairing: the observed pixel together with the part
/// and atlas coordinate naming a point on the canonical model surface.
struct Correspondence {
    Vec2 pixel = Vec2::Zero();
    PartId part;
    Vec2 uv = Vec2::Zero();
    double weight = 1.0;
};

/// Noise applied by the synthetic correspondence oracle, standing in for the
/// prediction error of a learned dense-mapping network.
struct NoiseModel {
    double uv_sigma = 0.0;       // atlas units
    double part_flip_rate = 0.0; // probability
    double dropout_rate = 0.0;   // probability
    double pixel_sigma = 0.0;    // pixels
    std::uint64_t seed = 0;

    void validate() const {
        require(part_flip_rate >= 0.0 && part_flip_rate <= 1.0, errc::invalid_argument,
                "part_flip_rate in [0,1]");
        require(dropout_rate >= 0.0 && dropout_rate <= 1.0, errc::invalid_argument,
                "dropout_rate in [0,1]");
        require(uv_sigma >= 0.0 && pixel_sigma >= 0.0, errc::invalid_argument, "sigmas >= 0");
    }
};

struct SurfaceLocation {
    std::uint32_t face = 0;
    Vec3 barycentric = Vec3::Zero();
};

/// Inverse UV lookup over a fixed topology: a per-part grid over atlas space
/// answers which face contains a given (part, uv) in O(1) expected time. The
/// index depends only on faces/part/UV, so one index serves every mesh
/// synthesized on the same topology.
class UvAtlasIndex {
public:
    static constexpr double kSnapTolerance = 0.002; // atlas units

    explicit UvAtlasIndex(const Mesh& topology, int grid_resolution = 64);

    /// Face and barycentric weights of the atlas point, snapping to the
    /// nearest triangle of the part when the point falls in none (within
    /// kSnapTolerance). Throws errc::off_atlas beyond the snap tolerance and
    /// errc::invalid_argument for a background part.
    SurfaceLocation locate(PartId part, const Vec2& uv) const;

    /// Non-throwing variant used when rejection is the expected outcome.
    std::optional<SurfaceLocation> try_locate(PartId part, const Vec2& uv) const;

    /// Containment only, no boundary snapping. Snapping pulls points that
    /// jittered off a part inward and would bias size estimation, so
    /// consumers that see noisy coordinates reject instead.
    std::optional<SurfaceLocation> try_locate_strict(PartId part, const Vec2& uv) const;

    /// Barycentric interpolation of `location` on a mesh sharing the indexed
    /// topology.
    Vec3 surface_point(const Mesh& mesh, const SurfaceLocation& location) const;

private:
    std::optional<SurfaceLocation> locate_impl(PartId part, const Vec2& uv, bool snap) const;

    struct PartGrid {
        Vec2 lo = Vec2::Zero();
        Vec2 hi = Vec2::Zero();
        int resolution = 0;
        std::vector<std::vector<std::uint32_t>> bins;
        bool empty = true;
    };

    const Mesh* topology_;
    std::array<PartGrid, PartId::kPartCount> grids_;
};

/// Barycentric point on the mesh surface for a (part, uv) atlas coordinate.
Vec3 uv_to_surface(const Mesh& mesh, PartId part, const Vec2& uv);

/// Samples `count` foreground pixels of `instance` uniformly without
/// replacement (all of them if fewer exist) and corrupts them with the noise
/// model, in order: dropout, pixel jitter, uv jitter (clamped to [0,1]^2),
/// part flip to a uniformly random other part. Deterministic given the seed.
std::vector<Correspondence> sample_correspondences(const LabelMaps& maps, int instance, int count,
                                                   const NoiseModel& noise);

/// CSV with header pixel_x,pixel_y,part,u,v,weight.
void save_correspondences_csv(const std::filesystem::path& path,
                              const std::vector<Correspondence>& correspondences);
std::vector<Correspondence> load_correspondences_csv(const std::filesystem::path& path);

} // namespace carfit
