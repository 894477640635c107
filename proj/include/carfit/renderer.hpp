#pragma once

#include "carfit/image.hpp"
#include "carfit/shape_model.hpp"

namespace carfit {

struct SceneInstance {
    Mesh mesh;
    Pose pose;
    int id = 0;
};

struct Scene {
    std::vector<SceneInstance> instances;
    CameraIntrinsics intrinsics;

    Scene() = default;
    explicit Scene(const CameraIntrinsics& k) : intrinsics(k) {}

    void add_instance(Mesh mesh, const Pose& pose, int id);
    void add_instance(const PcaBasis& basis, const ShapeCoefficients& coeffs, const Pose& pose,
                      int id);
};

inline constexpr int kBackgroundInstance = -1;
inline constexpr std::uint8_t kBackgroundPart = PartId::kBackground;

/// Per-pixel ground-truth labels. A pixel is background in all five maps or
/// foreground in all five; depth is camera-space meters, +inf on background.
struct LabelMaps {
    Image<std::int32_t> instance_map;
    Image<std::uint8_t> part_map;
    DepthImage depth_map;
    Image<float> u_map;
    Image<float> v_map;
};

/// Pinhole projection of a model-frame point: p = R x + T, pixel =
/// (fx p.x/p.z + cx, fy p.y/p.z + cy). Throws errc::behind_camera for
/// non-positive depth.
std::pair<Vec2, double> project_point(const CameraIntrinsics& intrinsics, const Pose& pose,
                                      const Vec3& point);

/// Z-buffered rasterization of every instance with perspective-correct depth
/// and UV interpolation. Pixel centers sample at (x+0.5, y+0.5); shared
/// edges follow a top-left fill rule; depth ties (< 1e-9 m) go to the lower
/// instance id, then lower face index. Deterministic.
LabelMaps rasterize(const Scene& scene);

/// Part map of a single instance; identical to rasterize on a one-instance
/// scene.
Image<std::uint8_t> render_part_silhouette(const Mesh& mesh, const Pose& pose,
                                           const CameraIntrinsics& intrinsics);

/// Texture-mapped color render: each foreground pixel samples the owning
/// instance's atlas bilinearly. `textures` maps instance position in the
/// scene (not id) to its atlas image.
RgbImage render_color(const Scene& scene, const std::vector<RgbImage>& textures,
                      const Rgb& background = Rgb(1, 1, 1));

/// Alpha-blend of a color render over a base image (overlay visualization).
RgbImage blend_overlay(const RgbImage& base, const Scene& scene,
                       const std::vector<RgbImage>& textures, double alpha);

// Export encodings declared by the label-map file formats: 8-bit PGM with
// 255 = background for instance/part maps, 16-bit PGM scaled by 65535 for
// U/V, raw little-endian f32 for depth.
GrayImage encode_instance_map(const Image<std::int32_t>& instance_map);
GrayImage encode_part_map(const Image<std::uint8_t>& part_map);
Gray16Image encode_unit_map(const Image<float>& map);
void write_label_maps(const std::filesystem::path& directory, const std::string& stem,
                      const LabelMaps& maps);

} // namespace carfit
