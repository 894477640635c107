#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "carfit/correspondence.hpp"
#include "carfit/fitter.hpp"
#include "carfit/metrics.hpp"
#include "carfit/texture.hpp"

namespace carfit::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Whole-pipeline configuration loaded from JSON. Every field is optional in
/// the file; unknown keys are rejected. Defaults carry the published term
/// weights and threshold grids.
struct PipelineConfig {
    int pca_r = 9;
    NoiseModel noise{0.005, 0.05, 0.05, 1.0, 0};
    FitConfig fit;
    CameraIntrinsics render = CameraIntrinsics(500.0, 500.0, 320.0, 240.0, 640, 480);
    int texture_resolution = 256;
    CompletionWeights texture_weights;
    double metrics_voxel_pitch = 0.05;
    A3dpThresholds thresholds = A3dpThresholds::defaults();

    // demo scene
    int demo_instances = 2;
    int demo_training_meshes = 12;
    int demo_correspondences = 300;
    double demo_depth_min = 6.0;
    double demo_depth_max = 13.0;
    std::uint64_t seed = 7;

    static PipelineConfig load(const std::filesystem::path& path);
    static PipelineConfig from_json_text(const std::string& text, const std::string& origin);
};

struct CommonOptions {
    std::optional<std::filesystem::path> config_path;
    std::optional<std::uint64_t> seed;
    std::filesystem::path out_dir = "out";
    int jobs = 1;

    PipelineConfig resolve() const;
};

int cmd_align(const std::filesystem::path& template_path, const std::filesystem::path& target_dir,
              const CommonOptions& options);
int cmd_build_pca(const std::filesystem::path& mesh_dir, const std::filesystem::path& basis_path,
                  const CommonOptions& options);
int cmd_render(const std::filesystem::path& scene_path, const CommonOptions& options);
int cmd_fit(const std::filesystem::path& basis_path, const std::filesystem::path& corrs_path,
            const std::filesystem::path& part_map_path, const CommonOptions& options);
int cmd_texture(const std::filesystem::path& mesh_path, const std::filesystem::path& image_path,
                const std::filesystem::path& pose_path, const CommonOptions& options);
int cmd_eval(const std::filesystem::path& detections_path,
             const std::filesystem::path& ground_truth_path, const CommonOptions& options);
int cmd_demo(const CommonOptions& options);

} // namespace carfit::cli
