#pragma once

#include "carfit/image.hpp"
#include "carfit/mesh.hpp"

namespace carfit {

// ---------------------------------------------------------------- mask mAP

struct MaskDetection {
    GrayImage mask; // nonzero = foreground
    double score = 0.0;
};

struct MaskMapResult {
    double map = 0.0;
    double ap50 = 0.0;
    double ap75 = 0.0;
    std::vector<std::pair<double, double>> per_threshold; // (iou threshold, AP)
};

/// Greedy score-ordered matching at each IoU threshold in {0.50 .. 0.95};
/// AP is the area under the interpolated precision-recall curve.
MaskMapResult mask_map(const std::vector<std::vector<MaskDetection>>& predictions,
                       const std::vector<std::vector<GrayImage>>& ground_truth);

double mask_iou(const GrayImage& a, const GrayImage& b);

// ------------------------------------------------------------- pose metrics

struct PoseDistance {
    double trans_abs = 0.0; // meters
    double trans_rel = 0.0; // ratio
    double rot = 0.0;       // radians
    double shape_sim = 0.0; // volumetric mesh IoU in the canonical frame
};

/// Solid voxelization overlap of two meshes in their canonical frame
/// (per-component parity ray casting).
double mesh_volumetric_iou(const Mesh& a, const Mesh& b, double voxel_pitch = 0.05);

PoseDistance pose_distance(const Pose& pred_pose, const Mesh& pred_mesh, const Pose& gt_pose,
                           const Mesh& gt_mesh, double voxel_pitch = 0.05);

// -------------------------------------------------------------------- A3DP

struct A3dpThresholds {
    std::vector<double> shape; // minimum shape similarity per level
    std::vector<double> trans; // maximum translation error (m for Abs, ratio for Rel)
    std::vector<double> rot;   // maximum rotation error (radians)
    std::array<double, 3> loose{0.5, 2.8, M_PI / 6};
    std::array<double, 3> strict{0.75, 1.4, M_PI / 12};

    /// shape [0.5 : 0.05 : 0.95], trans [2.8 : -0.3 : 0.1],
    /// rot [pi/6 : -pi/60 : pi/60] — ten joint difficulty levels.
    static A3dpThresholds defaults();

    void validate() const {
        require(shape.size() == trans.size() && shape.size() == rot.size(),
                errc::threshold_mismatch, "threshold lists must have equal length");
    }
};

enum class A3dpMode { abs, rel };

struct Detection3d {
    Pose pose;
    Mesh mesh;
    double score = 0.0;
    int frame = 0;
};

struct GroundTruth3d {
    Pose pose;
    Mesh mesh;
    int frame = 0;
};

struct A3dpResult {
    double mean = 0.0;
    double c_l = 0.0;
    double c_s = 0.0;
    std::vector<double> per_level;
};

/// A detection is a true positive at level j iff shape_sim >= shape[j],
/// trans <= trans[j] and rot <= rot[j], with greedy score-ordered matching
/// (ties to higher shape similarity, then lower index).
A3dpResult a3dp(const std::vector<Detection3d>& detections,
                const std::vector<GroundTruth3d>& ground_truth, const A3dpThresholds& thresholds,
                A3dpMode mode, double voxel_pitch = 0.05);

void write_a3dp_csv(const std::filesystem::path& path, const A3dpResult& result,
                    const A3dpThresholds& thresholds);

// ------------------------------------------------------------------ 3D IoU

/// Gravity-aligned box: footprint dims.x() by dims.y() rotated by yaw about
/// +z, height dims.z().
struct OrientedBox {
    Vec3 center = Vec3::Zero();
    Vec3 dims = Vec3::Zero();
    double yaw = 0.0;
};

/// Exact bird's-eye polygon intersection (Sutherland-Hodgman) times vertical
/// overlap, over the union.
double box3d_iou(const OrientedBox& a, const OrientedBox& b);

// --------------------------------------------------------- dimension error

struct DimensionError {
    Vec3 error = Vec3::Zero(); // meters, (width, height, length)
    Vec3 rate = Vec3::Zero();  // error / ground-truth extent
};

/// Canonical-frame bounding-box extents compared per axis; the canonical
/// vehicle frame is x = length, y = width, z = height.
DimensionError shape_dim_error(const Mesh& pred_mesh, const Mesh& gt_mesh);

} // namespace carfit
