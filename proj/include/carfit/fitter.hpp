#pragma once

#include <optional>

#include "carfit/correspondence.hpp"

namespace carfit {

enum class VehicleType { coupe, hatchback, notchback, suv, mpv };

const char* to_string(VehicleType type);

/// Per-type prior: mean shape coefficients used as the fit's starting point
/// and nominal dimensions used as a sanity check on the result. Not a hard
/// constraint.
struct VehicleTypePrior {
    VehicleType type_id = VehicleType::notchback;
    ShapeCoefficients mean_coeffs;
    Vec3 dims = Vec3::Zero(); // width, height, length (m)
};

struct FitConfig {
    double lambda_c = 1.0;
    double lambda_s = 1.0;
    double lambda_r = 0.5;
    int max_outer = 300;
    int pose_iters = 1;
    int shape_iters = 1;
    double huber_delta = 3.0; // pixels; +inf gives plain least squares
    double coeff_bound = 3.0; // sd units
    double tol = 1e-5;        // relative total-energy decrease

    void validate() const {
        require(lambda_c >= 0.0 && lambda_s >= 0.0 && lambda_r >= 0.0, errc::invalid_argument,
                "term weights must be nonnegative");
        require(max_outer >= 1 && pose_iters >= 1 && shape_iters >= 1, errc::invalid_argument,
                "iteration counts must be >= 1");
        require(huber_delta > 0.0, errc::invalid_argument, "huber_delta must be positive");
    }
};

struct EnergyBreakdown {
    double data = 0.0;       // robust reprojection term
    double silhouette = 0.0; // rendered-vs-predicted label disagreement
    double smoothness = 0.0; // Laplacian-differential deviation from the mean
    double total = 0.0;
};

struct FitResult {
    Pose pose;
    ShapeCoefficients coeffs;
    Mesh mesh;
    std::vector<EnergyBreakdown> energy_trace; // initial state, then accepted iterates
    int inlier_count = 0;
    bool converged = false;
    bool dims_within_prior = true;
};

/// DLT on the prior-shape surface points followed by Gauss-Newton refinement
/// of the reprojection error. Needs >= 6 resolvable correspondences with
/// >= 4 distinct surface points in general position.
Pose init_pose_pnp(const std::vector<Correspondence>& correspondences, const PcaBasis& basis,
                   const VehicleTypePrior& prior, const CameraIntrinsics& intrinsics);

/// The three energy terms and their weighted sum at a given state.
/// Correspondences whose (part, uv) cannot be located on the atlas are
/// excluded from the data term; the silhouette term renders the synthesized
/// mesh at the given pose.
EnergyBreakdown energy(const std::vector<Correspondence>& correspondences,
                       const Image<std::uint8_t>& part_map_pred, const Pose& pose,
                       const ShapeCoefficients& coeffs, const PcaBasis& basis,
                       const CameraIntrinsics& intrinsics, const FitConfig& config);

/// Gradient of the data term with respect to the pose tangent (rotation
/// vector then translation) and the shape coefficients, for derivative
/// verification and reuse by the solver.
struct DataTermGradient {
    Eigen::Matrix<double, 6, 1> pose; // [omega; dt]
    Eigen::VectorXd coeffs;
};

DataTermGradient data_term_gradient(const std::vector<Correspondence>& correspondences,
                                    const Pose& pose, const ShapeCoefficients& coeffs,
                                    const PcaBasis& basis, const CameraIntrinsics& intrinsics,
                                    const FitConfig& config);

/// Alternating minimization of the weighted energy: Gauss-Newton on the pose
/// holding shape fixed, then Gauss-Newton on the shape coefficients holding
/// pose fixed, with the full energy (silhouette included, evaluated by
/// rendering) gating acceptance of each outer iterate via backtracking. The
/// accepted-iterate energy trace is non-increasing by construction.
FitResult fit(const std::vector<Correspondence>& correspondences,
              const Image<std::uint8_t>& part_map_pred, const PcaBasis& basis,
              const VehicleTypePrior& prior, const CameraIntrinsics& intrinsics,
              const FitConfig& config, std::optional<Pose> init = std::nullopt);

} // namespace carfit
