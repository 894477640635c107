#pragma once

#include "carfit/mesh.hpp"

namespace carfit {

/// Soft positional handles for ARAP: template vertex -> target point, all
/// sharing one quadratic penalty weight.
struct DeformationConstraints {
    std::vector<std::pair<std::uint32_t, Vec3>> handles;
    double weight = 1e3;
};

/// As-rigid-as-possible deformation with uniform edge weights and soft
/// handles, alternating per-vertex rotation fits (Kabsch) with a prefactored
/// global linear solve. The minimized objective
///   sum_i sum_{j in N(i)} ||(v'_i - v'_j) - R_i (v_i - v_j)||^2
///   + weight * sum_h ||v'_h - t_h||^2
/// is non-increasing per iteration. Topology, part labels, and UVs are
/// untouched.
Mesh arap_deform(const Mesh& mesh, const DeformationConstraints& constraints, int iterations);

/// The ARAP objective above evaluated at a candidate deformation, with the
/// per-vertex rotations chosen optimally. Exposed so callers can verify the
/// per-iteration descent independently of the solver internals.
double arap_energy(const Mesh& rest, const Mesh& deformed, const DeformationConstraints& constraints);

struct IcpResult {
    SimilarityTransform transform;
    double residual = 0.0; // mean matched distance of the returned transform
    int iterations = 0;
    bool converged = false;
};

/// Iterative closest point with a closed-form similarity (Umeyama) fit per
/// iteration, initialized by centroid/spread alignment. Returns the
/// transform with the lowest mean matched distance seen; non-convergence is
/// reported through the residual, never an error.
IcpResult rigid_icp(const Mesh& source, const Mesh& target, int max_iters);

struct AlignConfig {
    int arap_iterations = 30;
    double handle_weight = 1e3;
    double prune_factor = 3.0; // drop handles beyond prune_factor * median distance
    int passes = 2;            // nearest-point ARAP passes (refreshing correspondences)
    int icp_iterations = 30;
};

/// Deforms the part-labeled template onto a target mesh: ARAP on the body
/// with nearest-point handles, a second pass with refreshed correspondences,
/// then an independent similarity ICP per tire so wheels stay circular. The
/// output shares the template topology; faces, part labels, and UVs transfer
/// unchanged.
Mesh align_to_target(const Mesh& template_mesh, const Mesh& target, const AlignConfig& config = {});

/// Closed-form similarity aligning paired points (rotation, translation,
/// isotropic scale).
SimilarityTransform fit_similarity(const std::vector<Vec3>& source, const std::vector<Vec3>& target);

} // namespace carfit
