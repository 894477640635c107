#pragma once

#include "carfit/alignment.hpp"
#include "carfit/metrics.hpp"
#include "carfit/renderer.hpp"

namespace carfit::testing {

/// Brute-force per-pixel ray casting over every triangle of the scene, with
/// the same near plane and tie rule as the rasterizer but none of its code.
LabelMaps raycast_labelmaps(const Scene& scene);

/// True when the pixel center lies within `eps` (screen px) of any projected
/// triangle edge of the scene — the only pixels where rasterizer and ray
/// caster may legitimately disagree.
Image<std::uint8_t> edge_pixel_mask(const Scene& scene, double eps);

/// ARAP objective (optimal per-vertex rotations plus the soft handle
/// penalty) recomputed from scratch.
double independent_arap_energy(const Mesh& rest, const Mesh& deformed,
                               const DeformationConstraints& constraints);

/// Average precision by explicit threshold sweep over distinct scores:
/// precision integrated over recall with the monotone envelope, evaluated
/// without sharing code with the library.
double brute_force_ap(const std::vector<std::pair<double, bool>>& outcomes, size_t gt_count);

/// Oriented-box IoU estimated by counting voxel centers at `pitch`.
double voxel_box_iou(const OrientedBox& a, const OrientedBox& b, double pitch);

} // namespace carfit::testing
