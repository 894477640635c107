#pragma once

#include "carfit/image.hpp"
#include "carfit/mesh.hpp"
#include "carfit/rng.hpp"

namespace carfit {

/// Parameters of the procedural vehicle family. All meshes built with the
/// same `resolution` share topology, so they can feed PCA directly.
///
/// Canonical frame: x forward (length), y left (width), z up (height),
/// ground plane z = 0.
struct VehicleParams {
    double length = 4.6;   // m
    double width = 1.82;   // m
    double height = 1.48;  // m
    double belt = 0.52;    // belt line, fraction of height
    double base = 0.18;    // underbody height, fraction of height
    double lip = 0.10;     // hood/trunk top above belt, fraction of (height - belt)
    // x-extent of each profile region, fractions of length; hood gets the rest
    double trunk_frac = 0.16;
    double rear_window_frac = 0.13;
    double roof_frac = 0.33;
    double windshield_frac = 0.15;
    double wheel_radius = 0.31;  // m
    double wheel_width = 0.14;   // m
    double axle_front = 0.33;    // wheel center x, fraction of length
    double axle_rear = -0.33;
    // body curvature, as width shrink fractions: tumblehome narrows the hull
    // away from the belt line, taper narrows it toward the bumpers, bulge
    // pushes the cap centers outward
    double tumblehome = 0.09;
    double taper = 0.06;
    double cap_bulge = 0.035; // fraction of length
    int resolution = 1;       // tessellation multiplier (topology-defining)
};

/// 18-part two-box vehicle: swept body with welded seams plus four separate
/// wheel cylinders, every face labeled and UV-mapped into a per-part atlas
/// cell.
Mesh make_vehicle(const VehicleParams& params);

VehicleParams random_vehicle_params(Rng& rng, int resolution = 1);

std::vector<Mesh> make_vehicle_family(int count, std::uint64_t seed, int resolution = 1);

/// Atlas rectangle (min, max) that part's UVs live in.
std::pair<Vec2, Vec2> atlas_cell(PartId part);

/// Procedural template appearance over the atlas layout: per-part base
/// colors with a mild horizontal gradient. `hue_shift` in [0,1) rotates the
/// body color so instances can differ.
RgbImage make_prior_texture(int resolution, double hue_shift = 0.0);

const char* part_name(PartId part);

} // namespace carfit
