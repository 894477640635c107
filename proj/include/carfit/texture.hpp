#pragma once

#include "carfit/renderer.hpp"

namespace carfit {

/// Provenance of each atlas texel, ordered by trust. A texel's tag never
/// downgrades across completion stages.
enum class TexelTag : std::uint8_t {
    empty = 0,
    observed = 1,
    symmetric = 2,
    part_mean = 3,
    prior = 4,
};

struct TextureAtlas {
    RgbImage image;
    Image<std::uint8_t> valid_mask;    // TexelTag values
    Image<std::int8_t> part_domains;   // owning part per texel, -1 outside every domain

    int resolution() const { return image.width; }
};

/// Finite-difference gradient targets of the template texture, one 2D
/// gradient per texel per channel.
struct PriorGradientField {
    Image<Rgb> grad_x;
    Image<Rgb> grad_y;
};

PriorGradientField finite_difference_gradients(const RgbImage& texture);

/// Atlas with the per-part texel domains of `mesh` marked and all texels
/// empty.
TextureAtlas make_empty_atlas(const Mesh& mesh, int resolution);

/// Projects every domain texel's surface point into the image and records
/// the bilinearly sampled color for texels that land in-bounds and pass a
/// depth-visibility test against the rasterized depth map (tolerance
/// 1e-3 * depth).
TextureAtlas extract_visible(const RgbImage& image, const Mesh& mesh, const Pose& pose,
                             const CameraIntrinsics& intrinsics, int resolution);

struct CompletionWeights {
    double observed = 10.0;
    double symmetric = 1.0;
    double part_mean = 0.05;
};

/// Fills every part domain: part-mean weak data where a part is >= 20%
/// observed, mirrored copies where a symmetry plane maps to an observed
/// texel, then a per-part screened Poisson solve against the prior gradient
/// field (conjugate gradients, relative residual <= 1e-6).
TextureAtlas complete_texture(const TextureAtlas& partial, const Mesh& mesh,
                              const std::vector<SymmetryPlane>& planes,
                              const PriorGradientField& prior, const TextureAtlas& prior_colors,
                              const CompletionWeights& weights = {});

/// PNG pair: color atlas plus the 8-bit tag mask (values 0-4).
void save_atlas(const std::filesystem::path& directory, const std::string& stem,
                const TextureAtlas& atlas);

} // namespace carfit
