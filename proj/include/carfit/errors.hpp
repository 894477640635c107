#pragma once

#include <stdexcept>
#include <string>

namespace carfit {

/// Error categories surfaced by the toolkit. Each failure mode that callers
/// may want to branch on gets its own code.
enum class errc {
    io_error,
    parse_error,
    index_out_of_range,
    unknown_group,
    degenerate_face,
    atlas_overlap,
    isolated_vertex,
    topology_mismatch,
    rank_out_of_range,
    degenerate_covariance,
    length_mismatch,
    invalid_argument,
    behind_camera,
    zero_area_image,
    off_atlas,
    instance_absent,
    insufficient_points,
    degenerate_configuration,
    dimension_mismatch,
    empty_correspondences,
    under_constrained,
    missing_part,
    resolution_mismatch,
    empty_part_domain,
    threshold_mismatch,
    nonpositive_dims,
    empty_mesh,
};

const char* to_string(errc code);

class Error : public std::runtime_error {
public:
    Error(errc code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    errc code() const { return code_; }

private:
    errc code_;
};

inline void require(bool condition, errc code, const std::string& message) {
    if (!condition)
        throw Error(code, message);
}

} // namespace carfit
