#include "carfit/errors.hpp"

namespace carfit {

const char* to_string(errc code) {
    switch (code) {
    case errc::io_error: return "io error";
    case errc::parse_error: return "parse error";
    case errc::index_out_of_range: return "index out of range";
    case errc::unknown_group: return "unknown group";
    case errc::degenerate_face: return "degenerate face";
    case errc::atlas_overlap: return "atlas overlap";
    case errc::isolated_vertex: return "isolated vertex";
    case errc::topology_mismatch: return "topology mismatch";
    case errc::rank_out_of_range: return "rank out of range";
    case errc::degenerate_covariance: return "degenerate covariance";
    case errc::length_mismatch: return "length mismatch";
    case errc::invalid_argument: return "invalid argument";
    case errc::behind_camera: return "behind camera";
    case errc::zero_area_image: return "zero area image";
    case errc::off_atlas: return "off atlas";
    case errc::instance_absent: return "instance absent";
    case errc::insufficient_points: return "insufficient points";
    case errc::degenerate_configuration: return "degenerate configuration";
    case errc::dimension_mismatch: return "dimension mismatch";
    case errc::empty_correspondences: return "empty correspondence list";
    case errc::under_constrained: return "under-constrained system";
    case errc::missing_part: return "missing part";
    case errc::resolution_mismatch: return "resolution mismatch";
    case errc::empty_part_domain: return "empty part domain";
    case errc::threshold_mismatch: return "threshold list mismatch";
    case errc::nonpositive_dims: return "non-positive dimensions";
    case errc::empty_mesh: return "empty mesh";
    }
    return "unknown error";
}

} // namespace carfit
