#pragma once

#include <filesystem>

#include <Eigen/Core>

#include "carfit/mesh.hpp"

namespace carfit {

using ShapeCoefficients = Eigen::VectorXd;

/// Linear deformable vehicle representation: a shape is the mean plus a
/// combination of principal displacement directions scaled by their standard
/// deviations. Coefficients are expressed in standard-deviation units.
struct PcaBasis {
    Eigen::VectorXd mean;        // 3N, vertex coordinates flattened x0 y0 z0 x1 ...
    Eigen::MatrixXd components;  // 3N x r, orthonormal columns
    Eigen::VectorXd stddevs;     // r, descending, strictly positive
    Mesh topology;               // faces/part/UV shared by all synthesized meshes

    int rank() const { return static_cast<int>(stddevs.size()); }
    int vertex_count() const { return static_cast<int>(mean.size() / 3); }

    void validate() const;
};

/// Fits the top-r principal directions of the vertex-wise centered mesh
/// stack. Standard deviations follow the population convention (divide by
/// sample count), so a coefficient of +1 on a two-sample basis reproduces a
/// training mesh exactly.
PcaBasis build_pca(const std::vector<Mesh>& meshes, int r);

Mesh synthesize(const PcaBasis& basis, const ShapeCoefficients& coeffs);

ShapeCoefficients project(const PcaBasis& basis, const Mesh& mesh);

/// d(vertex position)/d(coeffs) for one vertex; column k is stddev_k times
/// the component-k slice at that vertex. Constant in the coefficients.
Eigen::Matrix<double, 3, Eigen::Dynamic> shape_jacobian(const PcaBasis& basis, std::uint32_t vertex);

/// Binary container: header, then mean / stddevs / components as
/// little-endian f64, then the topology as an embedded OBJ block.
void save_basis(const std::filesystem::path& path, const PcaBasis& basis);
PcaBasis load_basis(const std::filesystem::path& path);

} // namespace carfit
