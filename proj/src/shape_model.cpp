#include "carfit/shape_model.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include <Eigen/SVD>

namespace carfit {

namespace {

bool same_topology(const Mesh& a, const Mesh& b) {
    if (a.faces != b.faces || a.face_part.size() != b.face_part.size())
        return false;
    for (size_t i = 0; i < a.face_part.size(); ++i)
        if (a.face_part[i] != b.face_part[i])
            return false;
    for (size_t i = 0; i < a.corner_uv.size(); ++i)
        for (int c = 0; c < 3; ++c)
            if (a.corner_uv[i][c] != b.corner_uv[i][c])
                return false;
    return a.vertex_count() == b.vertex_count();
}

Eigen::VectorXd flatten(const Mesh& mesh) {
    Eigen::VectorXd v(3 * mesh.vertex_count());
    for (size_t i = 0; i < mesh.vertex_count(); ++i)
        v.segment<3>(3 * i) = mesh.vertices[i];
    return v;
}

} // namespace

void PcaBasis::validate() const {
    const int r = rank();
    require(mean.size() == 3 * static_cast<Eigen::Index>(topology.vertex_count()),
            errc::topology_mismatch, "mean length disagrees with topology");
    require(components.rows() == mean.size() && components.cols() == r, errc::length_mismatch,
            "component matrix shape");
    for (int k = 0; k < r; ++k) {
        require(stddevs[k] > 0.0, errc::invalid_argument, "stddevs must be strictly positive");
        if (k + 1 < r)
            require(stddevs[k] >= stddevs[k + 1], errc::invalid_argument,
                    "stddevs must be sorted descending");
        for (int l = k; l < r; ++l) {
            const double dot = components.col(k).dot(components.col(l));
            const double expected = (k == l) ? 1.0 : 0.0;
            require(std::abs(dot - expected) <= 1e-8, errc::invalid_argument,
                    "components not orthonormal");
        }
    }
}

PcaBasis build_pca(const std::vector<Mesh>& meshes, int r) {
    require(meshes.size() >= 2, errc::invalid_argument, "need at least 2 meshes");
    for (size_t i = 1; i < meshes.size(); ++i)
        require(same_topology(meshes[0], meshes[i]), errc::topology_mismatch,
                "mesh " + std::to_string(i) + " differs from mesh 0");
    const Eigen::Index dim = 3 * static_cast<Eigen::Index>(meshes[0].vertex_count());
    const Eigen::Index n = static_cast<Eigen::Index>(meshes.size());
    require(r >= 1 && r <= std::min<Eigen::Index>(n - 1, dim), errc::rank_out_of_range,
            "r must be in [1, min(sample count - 1, 3N)]");

    Eigen::MatrixXd data(n, dim);
    for (Eigen::Index i = 0; i < n; ++i)
        data.row(i) = flatten(meshes[i]).transpose();
    const Eigen::VectorXd mean = data.colwise().mean().transpose();
    data.rowwise() -= mean.transpose();

    // Thin SVD of the (samples x 3N) matrix; samples << dimensions.
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(data, Eigen::ComputeThinU | Eigen::ComputeThinV);

    PcaBasis basis;
    basis.mean = mean;
    basis.components.resize(dim, r);
    basis.stddevs.resize(r);
    for (int k = 0; k < r; ++k) {
        const double sigma = svd.singularValues()[k];
        const double variance = sigma * sigma / static_cast<double>(n);
        require(variance >= 1e-12, errc::degenerate_covariance,
                "component " + std::to_string(k) + " variance " + std::to_string(variance) +
                    " below 1e-12");
        basis.stddevs[k] = std::sqrt(variance);
        Eigen::VectorXd direction = svd.matrixV().col(k);
        // deterministic sign: the largest-magnitude entry is positive
        Eigen::Index imax = 0;
        direction.cwiseAbs().maxCoeff(&imax);
        if (direction[imax] < 0.0)
            direction = -direction;
        basis.components.col(k) = direction;
    }
    basis.topology = meshes[0];
    basis.topology.vertices.assign(meshes[0].vertex_count(), Vec3::Zero());
    for (size_t i = 0; i < basis.topology.vertex_count(); ++i)
        basis.topology.vertices[i] = mean.segment<3>(3 * i);
    basis.validate();
    return basis;
}

Mesh synthesize(const PcaBasis& basis, const ShapeCoefficients& coeffs) {
    require(coeffs.size() == basis.rank(), errc::length_mismatch,
            "coefficient length " + std::to_string(coeffs.size()) + " != basis rank " +
                std::to_string(basis.rank()));
    const Eigen::VectorXd flat =
        basis.mean + basis.components * (basis.stddevs.cwiseProduct(coeffs));
    Mesh mesh = basis.topology;
    for (size_t i = 0; i < mesh.vertex_count(); ++i)
        mesh.vertices[i] = flat.segment<3>(3 * i);
    return mesh;
}

ShapeCoefficients project(const PcaBasis& basis, const Mesh& mesh) {
    require(3 * static_cast<Eigen::Index>(mesh.vertex_count()) == basis.mean.size(),
            errc::topology_mismatch, "mesh vertex count disagrees with basis");
    const Eigen::VectorXd centered = flatten(mesh) - basis.mean;
    return (basis.components.transpose() * centered).cwiseQuotient(basis.stddevs);
}

Eigen::Matrix<double, 3, Eigen::Dynamic> shape_jacobian(const PcaBasis& basis,
                                                        std::uint32_t vertex) {
    require(vertex < static_cast<std::uint32_t>(basis.vertex_count()), errc::index_out_of_range,
            "vertex " + std::to_string(vertex) + " of " + std::to_string(basis.vertex_count()));
    Eigen::Matrix<double, 3, Eigen::Dynamic> jac(3, basis.rank());
    for (int k = 0; k < basis.rank(); ++k)
        jac.col(k) = basis.stddevs[k] * basis.components.block<3, 1>(3 * vertex, k);
    return jac;
}

namespace {

constexpr char kBasisMagic[8] = {'P', 'C', 'A', 'B', 'A', 'S', 'I', 'S'};

void put_u64_le(std::ostream& out, std::uint64_t v) {
    std::uint8_t bytes[8];
    for (int i = 0; i < 8; ++i)
        bytes[i] = static_cast<std::uint8_t>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(bytes), 8);
}

std::uint64_t get_u64_le(std::istream& in) {
    std::uint8_t bytes[8];
    in.read(reinterpret_cast<char*>(bytes), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return v;
}

void put_f64_le(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64_le(out, bits);
}

double get_f64_le(std::istream& in) {
    const std::uint64_t bits = get_u64_le(in);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

} // namespace

void save_basis(const std::filesystem::path& path, const PcaBasis& basis) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), errc::io_error, "cannot open for writing: " + path.string());
    out.write(kBasisMagic, 8);
    put_u64_le(out, static_cast<std::uint64_t>(basis.vertex_count()));
    put_u64_le(out, static_cast<std::uint64_t>(basis.rank()));
    for (Eigen::Index i = 0; i < basis.mean.size(); ++i)
        put_f64_le(out, basis.mean[i]);
    for (int k = 0; k < basis.rank(); ++k)
        put_f64_le(out, basis.stddevs[k]);
    for (int k = 0; k < basis.rank(); ++k)
        for (Eigen::Index i = 0; i < basis.components.rows(); ++i)
            put_f64_le(out, basis.components(i, k));

    const std::string block = mesh_to_obj(basis.topology);
    put_u64_le(out, block.size());
    out.write(block.data(), static_cast<std::streamsize>(block.size()));
    require(out.good(), errc::io_error, "short write: " + path.string());
}

PcaBasis load_basis(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), errc::io_error, "cannot open: " + path.string());
    char magic[8];
    in.read(magic, 8);
    require(in.good() && std::memcmp(magic, kBasisMagic, 8) == 0, errc::parse_error,
            path.string() + ": bad basis magic");
    const auto n = static_cast<Eigen::Index>(get_u64_le(in));
    const auto r = static_cast<Eigen::Index>(get_u64_le(in));
    require(n >= 1 && r >= 1, errc::parse_error, path.string() + ": bad header");

    PcaBasis basis;
    basis.mean.resize(3 * n);
    for (Eigen::Index i = 0; i < 3 * n; ++i)
        basis.mean[i] = get_f64_le(in);
    basis.stddevs.resize(r);
    for (Eigen::Index k = 0; k < r; ++k)
        basis.stddevs[k] = get_f64_le(in);
    basis.components.resize(3 * n, r);
    for (Eigen::Index k = 0; k < r; ++k)
        for (Eigen::Index i = 0; i < 3 * n; ++i)
            basis.components(i, k) = get_f64_le(in);

    const std::uint64_t block_size = get_u64_le(in);
    std::string block(block_size, '\0');
    in.read(block.data(), static_cast<std::streamsize>(block_size));
    require(in.good(), errc::parse_error, path.string() + ": truncated topology block");
    basis.topology = mesh_from_obj(block, path.string() + "#topology");
    require(static_cast<Eigen::Index>(basis.topology.vertex_count()) == n, errc::parse_error,
            path.string() + ": topology vertex count disagrees with header");
    basis.validate();
    return basis;
}

} // namespace carfit
