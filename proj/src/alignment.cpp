#include "carfit/alignment.hpp"

#include "carfit/point_grid.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <queue>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

namespace carfit {

namespace {

Mat3 kabsch_rotation(const Mat3& covariance) {
    const Eigen::JacobiSVD<Mat3> svd(covariance, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 r = svd.matrixV() * svd.matrixU().transpose();
    if (r.determinant() < 0.0) {
        Mat3 flip = Mat3::Identity();
        flip(2, 2) = -1.0;
        r = svd.matrixV() * flip * svd.matrixU().transpose();
    }
    return r;
}

void check_handles(const Mesh& mesh, const DeformationConstraints& constraints) {
    require(constraints.weight > 0.0, errc::invalid_argument, "handle weight must be positive");
    require(constraints.handles.size() >= 3, errc::insufficient_points,
            "need at least 3 handles, got " + std::to_string(constraints.handles.size()));
    Vec3 mean = Vec3::Zero();
    for (const auto& [index, target] : constraints.handles) {
        require(index < mesh.vertex_count(), errc::index_out_of_range,
                "handle vertex " + std::to_string(index));
        mean += mesh.vertices[index];
    }
    mean /= static_cast<double>(constraints.handles.size());
    Mat3 cov = Mat3::Zero();
    for (const auto& [index, target] : constraints.handles) {
        const Vec3 d = mesh.vertices[index] - mean;
        cov += d * d.transpose();
    }
    const Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    const double largest = eig.eigenvalues()[2];
    require(largest > 0.0 && eig.eigenvalues()[1] / largest > 1e-18, errc::degenerate_configuration,
            "handles are collinear");
}

std::vector<int> connected_components(const std::vector<std::vector<std::uint32_t>>& adjacency) {
    std::vector<int> component(adjacency.size(), -1);
    int next = 0;
    for (std::uint32_t seed = 0; seed < adjacency.size(); ++seed) {
        if (component[seed] >= 0)
            continue;
        std::queue<std::uint32_t> frontier;
        frontier.push(seed);
        component[seed] = next;
        while (!frontier.empty()) {
            const std::uint32_t v = frontier.front();
            frontier.pop();
            for (std::uint32_t w : adjacency[v])
                if (component[w] < 0) {
                    component[w] = next;
                    frontier.push(w);
                }
        }
        ++next;
    }
    return component;
}

} // namespace

SimilarityTransform fit_similarity(const std::vector<Vec3>& source,
                                   const std::vector<Vec3>& target) {
    require(source.size() == target.size(), errc::length_mismatch, "paired point sets");
    require(source.size() >= 3, errc::insufficient_points, "need >= 3 point pairs");
    Eigen::Matrix3Xd src(3, source.size()), dst(3, target.size());
    for (size_t i = 0; i < source.size(); ++i) {
        src.col(i) = source[i];
        dst.col(i) = target[i];
    }
    const Eigen::Matrix4d m = Eigen::umeyama(src, dst, true);
    const Mat3 a = m.topLeftCorner<3, 3>();
    const double scale = std::cbrt(a.determinant());
    require(scale > 0.0, errc::degenerate_configuration, "similarity fit collapsed");
    const Mat3 r = a / scale;
    return SimilarityTransform(Quat(r), m.topRightCorner<3, 1>(), scale);
}

double arap_energy(const Mesh& rest, const Mesh& deformed,
                   const DeformationConstraints& constraints) {
    require(rest.vertex_count() == deformed.vertex_count(), errc::topology_mismatch,
            "rest/deformed vertex counts differ");
    const auto adjacency = vertex_adjacency(rest);
    double energy = 0.0;
    for (std::uint32_t i = 0; i < adjacency.size(); ++i) {
        if (adjacency[i].empty())
            continue;
        Mat3 cov = Mat3::Zero();
        for (std::uint32_t j : adjacency[i])
            cov += (rest.vertices[i] - rest.vertices[j]) *
                   (deformed.vertices[i] - deformed.vertices[j]).transpose();
        const Mat3 r = kabsch_rotation(cov);
        for (std::uint32_t j : adjacency[i]) {
            const Vec3 e = rest.vertices[i] - rest.vertices[j];
            const Vec3 ed = deformed.vertices[i] - deformed.vertices[j];
            energy += (ed - r * e).squaredNorm();
        }
    }
    for (const auto& [index, target] : constraints.handles)
        energy += constraints.weight * (deformed.vertices[index] - target).squaredNorm();
    return energy;
}

Mesh arap_deform(const Mesh& mesh, const DeformationConstraints& constraints, int iterations) {
    require(iterations >= 1, errc::invalid_argument, "iterations must be >= 1");
    check_handles(mesh, constraints);
    const auto adjacency = vertex_adjacency(mesh);
    const auto n = static_cast<Eigen::Index>(mesh.vertex_count());

    // every connected component needs a handle or the global system is
    // rank-deficient
    const auto component = connected_components(adjacency);
    const int n_components = *std::max_element(component.begin(), component.end()) + 1;
    std::vector<char> component_handled(n_components, 0);
    std::vector<double> handle_weight(n, 0.0);
    std::vector<Vec3> handle_target(n, Vec3::Zero());
    for (const auto& [index, target] : constraints.handles) {
        component_handled[component[index]] = 1;
        handle_weight[index] = constraints.weight; // later handles override earlier ones
        handle_target[index] = target;
    }
    for (int c = 0; c < n_components; ++c)
        require(component_handled[c], errc::under_constrained,
                "connected component " + std::to_string(c) + " has no handle");

    // constant global system: uniform Laplacian plus handle penalties
    Eigen::SparseMatrix<double> system(n, n);
    {
        std::vector<Eigen::Triplet<double>> triplets;
        for (Eigen::Index i = 0; i < n; ++i) {
            triplets.emplace_back(i, i,
                                  static_cast<double>(adjacency[i].size()) + handle_weight[i]);
            for (std::uint32_t j : adjacency[i])
                triplets.emplace_back(i, j, -1.0);
        }
        system.setFromTriplets(triplets.begin(), triplets.end());
    }
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> solver(system);
    require(solver.info() == Eigen::Success, errc::under_constrained,
            "global ARAP system is not positive definite");

    // initialize from the best-fit similarity of the handle pairs
    std::vector<Vec3> handle_src, handle_dst;
    for (const auto& [index, target] : constraints.handles) {
        handle_src.push_back(mesh.vertices[index]);
        handle_dst.push_back(target);
    }
    const SimilarityTransform init = fit_similarity(handle_src, handle_dst);
    std::vector<Vec3> current(mesh.vertex_count());
    for (size_t i = 0; i < current.size(); ++i)
        current[i] = init.apply(mesh.vertices[i]);

    std::vector<Mat3> rotations(mesh.vertex_count(), Mat3::Identity());
    Eigen::MatrixXd rhs(n, 3), solution(n, 3);
    for (int iter = 0; iter < iterations; ++iter) {
        // local step: optimal rotation per vertex
        for (Eigen::Index i = 0; i < n; ++i) {
            Mat3 cov = Mat3::Zero();
            for (std::uint32_t j : adjacency[i])
                cov += (mesh.vertices[i] - mesh.vertices[j]) *
                       (current[i] - current[j]).transpose();
            rotations[i] = kabsch_rotation(cov);
        }
        // global step: linear solve with the rotations fixed
        rhs.setZero();
        for (Eigen::Index i = 0; i < n; ++i) {
            Vec3 b = handle_weight[i] * handle_target[i];
            for (std::uint32_t j : adjacency[i])
                b += 0.5 * (rotations[i] + rotations[j]) * (mesh.vertices[i] - mesh.vertices[j]);
            rhs.row(i) = b.transpose();
        }
        solution = solver.solve(rhs);
        for (Eigen::Index i = 0; i < n; ++i)
            current[i] = solution.row(i).transpose();
    }

    Mesh out = mesh;
    out.vertices = std::move(current);
    return out;
}

IcpResult rigid_icp(const Mesh& source, const Mesh& target, int max_iters) {
    require(!source.vertices.empty() && !target.vertices.empty(), errc::empty_mesh,
            "icp needs non-empty meshes");
    require(max_iters >= 1, errc::invalid_argument, "max_iters must be >= 1");

    const PointGrid grid(target.vertices);

    const auto mean_of = [](const std::vector<Vec3>& pts) {
        Vec3 m = Vec3::Zero();
        for (const Vec3& p : pts)
            m += p;
        return Vec3(m / static_cast<double>(pts.size()));
    };
    const auto spread_of = [&](const std::vector<Vec3>& pts, const Vec3& mean) {
        double s = 0.0;
        for (const Vec3& p : pts)
            s += (p - mean).squaredNorm();
        return std::sqrt(s / static_cast<double>(pts.size()));
    };

    const Vec3 src_mean = mean_of(source.vertices);
    const Vec3 dst_mean = mean_of(target.vertices);
    const double src_spread = spread_of(source.vertices, src_mean);
    const double dst_spread = spread_of(target.vertices, dst_mean);
    const double init_scale = src_spread > 0.0 ? dst_spread / src_spread : 1.0;
    SimilarityTransform current(Quat::Identity(), dst_mean - init_scale * src_mean,
                                std::max(init_scale, 1e-12));

    const auto mean_residual = [&](const SimilarityTransform& t) {
        double sum = 0.0;
        for (const Vec3& p : source.vertices) {
            const Vec3 q = t.apply(p);
            sum += (target.vertices[grid.nearest(q)] - q).norm();
        }
        return sum / static_cast<double>(source.vertices.size());
    };

    IcpResult result;
    result.transform = current;
    result.residual = mean_residual(current);

    std::vector<Vec3> matches(source.vertices.size());
    for (int iter = 0; iter < max_iters; ++iter) {
        for (size_t i = 0; i < source.vertices.size(); ++i)
            matches[i] = target.vertices[grid.nearest(current.apply(source.vertices[i]))];
        if (source.vertices.size() >= 3) {
            current = fit_similarity(source.vertices, matches);
        } else {
            // too few points for a similarity fit; align centroids only
            const Vec3 m = mean_of(matches);
            current = SimilarityTransform(Quat::Identity(), m - src_mean, 1.0);
        }
        const double residual = mean_residual(current);
        result.iterations = iter + 1;
        if (residual < result.residual - 1e-15) {
            result.residual = residual;
            result.transform = current;
        } else {
            result.converged = true;
            break;
        }
    }
    return result;
}

Mesh align_to_target(const Mesh& template_mesh, const Mesh& target, const AlignConfig& config) {
    require(!target.vertices.empty(), errc::empty_mesh, "empty target");

    // split faces into body and the four tires
    std::array<std::vector<std::uint32_t>, 4> tire_faces;
    std::vector<std::uint32_t> body_faces;
    for (std::uint32_t fi = 0; fi < template_mesh.face_count(); ++fi) {
        const PartId part = template_mesh.face_part[fi];
        if (part.is_tire())
            tire_faces[part.value() - 14].push_back(fi);
        else
            body_faces.push_back(fi);
    }
    for (int t = 0; t < 4; ++t)
        require(!tire_faces[t].empty(), errc::missing_part,
                "template lacks tire part " + std::to_string(14 + t));
    require(!body_faces.empty(), errc::missing_part, "template lacks body parts");

    const auto submesh_vertices = [&](const std::vector<std::uint32_t>& face_set) {
        std::vector<std::uint32_t> used;
        for (std::uint32_t fi : face_set)
            for (int c = 0; c < 3; ++c)
                used.push_back(template_mesh.faces[fi][c]);
        std::sort(used.begin(), used.end());
        used.erase(std::unique(used.begin(), used.end()), used.end());
        return used;
    };

    const auto make_submesh = [&](const std::vector<std::uint32_t>& face_set,
                                  const std::vector<std::uint32_t>& used,
                                  const std::vector<Vec3>& positions) {
        std::vector<std::uint32_t> remap(template_mesh.vertex_count(), 0);
        for (std::uint32_t i = 0; i < used.size(); ++i)
            remap[used[i]] = i;
        Mesh sub;
        sub.vertices.reserve(used.size());
        for (std::uint32_t v : used)
            sub.vertices.push_back(positions[v]);
        for (std::uint32_t fi : face_set) {
            const auto& f = template_mesh.faces[fi];
            sub.faces.push_back({remap[f[0]], remap[f[1]], remap[f[2]]});
            sub.face_part.push_back(template_mesh.face_part[fi]);
            sub.corner_uv.push_back(template_mesh.corner_uv[fi]);
        }
        return sub;
    };

    const std::vector<std::uint32_t> body_used = submesh_vertices(body_faces);
    Mesh body = make_submesh(body_faces, body_used, template_mesh.vertices);

    // ARAP passes with nearest-point handles, refreshed between passes
    const PointGrid target_grid(target.vertices);
    for (int pass = 0; pass < config.passes; ++pass) {
        std::vector<double> distances(body.vertex_count());
        std::vector<Vec3> nearest(body.vertex_count());
        for (size_t i = 0; i < body.vertex_count(); ++i) {
            nearest[i] = target.vertices[target_grid.nearest(body.vertices[i])];
            distances[i] = (nearest[i] - body.vertices[i]).norm();
        }
        std::vector<double> sorted = distances;
        std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
        const double median = sorted[sorted.size() / 2];
        const double cutoff = config.prune_factor * median;

        DeformationConstraints constraints;
        constraints.weight = config.handle_weight;
        for (std::uint32_t i = 0; i < body.vertex_count(); ++i)
            if (distances[i] <= cutoff || median == 0.0)
                constraints.handles.emplace_back(i, nearest[i]);
        body = arap_deform(body, constraints, config.arap_iterations);
    }

    Mesh result = template_mesh;
    for (std::uint32_t i = 0; i < body_used.size(); ++i)
        result.vertices[body_used[i]] = body.vertices[i];

    // seed the tires from the body's overall similarity, then refine each by
    // ICP against the nearby slice of the target; applying a similarity to
    // the template wheel keeps it circular
    std::vector<Vec3> body_src, body_dst;
    for (std::uint32_t i = 0; i < body_used.size(); ++i) {
        body_src.push_back(template_mesh.vertices[body_used[i]]);
        body_dst.push_back(body.vertices[i]);
    }
    const SimilarityTransform body_fit = fit_similarity(body_src, body_dst);

    for (int t = 0; t < 4; ++t) {
        const std::vector<std::uint32_t> used = submesh_vertices(tire_faces[t]);
        Mesh tire = make_submesh(tire_faces[t], used, template_mesh.vertices);
        Mesh seeded = tire;
        for (Vec3& v : seeded.vertices)
            v = body_fit.apply(v);

        Vec3 lo = Vec3::Constant(1e300), hi = Vec3::Constant(-1e300);
        for (const Vec3& v : seeded.vertices) {
            lo = lo.cwiseMin(v);
            hi = hi.cwiseMax(v);
        }
        const Vec3 center = (lo + hi) / 2;
        const double radius = (hi - lo).norm();
        Mesh crop;
        for (const Vec3& v : target.vertices)
            if ((v - center).norm() <= radius)
                crop.vertices.push_back(v);
        if (crop.vertices.empty())
            crop.vertices = target.vertices;

        const IcpResult icp = rigid_icp(seeded, crop, config.icp_iterations);
        const SimilarityTransform total = icp.transform.compose(body_fit);
        for (std::uint32_t i = 0; i < used.size(); ++i)
            result.vertices[used[i]] = total.apply(template_mesh.vertices[used[i]]);
    }
    return result;
}

} // namespace carfit
