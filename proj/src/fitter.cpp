#include "carfit/fitter.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace carfit {

namespace {

constexpr double kMinDepth = 1e-9;
constexpr double kBehindCameraResidual = 1e6; // pixels, charged to points behind the camera

struct ResolvedPoint {
    Vec2 pixel;
    Vec3 rest;                                  // surface point at zero coefficients
    Eigen::Matrix<double, 3, Eigen::Dynamic> jac; // d(surface point)/d(coeffs)
};

std::vector<ResolvedPoint> resolve(const std::vector<Correspondence>& correspondences,
                                   const PcaBasis& basis) {
    const UvAtlasIndex index(basis.topology);
    std::vector<ResolvedPoint> resolved;
    resolved.reserve(correspondences.size());
    for (const Correspondence& c : correspondences) {
        const auto location = index.try_locate_strict(c.part, c.uv);
        if (!location)
            continue; // off-atlas (flipped part or jittered off the panel): rejected
        ResolvedPoint p;
        p.pixel = c.pixel;
        const auto& face = basis.topology.faces[location->face];
        p.rest = Vec3::Zero();
        p.jac.setZero(3, basis.rank());
        for (int corner = 0; corner < 3; ++corner) {
            const double w = location->barycentric[corner];
            p.rest += w * Vec3(basis.mean.segment<3>(3 * face[corner]));
            p.jac += w * shape_jacobian(basis, face[corner]);
        }
        resolved.push_back(std::move(p));
    }
    return resolved;
}

double huber(double e, double delta) {
    if (!(std::isfinite(delta)) || e <= delta)
        return e * e;
    return delta * (2.0 * e - delta);
}

// d(huber)/de divided by 2e: the IRLS weight that makes weighted least
// squares match the robust gradient.
double huber_weight(double e, double delta) {
    if (!(std::isfinite(delta)) || e <= delta)
        return 1.0;
    return delta / e;
}

struct DataTermState {
    const std::vector<ResolvedPoint>* points;
    const CameraIntrinsics* intrinsics;
    double huber_delta;
};

double data_term_value(const DataTermState& state, const Pose& pose,
                       const ShapeCoefficients& coeffs) {
    const Mat3 rot = pose.rotation_matrix();
    double total = 0.0;
    for (const ResolvedPoint& rp : *state.points) {
        const Vec3 v = rp.rest + rp.jac * coeffs;
        const Vec3 p = rot * v + pose.translation;
        if (p.z() <= kMinDepth) {
            total += huber(kBehindCameraResidual, state.huber_delta);
            continue;
        }
        const Vec2 projected(state.intrinsics->fx * p.x() / p.z() + state.intrinsics->cx,
                             state.intrinsics->fy * p.y() / p.z() + state.intrinsics->cy);
        total += huber((rp.pixel - projected).norm(), state.huber_delta);
    }
    return total;
}

// Accumulates the IRLS normal equations of the data term. Which parameter
// block is requested decides the Jacobian: pose tangent (6) or coeffs (r).
struct NormalEquations {
    Eigen::MatrixXd h;
    Eigen::VectorXd g;        // J^T W r, the Gauss-Newton right-hand side
    Eigen::VectorXd gradient; // of the robust objective, for verification
};

enum class Block { pose, coeffs };

NormalEquations accumulate(const DataTermState& state, const Pose& pose,
                           const ShapeCoefficients& coeffs, Block block) {
    const Mat3 rot = pose.rotation_matrix();
    const int dim = block == Block::pose ? 6 : static_cast<int>(coeffs.size());
    NormalEquations eq;
    eq.h = Eigen::MatrixXd::Zero(dim, dim);
    eq.g = Eigen::VectorXd::Zero(dim);
    eq.gradient = Eigen::VectorXd::Zero(dim);

    Eigen::Matrix<double, 2, Eigen::Dynamic> jac(2, dim);
    for (const ResolvedPoint& rp : *state.points) {
        const Vec3 v = rp.rest + rp.jac * coeffs;
        const Vec3 p = rot * v + pose.translation;
        if (p.z() <= kMinDepth)
            continue; // no usable derivative behind the camera
        const double iz = 1.0 / p.z();
        const Vec2 projected(state.intrinsics->fx * p.x() * iz + state.intrinsics->cx,
                             state.intrinsics->fy * p.y() * iz + state.intrinsics->cy);
        const Vec2 r = rp.pixel - projected;
        const double e = r.norm();

        Eigen::Matrix<double, 2, 3> dpi;
        dpi << state.intrinsics->fx * iz, 0.0, -state.intrinsics->fx * p.x() * iz * iz, 0.0,
            state.intrinsics->fy * iz, -state.intrinsics->fy * p.y() * iz * iz;

        if (block == Block::pose) {
            // dp/domega = -R [v]x for the right-multiplied tangent
            Mat3 skew;
            skew << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
            jac.leftCols<3>() = -(dpi * (rot * skew));
            jac.rightCols<3>() = dpi;
        } else {
            jac = dpi * (rot * rp.jac);
        }

        const double w = huber_weight(e, state.huber_delta);
        eq.h += w * jac.transpose() * jac;
        eq.g += w * jac.transpose() * r;
        if (e > 0.0) {
            // dE/dtheta = rho'(e) * (r/e)^T * dr/dtheta, dr/dtheta = -jac
            const double rho_prime =
                (!std::isfinite(state.huber_delta) || e <= state.huber_delta)
                    ? 2.0 * e
                    : 2.0 * state.huber_delta;
            eq.gradient += -rho_prime / e * (jac.transpose() * r);
        }
    }
    return eq;
}

// E_r = s^T Q s with Q from the Laplacian differentials of the scaled
// principal displacement fields.
Eigen::MatrixXd smoothness_quadratic(const PcaBasis& basis) {
    const auto adjacency = vertex_adjacency(basis.topology);
    const int r = basis.rank();
    const int n = basis.vertex_count();
    std::vector<Eigen::MatrixXd> fields(r, Eigen::MatrixXd::Zero(3, n));
    for (int k = 0; k < r; ++k)
        for (int i = 0; i < n; ++i) {
            Vec3 value = basis.stddevs[k] * basis.components.block<3, 1>(3 * i, k);
            Vec3 mean = Vec3::Zero();
            for (std::uint32_t j : adjacency[i])
                mean += basis.stddevs[k] * Vec3(basis.components.block<3, 1>(3 * j, k));
            if (!adjacency[i].empty())
                mean /= static_cast<double>(adjacency[i].size());
            fields[k].col(i) = value - mean;
        }
    Eigen::MatrixXd q(r, r);
    for (int k = 0; k < r; ++k)
        for (int l = k; l < r; ++l) {
            const double dot = (fields[k].array() * fields[l].array()).sum();
            q(k, l) = dot;
            q(l, k) = dot;
        }
    return q;
}

double silhouette_term(const Mesh& mesh, const Pose& pose, const CameraIntrinsics& intrinsics,
                       const Image<std::uint8_t>& part_map_pred) {
    const Image<std::uint8_t> rendered = render_part_silhouette(mesh, pose, intrinsics);
    size_t disagree = 0, predicted_fg = 0;
    for (size_t i = 0; i < rendered.size(); ++i) {
        if (part_map_pred.pixels[i] != kBackgroundPart)
            ++predicted_fg;
        if (rendered.pixels[i] != part_map_pred.pixels[i])
            ++disagree;
    }
    return static_cast<double>(disagree) / static_cast<double>(std::max<size_t>(1, predicted_fg));
}

Eigen::Matrix<double, 6, 1> pose_log(const Pose& from, const Pose& to) {
    const Eigen::AngleAxisd aa(from.rotation.conjugate() * to.rotation);
    Eigen::Matrix<double, 6, 1> delta;
    delta.head<3>() = aa.angle() * aa.axis();
    delta.tail<3>() = to.translation - from.translation;
    return delta;
}

Pose pose_step(const Pose& from, const Eigen::Matrix<double, 6, 1>& delta, double alpha) {
    Pose out = from;
    out.update(alpha * delta.head<3>(), alpha * delta.tail<3>());
    return out;
}

} // namespace

const char* to_string(VehicleType type) {
    switch (type) {
    case VehicleType::coupe: return "coupe";
    case VehicleType::hatchback: return "hatchback";
    case VehicleType::notchback: return "notchback";
    case VehicleType::suv: return "SUV";
    case VehicleType::mpv: return "MPV";
    }
    return "unknown";
}

Pose init_pose_pnp(const std::vector<Correspondence>& correspondences, const PcaBasis& basis,
                   const VehicleTypePrior& prior, const CameraIntrinsics& intrinsics) {
    require(prior.mean_coeffs.size() == basis.rank(), errc::length_mismatch,
            "prior coefficients do not match basis rank");
    require(correspondences.size() >= 6, errc::insufficient_points,
            "PnP needs >= 6 correspondences, got " + std::to_string(correspondences.size()));

    const Mesh prior_mesh = synthesize(basis, prior.mean_coeffs);
    const UvAtlasIndex index(basis.topology);
    std::vector<Vec3> points;
    std::vector<Vec2> normalized;
    for (const Correspondence& c : correspondences) {
        const auto location = index.try_locate(c.part, c.uv);
        if (!location)
            continue;
        points.push_back(index.surface_point(prior_mesh, *location));
        normalized.emplace_back((c.pixel.x() - intrinsics.cx) / intrinsics.fx,
                                (c.pixel.y() - intrinsics.cy) / intrinsics.fy);
    }
    require(points.size() >= 6, errc::insufficient_points,
            "PnP resolved only " + std::to_string(points.size()) + " correspondences");

    // distinct surface points in general position
    std::vector<Vec3> distinct;
    for (const Vec3& p : points) {
        bool seen = false;
        for (const Vec3& q : distinct)
            if ((p - q).squaredNorm() < 1e-24)
                seen = true;
        if (!seen)
            distinct.push_back(p);
        if (distinct.size() > 64)
            break;
    }
    require(distinct.size() >= 4, errc::insufficient_points,
            "PnP needs >= 4 distinct surface points");
    {
        Vec3 mean = Vec3::Zero();
        for (const Vec3& p : distinct)
            mean += p;
        mean /= static_cast<double>(distinct.size());
        Mat3 cov = Mat3::Zero();
        for (const Vec3& p : distinct)
            cov += (p - mean) * (p - mean).transpose();
        const Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
        const double largest = eig.eigenvalues()[2];
        require(largest > 0.0 && eig.eigenvalues()[1] / largest > 1e-18,
                errc::degenerate_configuration, "surface points are collinear");
        require(eig.eigenvalues()[0] / largest > 1e-18, errc::degenerate_configuration,
                "surface points are coplanar");
    }

    // DLT for the 3x4 projection in normalized camera coordinates, with
    // Hartley conditioning on both sides (small off-center image patches
    // make the raw system disastrously ill-conditioned)
    const auto n = static_cast<Eigen::Index>(points.size());
    Vec3 mean3 = Vec3::Zero();
    Vec2 mean2 = Vec2::Zero();
    for (Eigen::Index i = 0; i < n; ++i) {
        mean3 += points[i];
        mean2 += normalized[i];
    }
    mean3 /= static_cast<double>(n);
    mean2 /= static_cast<double>(n);
    double spread3 = 0.0, spread2 = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        spread3 += (points[i] - mean3).norm();
        spread2 += (normalized[i] - mean2).norm();
    }
    const double s3 = std::sqrt(3.0) * n / std::max(spread3, 1e-12);
    const double s2 = std::sqrt(2.0) * n / std::max(spread2, 1e-12);

    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, 12);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vec3 pc = s3 * (points[i] - mean3);
        const Vec2 xc = s2 * (normalized[i] - mean2);
        const Eigen::Vector4d xh(pc.x(), pc.y(), pc.z(), 1.0);
        a.block<1, 4>(2 * i, 0) = xh.transpose();
        a.block<1, 4>(2 * i, 8) = -xc.x() * xh.transpose();
        a.block<1, 4>(2 * i + 1, 4) = xh.transpose();
        a.block<1, 4>(2 * i + 1, 8) = -xc.y() * xh.transpose();
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinV);
    Eigen::VectorXd pv = svd.matrixV().col(11);
    Eigen::Matrix<double, 3, 4> conditioned;
    conditioned.row(0) = pv.segment<4>(0).transpose();
    conditioned.row(1) = pv.segment<4>(4).transpose();
    conditioned.row(2) = pv.segment<4>(8).transpose();

    // undo the conditioning: P = T2^-1 * P^ * T3
    Eigen::Matrix4d t3 = Eigen::Matrix4d::Identity();
    t3.topLeftCorner<3, 3>() *= s3;
    t3.topRightCorner<3, 1>() = -s3 * mean3;
    Eigen::Matrix3d t2_inv = Eigen::Matrix3d::Identity();
    t2_inv(0, 0) = t2_inv(1, 1) = 1.0 / s2;
    t2_inv(0, 2) = mean2.x();
    t2_inv(1, 2) = mean2.y();
    Eigen::Matrix<double, 3, 4> proj = t2_inv * conditioned * t3;

    // fix the projective sign so depths come out positive
    int positive = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double w =
            proj.row(2).head<3>().dot(points[i]) + proj(2, 3);
        if (w > 0)
            ++positive;
    }
    if (positive * 2 < n)
        proj = -proj;

    const Mat3 m = proj.leftCols<3>();
    const Eigen::JacobiSVD<Mat3> msvd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const double det_sign = (msvd.matrixU() * msvd.matrixV().transpose()).determinant();
    Mat3 correction = Mat3::Identity();
    correction(2, 2) = det_sign;
    const Mat3 rotation = msvd.matrixU() * correction * msvd.matrixV().transpose();
    const double scale = msvd.singularValues().mean();
    require(scale > 0.0, errc::degenerate_configuration, "DLT produced a singular projection");
    Pose pose(Quat(rotation), proj.col(3) / scale);

    // Gauss-Newton refinement on the plain (non-robust) reprojection error
    std::vector<ResolvedPoint> fixed(points.size());
    for (size_t i = 0; i < points.size(); ++i) {
        fixed[i].pixel = Vec2(intrinsics.fx * normalized[i].x() + intrinsics.cx,
                              intrinsics.fy * normalized[i].y() + intrinsics.cy);
        fixed[i].rest = points[i];
        fixed[i].jac.setZero(3, 0);
    }
    const DataTermState state{&fixed, &intrinsics, std::numeric_limits<double>::infinity()};
    const ShapeCoefficients no_coeffs(0);
    const auto refine = [&](Pose p, int iterations) {
        double current = data_term_value(state, p, no_coeffs);
        for (int iter = 0; iter < iterations; ++iter) {
            NormalEquations eq = accumulate(state, p, no_coeffs, Block::pose);
            eq.h.diagonal().array() += 1e-12;
            const Eigen::Matrix<double, 6, 1> delta = eq.h.ldlt().solve(eq.g);
            double alpha = 1.0;
            for (int bt = 0; bt < 8; ++bt) {
                const Pose candidate = pose_step(p, delta, alpha);
                const double value = data_term_value(state, candidate, no_coeffs);
                if (value < current) {
                    p = candidate;
                    current = value;
                    break;
                }
                alpha /= 2;
            }
        }
        return std::make_pair(p, current);
    };

    // noisy partial views can pull the DLT into a wrong heading; sweep a
    // ring of headings about the model's vertical axis and keep the best
    auto [refined, best_value] = refine(pose, 12);
    pose = refined;
    for (int h = 1; h < 8; ++h) {
        const Quat spun =
            (pose.rotation * Quat(Eigen::AngleAxisd(h * M_PI / 4.0, Vec3::UnitZ()))).normalized();
        const auto [candidate, value] = refine(Pose(spun, pose.translation), 12);
        if (value < best_value) {
            best_value = value;
            refined = candidate;
        }
    }
    pose = refined;

    positive = 0;
    for (const Vec3& p : points)
        if (pose.apply(p).z() > 0)
            ++positive;
    require(positive * 10 >= static_cast<int>(points.size()) * 9, errc::degenerate_configuration,
            "PnP left more than 10% of points behind the camera");
    return pose;
}

EnergyBreakdown energy(const std::vector<Correspondence>& correspondences,
                       const Image<std::uint8_t>& part_map_pred, const Pose& pose,
                       const ShapeCoefficients& coeffs, const PcaBasis& basis,
                       const CameraIntrinsics& intrinsics, const FitConfig& config) {
    config.validate();
    require(part_map_pred.width == intrinsics.width && part_map_pred.height == intrinsics.height,
            errc::dimension_mismatch, "part map size disagrees with intrinsics");
    require(coeffs.size() == basis.rank(), errc::length_mismatch, "coefficient length");

    const auto resolved = resolve(correspondences, basis);
    const DataTermState state{&resolved, &intrinsics, config.huber_delta};
    EnergyBreakdown result;
    result.data = data_term_value(state, pose, coeffs);
    const Mesh mesh = synthesize(basis, coeffs);
    result.silhouette = silhouette_term(mesh, pose, intrinsics, part_map_pred);
    const Eigen::MatrixXd q = smoothness_quadratic(basis);
    result.smoothness = coeffs.dot(q * coeffs);
    result.total = config.lambda_c * result.data + config.lambda_s * result.silhouette +
                   config.lambda_r * result.smoothness;
    return result;
}

DataTermGradient data_term_gradient(const std::vector<Correspondence>& correspondences,
                                    const Pose& pose, const ShapeCoefficients& coeffs,
                                    const PcaBasis& basis, const CameraIntrinsics& intrinsics,
                                    const FitConfig& config) {
    const auto resolved = resolve(correspondences, basis);
    const DataTermState state{&resolved, &intrinsics, config.huber_delta};
    DataTermGradient out;
    out.pose = accumulate(state, pose, coeffs, Block::pose).gradient;
    out.coeffs = accumulate(state, pose, coeffs, Block::coeffs).gradient;
    return out;
}

FitResult fit(const std::vector<Correspondence>& correspondences,
              const Image<std::uint8_t>& part_map_pred, const PcaBasis& basis,
              const VehicleTypePrior& prior, const CameraIntrinsics& intrinsics,
              const FitConfig& config, std::optional<Pose> init) {
    config.validate();
    require(part_map_pred.width == intrinsics.width && part_map_pred.height == intrinsics.height,
            errc::dimension_mismatch, "part map size disagrees with intrinsics");
    require(prior.mean_coeffs.size() == basis.rank(), errc::length_mismatch,
            "prior coefficients do not match basis rank");
    require(!correspondences.empty(), errc::empty_correspondences, "no correspondences to fit");

    const auto resolved = resolve(correspondences, basis);
    require(!resolved.empty(), errc::empty_correspondences,
            "no correspondence could be located on the atlas");
    const DataTermState state{&resolved, &intrinsics, config.huber_delta};
    const Eigen::MatrixXd q = smoothness_quadratic(basis);

    FitResult result;
    result.pose = init ? *init : init_pose_pnp(correspondences, basis, prior, intrinsics);
    result.coeffs = prior.mean_coeffs;

    const auto total_energy = [&](const Pose& pose, const ShapeCoefficients& s) {
        EnergyBreakdown e;
        e.data = data_term_value(state, pose, s);
        e.silhouette = silhouette_term(synthesize(basis, s), pose, intrinsics, part_map_pred);
        e.smoothness = s.dot(q * s);
        e.total = config.lambda_c * e.data + config.lambda_s * e.silhouette +
                  config.lambda_r * e.smoothness;
        return e;
    };

    EnergyBreakdown current = total_energy(result.pose, result.coeffs);
    result.energy_trace.push_back(current);

    for (int outer = 0; outer < config.max_outer; ++outer) {
        // inner steps anneal the robust loss (wide basin first) while the
        // outer acceptance below always tests the configured energy
        DataTermState step_state = state;
        if (outer < 3 && std::isfinite(config.huber_delta))
            step_state.huber_delta = config.huber_delta * static_cast<double>(8 >> outer);

        // step 1: rigid alignment, pose only, data term only
        Pose pose_new = result.pose;
        if (config.lambda_c > 0.0) {
            double value = data_term_value(step_state, pose_new, result.coeffs);
            for (int iter = 0; iter < config.pose_iters; ++iter) {
                NormalEquations eq = accumulate(step_state, pose_new, result.coeffs, Block::pose);
                eq.h.diagonal().array() += 1e-12;
                const Eigen::Matrix<double, 6, 1> delta = eq.h.ldlt().solve(eq.g);
                double alpha = 1.0;
                for (int bt = 0; bt < 8; ++bt) {
                    const Pose candidate = pose_step(pose_new, delta, alpha);
                    const double v = data_term_value(step_state, candidate, result.coeffs);
                    if (v < value) {
                        pose_new = candidate;
                        value = v;
                        break;
                    }
                    alpha /= 2;
                }
            }
        }

        // step 2: deformable alignment, coefficients only, data + smoothness
        ShapeCoefficients coeffs_new = result.coeffs;
        {
            const auto smooth_value = [&](const ShapeCoefficients& s) {
                return config.lambda_c * data_term_value(step_state, pose_new, s) +
                       config.lambda_r * s.dot(q * s);
            };
            double value = smooth_value(coeffs_new);
            for (int iter = 0; iter < config.shape_iters; ++iter) {
                NormalEquations eq = accumulate(step_state, pose_new, coeffs_new, Block::coeffs);
                Eigen::MatrixXd h = config.lambda_c * eq.h + config.lambda_r * q;
                h.diagonal().array() += 1e-12;
                const Eigen::VectorXd rhs =
                    config.lambda_c * eq.g - config.lambda_r * (q * coeffs_new);
                const Eigen::VectorXd delta = h.ldlt().solve(rhs);
                double alpha = 1.0;
                for (int bt = 0; bt < 8; ++bt) {
                    ShapeCoefficients candidate = coeffs_new + alpha * delta;
                    candidate = candidate.cwiseMax(-config.coeff_bound).cwiseMin(config.coeff_bound);
                    const double v = smooth_value(candidate);
                    if (v < value) {
                        coeffs_new = candidate;
                        value = v;
                        break;
                    }
                    alpha /= 2;
                }
            }
        }

        // accept only if the full energy decreased; overrelaxed candidates
        // first (they speed up the narrow pose/shape valley), then the plain
        // step, then halvings
        const Eigen::Matrix<double, 6, 1> pose_delta = pose_log(result.pose, pose_new);
        const ShapeCoefficients coeff_delta = coeffs_new - result.coeffs;
        bool accepted = false;
        for (double alpha :
             {4.0, 2.0, 1.0, 0.5, 0.25, 0.125, 1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128, 1.0 / 256}) {
            const Pose candidate_pose = pose_step(result.pose, pose_delta, alpha);
            ShapeCoefficients candidate_coeffs = result.coeffs + alpha * coeff_delta;
            candidate_coeffs =
                candidate_coeffs.cwiseMax(-config.coeff_bound).cwiseMin(config.coeff_bound);
            const EnergyBreakdown candidate = total_energy(candidate_pose, candidate_coeffs);
            if (candidate.total < current.total) {
                const double decrease = current.total - candidate.total;
                result.pose = candidate_pose;
                result.coeffs = candidate_coeffs;
                current = candidate;
                result.energy_trace.push_back(current);
                accepted = true;
                if (decrease < config.tol * std::max(current.total, 1e-12))
                    result.converged = true;
                break;
            }
        }
        if (!accepted) {
            result.converged = true; // no descent direction left at this scale
            break;
        }
        if (result.converged)
            break;
    }

    result.mesh = synthesize(basis, result.coeffs);

    // final inlier census at the fitted state
    const Mat3 rot = result.pose.rotation_matrix();
    for (const ResolvedPoint& rp : resolved) {
        const Vec3 p = rot * (rp.rest + rp.jac * result.coeffs) + result.pose.translation;
        if (p.z() <= kMinDepth)
            continue;
        const Vec2 projected(intrinsics.fx * p.x() / p.z() + intrinsics.cx,
                             intrinsics.fy * p.y() / p.z() + intrinsics.cy);
        if ((rp.pixel - projected).norm() <= config.huber_delta)
            ++result.inlier_count;
    }

    if (prior.dims.minCoeff() > 0.0) {
        const auto [lo, hi] = result.mesh.bounding_box();
        const Vec3 extents = hi - lo;
        // canonical frame: x length, y width, z height
        const Vec3 fitted(extents.y(), extents.z(), extents.x());
        for (int axis = 0; axis < 3; ++axis)
            if (std::abs(fitted[axis] - prior.dims[axis]) > 0.25 * prior.dims[axis])
                result.dims_within_prior = false;
    }
    return result;
}

} // namespace carfit
