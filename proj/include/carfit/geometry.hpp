#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "carfit/errors.hpp"

namespace carfit {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

/// Rigid transform from model frame to camera frame. The rotation is kept a
/// unit quaternion; every constructor and update renormalizes.
struct Pose {
    Quat rotation = Quat::Identity();
    Vec3 translation = Vec3::Zero();

    Pose() = default;
    Pose(const Quat& q, const Vec3& t) : rotation(q.normalized()), translation(t) {}

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

    Pose inverse() const {
        const Quat qi = rotation.conjugate();
        return Pose(qi, -(qi * translation));
    }

    /// this ∘ other: applies `other` first.
    Pose compose(const Pose& other) const {
        return Pose(rotation * other.rotation, rotation * other.translation + translation);
    }

    Mat3 rotation_matrix() const { return rotation.toRotationMatrix(); }

    /// Right-multiplied tangent update: R <- R * exp([omega]x), t <- t + dt.
    void update(const Eigen::Vector3d& omega, const Eigen::Vector3d& dt) {
        const double angle = omega.norm();
        Quat dq = Quat::Identity();
        if (angle > 0.0)
            dq = Quat(Eigen::AngleAxisd(angle, omega / angle));
        rotation = (rotation * dq).normalized();
        translation += dt;
    }
};

/// Angle between two rotations in radians: 2 acos(|<q1,q2>|).
inline double rotation_angle(const Quat& a, const Quat& b) {
    double d = std::abs(a.coeffs().dot(b.coeffs()));
    d = std::min(d, 1.0);
    return 2.0 * std::acos(d);
}

struct CameraIntrinsics {
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 0;
    int height = 0;

    CameraIntrinsics() = default;
    CameraIntrinsics(double fx_, double fy_, double cx_, double cy_, int w, int h)
        : fx(fx_), fy(fy_), cx(cx_), cy(cy_), width(w), height(h) {
        require(fx > 0.0 && fy > 0.0, errc::invalid_argument, "focal lengths must be positive");
        require(w >= 1 && h >= 1, errc::invalid_argument, "image dimensions must be >= 1");
    }
};

/// Mirror plane n.x = offset with unit normal.
struct SymmetryPlane {
    Vec3 normal = Vec3::UnitY();
    double offset = 0.0;

    SymmetryPlane() = default;
    SymmetryPlane(const Vec3& n, double d) : normal(n.normalized()), offset(d) {
        require(n.norm() > 0.0, errc::invalid_argument, "plane normal must be nonzero");
    }

    Vec3 reflect(const Vec3& p) const { return p - 2.0 * (normal.dot(p) - offset) * normal; }

    double signed_distance(const Vec3& p) const { return normal.dot(p) - offset; }
};

/// Rotation + translation + isotropic scale (Umeyama-style alignment result).
struct SimilarityTransform {
    Quat rotation = Quat::Identity();
    Vec3 translation = Vec3::Zero();
    double scale = 1.0;

    SimilarityTransform() = default;
    SimilarityTransform(const Quat& q, const Vec3& t, double s)
        : rotation(q.normalized()), translation(t), scale(s) {
        require(s > 0.0, errc::invalid_argument, "scale must be positive");
    }

    Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }

    SimilarityTransform inverse() const {
        const Quat qi = rotation.conjugate();
        return SimilarityTransform(qi, qi * translation * (-1.0 / scale), 1.0 / scale);
    }

    SimilarityTransform compose(const SimilarityTransform& other) const {
        // this ∘ other
        return SimilarityTransform(rotation * other.rotation,
                                   scale * (rotation * other.translation) + translation,
                                   scale * other.scale);
    }
};

} // namespace carfit
