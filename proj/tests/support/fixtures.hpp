#pragma once

#include <filesystem>
#include <string>

#include "carfit/mesh.hpp"
#include "carfit/renderer.hpp"

namespace carfit::testing {

/// Unique scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path file(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

/// Axis-aligned box with all faces in one part and a trivial atlas placed in
/// that part's cell.
Mesh make_box(const Vec3& lo, const Vec3& hi, int part = 0);

/// Unit cube centered at the origin, part 0.
Mesh make_cube(double half = 0.5);

/// Rectangular bar subdivided nx*ny*nz, single part, welded grid; used by
/// the deformation tests.
Mesh make_bar(const Vec3& size, int nx, int ny, int nz);

/// Regular tetrahedron with edge length `edge`.
Mesh make_tetrahedron(double edge = 1.0);

/// Camera-to-model base rotation placing the canonical vehicle frame
/// (x fwd, y left, z up) into the camera frame (x right, y down, z fwd).
Quat camera_base_rotation();

/// Vehicle pose at `depth` meters with the given heading.
Pose vehicle_pose(double yaw, double lateral, double depth, double camera_height = 1.4);

const char* cube_obj_text();

} // namespace carfit::testing
