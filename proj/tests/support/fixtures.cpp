#include "fixtures.hpp"

#include <atomic>

#include "carfit/synthetic.hpp"

namespace carfit::testing {

namespace {
std::atomic<int> temp_counter{0};
}

TempDir::TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("carfit_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(temp_counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

Mesh make_box(const Vec3& lo, const Vec3& hi, int part) {
    Mesh mesh;
    for (int corner = 0; corner < 8; ++corner)
        mesh.vertices.emplace_back(corner & 1 ? hi.x() : lo.x(), corner & 2 ? hi.y() : lo.y(),
                                   corner & 4 ? hi.z() : lo.z());
    const int quads[6][4] = {{0, 1, 3, 2}, {4, 6, 7, 5}, {0, 4, 5, 1},
                             {2, 3, 7, 6}, {0, 2, 6, 4}, {1, 5, 7, 3}};
    const auto [alo, ahi] = atlas_cell(PartId(part));
    // six face quads side by side in a 3x2 grid of the cell
    for (int f = 0; f < 6; ++f) {
        const int col = f % 3, row = f / 3;
        const Vec2 cell(ahi.x() - alo.x(), ahi.y() - alo.y());
        const Vec2 q0(alo.x() + col * cell.x() / 3, alo.y() + row * cell.y() / 2);
        const Vec2 q1 = q0 + Vec2(cell.x() / 3 * 0.9, cell.y() / 2 * 0.9);
        const Vec2 uv[4] = {q0, Vec2(q1.x(), q0.y()), q1, Vec2(q0.x(), q1.y())};
        const auto add = [&](int a, int b, int c, const Vec2& ua, const Vec2& ub, const Vec2& uc) {
            mesh.faces.push_back({static_cast<std::uint32_t>(quads[f][a]),
                                  static_cast<std::uint32_t>(quads[f][b]),
                                  static_cast<std::uint32_t>(quads[f][c])});
            mesh.face_part.push_back(PartId(part));
            mesh.corner_uv.push_back({ua, ub, uc});
        };
        add(0, 1, 2, uv[0], uv[1], uv[2]);
        add(0, 2, 3, uv[0], uv[2], uv[3]);
    }
    mesh.validate();
    return mesh;
}

Mesh make_cube(double half) { return make_box(Vec3(-half, -half, -half), Vec3(half, half, half)); }

Mesh make_bar(const Vec3& size, int nx, int ny, int nz) {
    // grid of vertices on the bar surface only would complicate welding;
    // a full solid grid is fine for deformation tests
    Mesh mesh;
    const auto vid = [&](int x, int y, int z) {
        return static_cast<std::uint32_t>((z * (ny + 1) + y) * (nx + 1) + x);
    };
    for (int z = 0; z <= nz; ++z)
        for (int y = 0; y <= ny; ++y)
            for (int x = 0; x <= nx; ++x)
                mesh.vertices.emplace_back(size.x() * x / nx - size.x() / 2,
                                           size.y() * y / ny - size.y() / 2,
                                           size.z() * z / nz - size.z() / 2);
    const auto [alo, ahi] = atlas_cell(PartId(0));
    const Vec2 span = ahi - alo;
    const auto uv_of = [&](int x, int y, int z) {
        // an injective-enough chart for the atlas check: spread by x and y+z
        const double u = static_cast<double>(x) / (nx + 1) +
                         static_cast<double>(z) / ((nx + 1) * (nz + 1) * 2);
        const double v = static_cast<double>(y) / (ny + 1) +
                         static_cast<double>(z) / ((ny + 1) * (nz + 1) * 2);
        return Vec2(alo.x() + span.x() * u, alo.y() + span.y() * v);
    };
    const auto add_quad = [&](std::array<std::array<int, 3>, 4> corners) {
        const auto add = [&](const std::array<int, 3>& a, const std::array<int, 3>& b,
                             const std::array<int, 3>& c) {
            mesh.faces.push_back({vid(a[0], a[1], a[2]), vid(b[0], b[1], b[2]),
                                  vid(c[0], c[1], c[2])});
            mesh.face_part.push_back(PartId(0));
            mesh.corner_uv.push_back(
                {uv_of(a[0], a[1], a[2]), uv_of(b[0], b[1], b[2]), uv_of(c[0], c[1], c[2])});
        };
        add(corners[0], corners[1], corners[2]);
        add(corners[0], corners[2], corners[3]);
    };
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
                // only surface quads; interior cells contribute nothing
                if (x == 0)
                    add_quad({{{x, y, z}, {x, y + 1, z}, {x, y + 1, z + 1}, {x, y, z + 1}}});
                if (x == nx - 1)
                    add_quad({{{x + 1, y, z}, {x + 1, y, z + 1}, {x + 1, y + 1, z + 1},
                               {x + 1, y + 1, z}}});
                if (y == 0)
                    add_quad({{{x, y, z}, {x, y, z + 1}, {x + 1, y, z + 1}, {x + 1, y, z}}});
                if (y == ny - 1)
                    add_quad({{{x, y + 1, z}, {x + 1, y + 1, z}, {x + 1, y + 1, z + 1},
                               {x, y + 1, z + 1}}});
                if (z == 0)
                    add_quad({{{x, y, z}, {x + 1, y, z}, {x + 1, y + 1, z}, {x, y + 1, z}}});
                if (z == nz - 1)
                    add_quad({{{x, y, z + 1}, {x, y + 1, z + 1}, {x + 1, y + 1, z + 1},
                               {x + 1, y, z + 1}}});
            }
    // drop unused interior vertices to keep mesh_gradient happy
    std::vector<std::uint32_t> remap(mesh.vertices.size(), 0);
    std::vector<char> used(mesh.vertices.size(), 0);
    for (const auto& f : mesh.faces)
        for (int c = 0; c < 3; ++c)
            used[f[c]] = 1;
    std::vector<Vec3> kept;
    for (size_t i = 0; i < mesh.vertices.size(); ++i)
        if (used[i]) {
            remap[i] = static_cast<std::uint32_t>(kept.size());
            kept.push_back(mesh.vertices[i]);
        }
    for (auto& f : mesh.faces)
        for (int c = 0; c < 3; ++c)
            f[c] = remap[f[c]];
    mesh.vertices = std::move(kept);
    mesh.validate();
    return mesh;
}

Mesh make_tetrahedron(double edge) {
    Mesh mesh;
    const double a = edge / std::sqrt(2.0);
    mesh.vertices = {Vec3(a, a, a) / 2, Vec3(a, -a, -a) / 2, Vec3(-a, a, -a) / 2,
                     Vec3(-a, -a, a) / 2};
    const auto [alo, ahi] = atlas_cell(PartId(0));
    const Vec2 span = ahi - alo;
    const int faces[4][3] = {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}};
    for (int f = 0; f < 4; ++f) {
        mesh.faces.push_back({static_cast<std::uint32_t>(faces[f][0]),
                              static_cast<std::uint32_t>(faces[f][1]),
                              static_cast<std::uint32_t>(faces[f][2])});
        mesh.face_part.push_back(PartId(0));
        const int col = f % 2, row = f / 2;
        const Vec2 base(alo.x() + col * span.x() / 2, alo.y() + row * span.y() / 2);
        mesh.corner_uv.push_back({base, base + Vec2(span.x() * 0.4, 0.0),
                                  base + Vec2(0.0, span.y() * 0.4)});
    }
    mesh.validate();
    return mesh;
}

Quat camera_base_rotation() {
    Mat3 base;
    base << 0, -1, 0, 0, 0, -1, 1, 0, 0;
    return Quat(base);
}

Pose vehicle_pose(double yaw, double lateral, double depth, double camera_height) {
    const Quat q =
        (camera_base_rotation() * Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ()))).normalized();
    return Pose(q, Vec3(lateral, camera_height, depth));
}

const char* cube_obj_text() {
    return "v -0.5 -0.5 -0.5\n"
           "v 0.5 -0.5 -0.5\n"
           "v -0.5 0.5 -0.5\n"
           "v 0.5 0.5 -0.5\n"
           "v -0.5 -0.5 0.5\n"
           "v 0.5 -0.5 0.5\n"
           "v -0.5 0.5 0.5\n"
           "v 0.5 0.5 0.5\n"
           "vt 0.02 0.03\n"
           "vt 0.05 0.03\n"
           "vt 0.05 0.06\n"
           "vt 0.02 0.06\n"
           "g part_00\n"
           "f 1/1 2/2 4/3\n"
           "f 1/1 4/3 3/4\n"
           "f 5/1 8/3 6/2\n"
           "f 5/1 7/4 8/3\n"
           "f 1/1 6/3 2/2\n"
           "f 1/1 5/4 6/3\n"
           "f 3/1 4/2 8/3\n"
           "f 3/1 8/3 7/4\n"
           "f 1/1 3/2 7/3\n"
           "f 1/1 7/3 5/4\n"
           "f 2/1 8/3 4/2\n"
           "f 2/1 6/4 8/3\n";
}

} // namespace carfit::testing
