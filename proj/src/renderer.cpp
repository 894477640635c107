#include "carfit/renderer.hpp"

#include <algorithm>
#include <cmath>

namespace carfit {

namespace {

constexpr double kNearPlane = 1e-6;
constexpr double kDepthTie = 1e-9;

struct ClipVertex {
    Vec3 cam;
    Vec2 uv;
};

// Clip a camera-space triangle against z >= kNearPlane. Emits 0, 1 or 2
// triangles into `out`.
int clip_near(const ClipVertex in[3], ClipVertex out[2][3]) {
    ClipVertex poly[4];
    int count = 0;
    for (int i = 0; i < 3; ++i) {
        const ClipVertex& a = in[i];
        const ClipVertex& b = in[(i + 1) % 3];
        const bool a_in = a.cam.z() >= kNearPlane;
        const bool b_in = b.cam.z() >= kNearPlane;
        if (a_in)
            poly[count++] = a;
        if (a_in != b_in) {
            const double t = (kNearPlane - a.cam.z()) / (b.cam.z() - a.cam.z());
            poly[count++] = ClipVertex{a.cam + t * (b.cam - a.cam), a.uv + t * (b.uv - a.uv)};
        }
    }
    if (count < 3)
        return 0;
    out[0][0] = poly[0];
    out[0][1] = poly[1];
    out[0][2] = poly[2];
    if (count == 3)
        return 1;
    out[1][0] = poly[0];
    out[1][1] = poly[2];
    out[1][2] = poly[3];
    return 2;
}

// One side of the top-left fill rule: accepts an on-edge pixel for exactly
// one of the two triangles sharing the edge.
bool edge_accepts_zero(const Vec2& dir) {
    return dir.y() > 0.0 || (dir.y() == 0.0 && dir.x() < 0.0);
}

struct PixelState {
    double depth;
    std::int32_t instance;
    std::uint32_t face;
};

} // namespace

void Scene::add_instance(Mesh mesh, const Pose& pose, int id) {
    for (const auto& inst : instances)
        require(inst.id != id, errc::invalid_argument,
                "duplicate instance id " + std::to_string(id));
    instances.push_back(SceneInstance{std::move(mesh), pose, id});
}

void Scene::add_instance(const PcaBasis& basis, const ShapeCoefficients& coeffs, const Pose& pose,
                         int id) {
    add_instance(synthesize(basis, coeffs), pose, id);
}

std::pair<Vec2, double> project_point(const CameraIntrinsics& intrinsics, const Pose& pose,
                                      const Vec3& point) {
    const Vec3 p = pose.apply(point);
    require(p.z() > 0.0, errc::behind_camera,
            "point projects to depth " + std::to_string(p.z()));
    return {Vec2(intrinsics.fx * p.x() / p.z() + intrinsics.cx,
                 intrinsics.fy * p.y() / p.z() + intrinsics.cy),
            p.z()};
}

LabelMaps rasterize(const Scene& scene) {
    const CameraIntrinsics& k = scene.intrinsics;
    require(k.width >= 1 && k.height >= 1, errc::zero_area_image, "render target has no pixels");

    LabelMaps maps;
    maps.instance_map = Image<std::int32_t>(k.width, k.height, kBackgroundInstance);
    maps.part_map = Image<std::uint8_t>(k.width, k.height, kBackgroundPart);
    maps.depth_map = DepthImage(k.width, k.height, kDepthBackground);
    maps.u_map = Image<float>(k.width, k.height, 0.0f);
    maps.v_map = Image<float>(k.width, k.height, 0.0f);

    std::vector<PixelState> state(static_cast<size_t>(k.width) * k.height,
                                  PixelState{std::numeric_limits<double>::infinity(),
                                             kBackgroundInstance, 0});

    for (const SceneInstance& instance : scene.instances) {
        std::vector<Vec3> cam(instance.mesh.vertex_count());
        const Mat3 rot = instance.pose.rotation_matrix();
        for (size_t i = 0; i < cam.size(); ++i)
            cam[i] = rot * instance.mesh.vertices[i] + instance.pose.translation;

        for (std::uint32_t fi = 0; fi < instance.mesh.face_count(); ++fi) {
            const auto& face = instance.mesh.faces[fi];
            ClipVertex tri[3];
            for (int c = 0; c < 3; ++c)
                tri[c] = ClipVertex{cam[face[c]], instance.mesh.corner_uv[fi][c]};
            ClipVertex clipped[2][3];
            const int n_tris = clip_near(tri, clipped);

            for (int t = 0; t < n_tris; ++t) {
                Vec2 screen[3];
                double inv_z[3];
                Vec2 uv_over_z[3];
                for (int c = 0; c < 3; ++c) {
                    const Vec3& p = clipped[t][c].cam;
                    screen[c] = Vec2(k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy);
                    inv_z[c] = 1.0 / p.z();
                    uv_over_z[c] = clipped[t][c].uv * inv_z[c];
                }
                double area2 = (screen[1].x() - screen[0].x()) * (screen[2].y() - screen[0].y()) -
                               (screen[1].y() - screen[0].y()) * (screen[2].x() - screen[0].x());
                if (area2 == 0.0)
                    continue;
                if (area2 < 0.0) {
                    std::swap(screen[1], screen[2]);
                    std::swap(inv_z[1], inv_z[2]);
                    std::swap(uv_over_z[1], uv_over_z[2]);
                    area2 = -area2;
                }

                const int x0 = std::max(0, static_cast<int>(std::floor(
                                               std::min({screen[0].x(), screen[1].x(), screen[2].x()}) - 0.5)));
                const int x1 = std::min(k.width - 1,
                                        static_cast<int>(std::ceil(
                                            std::max({screen[0].x(), screen[1].x(), screen[2].x()}) + 0.5)));
                const int y0 = std::max(0, static_cast<int>(std::floor(
                                               std::min({screen[0].y(), screen[1].y(), screen[2].y()}) - 0.5)));
                const int y1 = std::min(k.height - 1,
                                        static_cast<int>(std::ceil(
                                            std::max({screen[0].y(), screen[1].y(), screen[2].y()}) + 0.5)));

                for (int y = y0; y <= y1; ++y) {
                    for (int x = x0; x <= x1; ++x) {
                        const Vec2 p(x + 0.5, y + 0.5);
                        bool inside = true;
                        double w[3];
                        for (int e = 0; e < 3 && inside; ++e) {
                            const Vec2& a = screen[e];
                            const Vec2& b = screen[(e + 1) % 3];
                            // w[e] pairs with the vertex opposite edge (e, e+1)
                            const double value = (b.x() - a.x()) * (p.y() - a.y()) -
                                                 (b.y() - a.y()) * (p.x() - a.x());
                            if (value < 0.0 || (value == 0.0 && !edge_accepts_zero(b - a)))
                                inside = false;
                            w[(e + 2) % 3] = value;
                        }
                        if (!inside)
                            continue;
                        const double l0 = w[0] / area2, l1 = w[1] / area2, l2 = w[2] / area2;
                        const double izp = l0 * inv_z[0] + l1 * inv_z[1] + l2 * inv_z[2];
                        const double depth = 1.0 / izp;

                        PixelState& best = state[static_cast<size_t>(y) * k.width + x];
                        bool take = false;
                        if (depth < best.depth - kDepthTie) {
                            take = true;
                        } else if (depth <= best.depth + kDepthTie) {
                            if (instance.id < best.instance ||
                                (instance.id == best.instance && fi < best.face))
                                take = true;
                        }
                        if (!take)
                            continue;
                        best = PixelState{depth, instance.id, fi};
                        const Vec2 uv =
                            (l0 * uv_over_z[0] + l1 * uv_over_z[1] + l2 * uv_over_z[2]) / izp;
                        maps.instance_map.at(x, y) = instance.id;
                        maps.part_map.at(x, y) =
                            static_cast<std::uint8_t>(instance.mesh.face_part[fi].value());
                        maps.depth_map.at(x, y) = static_cast<float>(depth);
                        maps.u_map.at(x, y) = static_cast<float>(uv.x());
                        maps.v_map.at(x, y) = static_cast<float>(uv.y());
                    }
                }
            }
        }
    }
    return maps;
}

Image<std::uint8_t> render_part_silhouette(const Mesh& mesh, const Pose& pose,
                                           const CameraIntrinsics& intrinsics) {
    Scene scene(intrinsics);
    scene.add_instance(mesh, pose, 0);
    return rasterize(scene).part_map;
}

namespace {

Rgb sample_bilinear(const RgbImage& image, double u, double v) {
    // u, v in [0,1]; texel centers at (i+0.5)/N
    const double x = std::clamp(u, 0.0, 1.0) * image.width - 0.5;
    const double y = std::clamp(v, 0.0, 1.0) * image.height - 0.5;
    const int x0 = std::clamp(static_cast<int>(std::floor(x)), 0, image.width - 1);
    const int y0 = std::clamp(static_cast<int>(std::floor(y)), 0, image.height - 1);
    const int x1 = std::min(x0 + 1, image.width - 1);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double fx = std::clamp(x - x0, 0.0, 1.0);
    const double fy = std::clamp(y - y0, 0.0, 1.0);
    const Rgb top = image.at(x0, y0) * (1 - fx) + image.at(x1, y0) * fx;
    const Rgb bot = image.at(x0, y1) * (1 - fx) + image.at(x1, y1) * fx;
    return top * (1 - fy) + bot * fy;
}

} // namespace

RgbImage render_color(const Scene& scene, const std::vector<RgbImage>& textures,
                      const Rgb& background) {
    require(textures.size() == scene.instances.size(), errc::length_mismatch,
            "one texture per instance required");
    const LabelMaps maps = rasterize(scene);
    RgbImage image(maps.instance_map.width, maps.instance_map.height, background);
    std::vector<int> slot_of_id;
    for (size_t s = 0; s < scene.instances.size(); ++s) {
        const int id = scene.instances[s].id;
        if (id >= static_cast<int>(slot_of_id.size()))
            slot_of_id.resize(id + 1, -1);
        slot_of_id[id] = static_cast<int>(s);
    }
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x) {
            const std::int32_t id = maps.instance_map.at(x, y);
            if (id == kBackgroundInstance)
                continue;
            const RgbImage& texture = textures[slot_of_id[id]];
            image.at(x, y) =
                sample_bilinear(texture, maps.u_map.at(x, y), maps.v_map.at(x, y));
        }
    return image;
}

RgbImage blend_overlay(const RgbImage& base, const Scene& scene,
                       const std::vector<RgbImage>& textures, double alpha) {
    const LabelMaps maps = rasterize(scene);
    const RgbImage rendered = render_color(scene, textures);
    RgbImage out = base;
    for (int y = 0; y < out.height && y < rendered.height; ++y)
        for (int x = 0; x < out.width && x < rendered.width; ++x)
            if (maps.instance_map.at(x, y) != kBackgroundInstance)
                out.at(x, y) = out.at(x, y) * (1 - alpha) + rendered.at(x, y) * alpha;
    return out;
}

GrayImage encode_instance_map(const Image<std::int32_t>& instance_map) {
    GrayImage out(instance_map.width, instance_map.height, 255);
    for (size_t i = 0; i < instance_map.size(); ++i) {
        const std::int32_t id = instance_map.pixels[i];
        if (id == kBackgroundInstance)
            continue;
        require(id >= 0 && id < 255, errc::invalid_argument,
                "instance id " + std::to_string(id) + " not encodable in 8-bit map");
        out.pixels[i] = static_cast<std::uint8_t>(id);
    }
    return out;
}

GrayImage encode_part_map(const Image<std::uint8_t>& part_map) {
    GrayImage out = part_map;
    for (auto& v : out.pixels)
        if (v == kBackgroundPart)
            v = 255;
    return out;
}

Gray16Image encode_unit_map(const Image<float>& map) {
    Gray16Image out(map.width, map.height, 0);
    for (size_t i = 0; i < map.size(); ++i)
        out.pixels[i] = static_cast<std::uint16_t>(
            std::clamp(static_cast<double>(map.pixels[i]), 0.0, 1.0) * 65535.0 + 0.5);
    return out;
}

void write_label_maps(const std::filesystem::path& directory, const std::string& stem,
                      const LabelMaps& maps) {
    std::filesystem::create_directories(directory);
    write_pgm(directory / (stem + "_instance.pgm"), encode_instance_map(maps.instance_map));
    write_pgm(directory / (stem + "_part.pgm"), encode_part_map(maps.part_map));
    write_depth_raw(directory / (stem + "_depth.raw"), maps.depth_map);
    write_pgm16(directory / (stem + "_u.pgm"), encode_unit_map(maps.u_map));
    write_pgm16(directory / (stem + "_v.pgm"), encode_unit_map(maps.v_map));
}

} // namespace carfit
