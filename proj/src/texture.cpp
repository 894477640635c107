#include "carfit/texture.hpp"

#include <algorithm>
#include <queue>

#include <Eigen/Sparse>
#include <Eigen/IterativeLinearSolvers>

#include "carfit/point_grid.hpp"

namespace carfit {

namespace {

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Per-texel barycentric location on the mesh, rasterized from the UV
// triangles; parallel arrays indexed like the atlas image.
struct DomainMap {
    int resolution = 0;
    Image<std::int8_t> part;       // -1 outside all domains
    std::vector<std::uint32_t> face;
    std::vector<Vec3> barycentric;

    size_t index(int x, int y) const { return static_cast<size_t>(y) * resolution + x; }
};

DomainMap rasterize_domains(const Mesh& mesh, int resolution) {
    require(resolution >= 1, errc::invalid_argument, "atlas resolution must be >= 1");
    DomainMap map;
    map.resolution = resolution;
    map.part = Image<std::int8_t>(resolution, resolution, -1);
    map.face.assign(static_cast<size_t>(resolution) * resolution, 0);
    map.barycentric.assign(static_cast<size_t>(resolution) * resolution, Vec3::Zero());

    for (std::uint32_t fi = 0; fi < mesh.face_count(); ++fi) {
        const auto& uv = mesh.corner_uv[fi];
        const double lo_u = std::min({uv[0].x(), uv[1].x(), uv[2].x()});
        const double hi_u = std::max({uv[0].x(), uv[1].x(), uv[2].x()});
        const double lo_v = std::min({uv[0].y(), uv[1].y(), uv[2].y()});
        const double hi_v = std::max({uv[0].y(), uv[1].y(), uv[2].y()});
        const int x0 = std::max(0, static_cast<int>(std::floor(lo_u * resolution - 0.5)));
        const int x1 = std::min(resolution - 1, static_cast<int>(std::ceil(hi_u * resolution)));
        const int y0 = std::max(0, static_cast<int>(std::floor(lo_v * resolution - 0.5)));
        const int y1 = std::min(resolution - 1, static_cast<int>(std::ceil(hi_v * resolution)));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                if (map.part.at(x, y) >= 0)
                    continue; // first face keeps the texel
                const Vec2 p((x + 0.5) / resolution, (y + 0.5) / resolution);
                const Vec3 w(cross2(uv[1] - p, uv[2] - p), cross2(uv[2] - p, uv[0] - p),
                             cross2(uv[0] - p, uv[1] - p));
                const double sum = w.sum();
                if (sum == 0.0)
                    continue;
                const Vec3 bary = w / sum;
                if (bary.minCoeff() < 0.0)
                    continue;
                map.part.at(x, y) = static_cast<std::int8_t>(mesh.face_part[fi].value());
                map.face[map.index(x, y)] = fi;
                map.barycentric[map.index(x, y)] = bary;
            }
    }
    return map;
}

Vec3 texel_surface_point(const Mesh& mesh, const DomainMap& map, int x, int y) {
    const size_t i = map.index(x, y);
    const auto& face = mesh.faces[map.face[i]];
    const Vec3& b = map.barycentric[i];
    return b[0] * mesh.vertices[face[0]] + b[1] * mesh.vertices[face[1]] +
           b[2] * mesh.vertices[face[2]];
}

// Mean surface extent of one texel, for symmetric-lookup tolerances.
double texel_world_size(const Mesh& mesh, int resolution) {
    double ratio_sum = 0.0;
    size_t counted = 0;
    for (std::uint32_t fi = 0; fi < mesh.face_count(); ++fi) {
        const auto& f = mesh.faces[fi];
        const auto& uv = mesh.corner_uv[fi];
        const double area3 =
            0.5 * ((mesh.vertices[f[1]] - mesh.vertices[f[0]]))
                      .cross(mesh.vertices[f[2]] - mesh.vertices[f[0]])
                      .norm();
        const double area2 = 0.5 * std::abs(cross2(uv[1] - uv[0], uv[2] - uv[0]));
        if (area2 > 1e-16) {
            ratio_sum += std::sqrt(area3 / area2);
            ++counted;
        }
    }
    const double ratio = counted > 0 ? ratio_sum / counted : 1.0;
    return ratio / resolution;
}

Rgb sample_image_bilinear(const RgbImage& image, const Vec2& pixel) {
    const double x = std::clamp(pixel.x() - 0.5, 0.0, static_cast<double>(image.width - 1));
    const double y = std::clamp(pixel.y() - 0.5, 0.0, static_cast<double>(image.height - 1));
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const int x1 = std::min(x0 + 1, image.width - 1);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double fx = x - x0, fy = y - y0;
    const Rgb top = image.at(x0, y0) * (1 - fx) + image.at(x1, y0) * fx;
    const Rgb bot = image.at(x0, y1) * (1 - fx) + image.at(x1, y1) * fx;
    return top * (1 - fy) + bot * fy;
}

} // namespace

PriorGradientField finite_difference_gradients(const RgbImage& texture) {
    PriorGradientField field;
    field.grad_x = Image<Rgb>(texture.width, texture.height, Rgb());
    field.grad_y = Image<Rgb>(texture.width, texture.height, Rgb());
    for (int y = 0; y < texture.height; ++y)
        for (int x = 0; x < texture.width; ++x) {
            if (x + 1 < texture.width)
                field.grad_x.at(x, y) = texture.at(x + 1, y) - texture.at(x, y);
            if (y + 1 < texture.height)
                field.grad_y.at(x, y) = texture.at(x, y + 1) - texture.at(x, y);
        }
    return field;
}

TextureAtlas make_empty_atlas(const Mesh& mesh, int resolution) {
    const DomainMap map = rasterize_domains(mesh, resolution);
    TextureAtlas atlas;
    atlas.image = RgbImage(resolution, resolution, Rgb());
    atlas.valid_mask =
        Image<std::uint8_t>(resolution, resolution, static_cast<std::uint8_t>(TexelTag::empty));
    atlas.part_domains = map.part;
    return atlas;
}

TextureAtlas extract_visible(const RgbImage& image, const Mesh& mesh, const Pose& pose,
                             const CameraIntrinsics& intrinsics, int resolution) {
    require(image.width == intrinsics.width && image.height == intrinsics.height,
            errc::dimension_mismatch, "image size disagrees with intrinsics");

    const DomainMap map = rasterize_domains(mesh, resolution);
    TextureAtlas atlas;
    atlas.image = RgbImage(resolution, resolution, Rgb());
    atlas.valid_mask =
        Image<std::uint8_t>(resolution, resolution, static_cast<std::uint8_t>(TexelTag::empty));
    atlas.part_domains = map.part;

    Scene scene(intrinsics);
    scene.add_instance(mesh, pose, 0);
    const DepthImage depth_map = rasterize(scene).depth_map;

    const Mat3 rot = pose.rotation_matrix();
    for (int y = 0; y < resolution; ++y)
        for (int x = 0; x < resolution; ++x) {
            if (map.part.at(x, y) < 0)
                continue;
            const Vec3 surface = texel_surface_point(mesh, map, x, y);
            const Vec3 cam = rot * surface + pose.translation;
            if (cam.z() <= 0.0)
                continue;
            const Vec2 pixel(intrinsics.fx * cam.x() / cam.z() + intrinsics.cx,
                             intrinsics.fy * cam.y() / cam.z() + intrinsics.cy);
            const int px = static_cast<int>(std::floor(pixel.x()));
            const int py = static_cast<int>(std::floor(pixel.y()));
            if (!depth_map.in_bounds(px, py))
                continue;
            const float visible_depth = depth_map.at(px, py);
            if (!(cam.z() <= visible_depth + 1e-3 * cam.z()))
                continue; // occluded by nearer geometry
            atlas.image.at(x, y) = sample_image_bilinear(image, pixel);
            atlas.valid_mask.at(x, y) = static_cast<std::uint8_t>(TexelTag::observed);
        }
    return atlas;
}

TextureAtlas complete_texture(const TextureAtlas& partial, const Mesh& mesh,
                              const std::vector<SymmetryPlane>& planes,
                              const PriorGradientField& prior, const TextureAtlas& prior_colors,
                              const CompletionWeights& weights) {
    const int res = partial.resolution();
    require(res >= 1 && partial.image.height == res, errc::invalid_argument,
            "atlas must be square");
    require(prior.grad_x.width == res && prior.grad_x.height == res &&
                prior.grad_y.width == res && prior_colors.resolution() == res,
            errc::resolution_mismatch, "prior layers disagree with atlas resolution");

    const DomainMap map = rasterize_domains(mesh, res);

    // every part present on the mesh must own at least one texel
    {
        std::array<bool, PartId::kPartCount> on_mesh{}, has_texel{};
        for (const PartId part : mesh.face_part)
            on_mesh[part.value()] = true;
        for (int y = 0; y < res; ++y)
            for (int x = 0; x < res; ++x)
                if (map.part.at(x, y) >= 0)
                    has_texel[map.part.at(x, y)] = true;
        for (int part = 0; part < PartId::kPartCount; ++part)
            require(!on_mesh[part] || has_texel[part], errc::empty_part_domain,
                    "part " + std::to_string(part) + " owns no texel at resolution " +
                        std::to_string(res));
    }

    TextureAtlas atlas = partial;
    atlas.part_domains = map.part;

    const auto tag_of = [&](int x, int y) { return static_cast<TexelTag>(atlas.valid_mask.at(x, y)); };
    const auto set_tag = [&](int x, int y, TexelTag tag) {
        atlas.valid_mask.at(x, y) = static_cast<std::uint8_t>(tag);
    };

    // stage (i): part-level completion
    for (int part = 0; part < PartId::kPartCount; ++part) {
        size_t total = 0, observed = 0;
        Rgb mean;
        for (int y = 0; y < res; ++y)
            for (int x = 0; x < res; ++x) {
                if (map.part.at(x, y) != part)
                    continue;
                ++total;
                if (tag_of(x, y) == TexelTag::observed) {
                    ++observed;
                    mean = mean + atlas.image.at(x, y);
                }
            }
        if (total == 0 || observed * 5 < total) // needs >= 20% observed
            continue;
        mean = mean * (1.0 / static_cast<double>(observed));
        for (int y = 0; y < res; ++y)
            for (int x = 0; x < res; ++x)
                if (map.part.at(x, y) == part && tag_of(x, y) == TexelTag::empty) {
                    atlas.image.at(x, y) = mean;
                    set_tag(x, y, TexelTag::part_mean);
                }
    }

    // stage (ii): symmetric completion; upgrades empty and part-mean texels
    if (!planes.empty()) {
        std::vector<Vec3> observed_points;
        std::vector<std::pair<int, int>> observed_texels;
        for (int y = 0; y < res; ++y)
            for (int x = 0; x < res; ++x)
                if (map.part.at(x, y) >= 0 && tag_of(x, y) == TexelTag::observed) {
                    observed_points.push_back(texel_surface_point(mesh, map, x, y));
                    observed_texels.emplace_back(x, y);
                }
        if (!observed_points.empty()) {
            const double tol = 2.0 * texel_world_size(mesh, res);
            const PointGrid grid(observed_points, tol);
            for (int y = 0; y < res; ++y)
                for (int x = 0; x < res; ++x) {
                    if (map.part.at(x, y) < 0)
                        continue;
                    const TexelTag tag = tag_of(x, y);
                    if (tag != TexelTag::empty && tag != TexelTag::part_mean)
                        continue;
                    const Vec3 surface = texel_surface_point(mesh, map, x, y);
                    for (const SymmetryPlane& plane : planes) {
                        const std::int64_t hit = grid.nearest_within(plane.reflect(surface), tol);
                        if (hit < 0)
                            continue;
                        const auto [sx, sy] = observed_texels[static_cast<size_t>(hit)];
                        atlas.image.at(x, y) = partial.image.at(sx, sy);
                        set_tag(x, y, TexelTag::symmetric);
                        break;
                    }
                }
        }
    }

    // stage (iii) leaves the remaining texels to the prior gradients alone;
    // islands without any data get a weak anchor to the prior colors so the
    // per-part solve stays definite
    std::vector<int> island(static_cast<size_t>(res) * res, -1);
    {
        int next = 0;
        for (int y = 0; y < res; ++y)
            for (int x = 0; x < res; ++x) {
                if (map.part.at(x, y) < 0 || island[map.index(x, y)] >= 0)
                    continue;
                std::queue<std::pair<int, int>> frontier;
                frontier.emplace(x, y);
                island[map.index(x, y)] = next;
                bool has_data = false;
                std::vector<size_t> members;
                while (!frontier.empty()) {
                    const auto [cx, cy] = frontier.front();
                    frontier.pop();
                    members.push_back(map.index(cx, cy));
                    if (tag_of(cx, cy) != TexelTag::empty)
                        has_data = true;
                    const int part = map.part.at(cx, cy);
                    const int dx[4] = {1, -1, 0, 0};
                    const int dy[4] = {0, 0, 1, -1};
                    for (int d = 0; d < 4; ++d) {
                        const int nx = cx + dx[d], ny = cy + dy[d];
                        if (nx < 0 || nx >= res || ny < 0 || ny >= res)
                            continue;
                        if (map.part.at(nx, ny) != part || island[map.index(nx, ny)] >= 0)
                            continue;
                        island[map.index(nx, ny)] = next;
                        frontier.emplace(nx, ny);
                    }
                }
                if (!has_data) {
                    for (size_t member : members) {
                        const int mx = static_cast<int>(member % res);
                        const int my = static_cast<int>(member / res);
                        atlas.image.at(mx, my) = prior_colors.image.at(mx, my);
                        set_tag(mx, my, TexelTag::prior);
                    }
                }
                ++next;
            }
    }

    // per-part screened Poisson solve on the 5-point Laplacian
    for (int part = 0; part < PartId::kPartCount; ++part) {
        std::vector<std::pair<int, int>> texels;
        std::vector<std::int64_t> unknown(static_cast<size_t>(res) * res, -1);
        for (int y = 0; y < res; ++y)
            for (int x = 0; x < res; ++x)
                if (map.part.at(x, y) == part) {
                    unknown[map.index(x, y)] = static_cast<std::int64_t>(texels.size());
                    texels.emplace_back(x, y);
                }
        if (texels.empty())
            continue;
        const auto n = static_cast<Eigen::Index>(texels.size());

        const auto data_weight = [&](int x, int y) {
            switch (tag_of(x, y)) {
            case TexelTag::observed: return weights.observed;
            case TexelTag::symmetric: return weights.symmetric;
            case TexelTag::part_mean: return weights.part_mean;
            case TexelTag::prior: return weights.part_mean; // weak anchor
            case TexelTag::empty: return 0.0;
            }
            return 0.0;
        };

        std::vector<Eigen::Triplet<double>> triplets;
        Eigen::MatrixX3d rhs = Eigen::MatrixX3d::Zero(n, 3);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto [x, y] = texels[i];
            double diagonal = data_weight(x, y);
            if (diagonal > 0.0) {
                const Rgb c = atlas.image.at(x, y);
                rhs.row(i) += diagonal * Eigen::RowVector3d(c.r, c.g, c.b);
            }
            // gradient equations toward the +x / +y neighbors inside the part
            const auto couple = [&](int nx, int ny, const Rgb& g) {
                if (nx < 0 || nx >= res || ny < 0 || ny >= res)
                    return;
                const std::int64_t j = unknown[map.index(nx, ny)];
                if (j < 0)
                    return;
                // ||(I_j - I_i) - g||^2 contributes to both rows
                diagonal += 1.0;
                triplets.emplace_back(i, j, -1.0);
                rhs.row(i) -= Eigen::RowVector3d(g.r, g.g, g.b);
            };
            const auto couple_back = [&](int nx, int ny, const Rgb& g) {
                if (nx < 0 || nx >= res || ny < 0 || ny >= res)
                    return;
                const std::int64_t j = unknown[map.index(nx, ny)];
                if (j < 0)
                    return;
                diagonal += 1.0;
                triplets.emplace_back(i, j, -1.0);
                rhs.row(i) += Eigen::RowVector3d(g.r, g.g, g.b);
            };
            couple(x + 1, y, prior.grad_x.at(x, y));
            couple(x, y + 1, prior.grad_y.at(x, y));
            if (x > 0)
                couple_back(x - 1, y, prior.grad_x.at(x - 1, y));
            if (y > 0)
                couple_back(x, y - 1, prior.grad_y.at(x, y - 1));
            triplets.emplace_back(i, i, diagonal);
        }
        Eigen::SparseMatrix<double> system(n, n);
        system.setFromTriplets(triplets.begin(), triplets.end());

        Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> solver;
        solver.setTolerance(1e-6);
        solver.setMaxIterations(10 * n);
        solver.compute(system);
        Eigen::VectorXd guess(n);
        for (int channel = 0; channel < 3; ++channel) {
            for (Eigen::Index i = 0; i < n; ++i) {
                const auto [x, y] = texels[i];
                const Rgb& c = atlas.image.at(x, y);
                guess[i] = channel == 0 ? c.r : channel == 1 ? c.g : c.b;
            }
            const Eigen::VectorXd solution = solver.solveWithGuess(rhs.col(channel), guess);
            require(solver.info() == Eigen::Success || solver.error() <= 1e-6,
                    errc::degenerate_configuration,
                    "poisson solve failed for part " + std::to_string(part));
            for (Eigen::Index i = 0; i < n; ++i) {
                const auto [x, y] = texels[i];
                Rgb& c = atlas.image.at(x, y);
                (channel == 0 ? c.r : channel == 1 ? c.g : c.b) = solution[i];
            }
        }
        // texels that carried no data at all were filled purely by the prior
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto [x, y] = texels[i];
            if (tag_of(x, y) == TexelTag::empty)
                set_tag(x, y, TexelTag::prior);
        }
    }
    return atlas;
}

void save_atlas(const std::filesystem::path& directory, const std::string& stem,
                const TextureAtlas& atlas) {
    std::filesystem::create_directories(directory);
    write_png(directory / (stem + ".png"), atlas.image);
    write_png(directory / (stem + "_tags.png"), atlas.valid_mask);
}

} // namespace carfit
