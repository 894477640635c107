#include "carfit/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <queue>

namespace carfit {

namespace {

/// Area under the interpolated precision-recall curve from per-detection
/// (score, is_tp) outcomes, already including every detection.
double average_precision(std::vector<std::pair<double, bool>> outcomes, size_t gt_count) {
    if (gt_count == 0)
        return 0.0;
    std::stable_sort(outcomes.begin(), outcomes.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<double> precision, recall;
    size_t tp = 0, fp = 0;
    for (const auto& [score, is_tp] : outcomes) {
        (is_tp ? tp : fp) += 1;
        precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
        recall.push_back(static_cast<double>(tp) / static_cast<double>(gt_count));
    }
    // monotone envelope, then the exact area under the step curve
    for (size_t i = precision.size(); i-- > 1;)
        precision[i - 1] = std::max(precision[i - 1], precision[i]);
    double ap = 0.0, prev_recall = 0.0;
    for (size_t i = 0; i < precision.size(); ++i) {
        ap += (recall[i] - prev_recall) * precision[i];
        prev_recall = recall[i];
    }
    return ap;
}

std::vector<std::vector<std::uint32_t>> adjacency_of(const Mesh& mesh) {
    return vertex_adjacency(mesh);
}

std::vector<int> mesh_components(const Mesh& mesh) {
    const auto adjacency = adjacency_of(mesh);
    std::vector<int> component(mesh.vertex_count(), -1);
    int next = 0;
    for (std::uint32_t seed = 0; seed < mesh.vertex_count(); ++seed) {
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

struct VoxelGrid {
    Vec3 lo;
    int nx = 0, ny = 0, nz = 0;
    double pitch = 0.05;
    std::vector<char> occupied;

    size_t index(int x, int y, int z) const {
        return (static_cast<size_t>(z) * ny + y) * nx + x;
    }
};

/// Solid voxelization: a voxel center is inside if an +x ray from it crosses
/// the triangles of at least one connected component an odd number of times.
void voxelize_into(const Mesh& mesh, VoxelGrid& grid) {
    const std::vector<int> component = mesh_components(mesh);
    const int n_components =
        mesh.vertex_count() ? *std::max_element(component.begin(), component.end()) + 1 : 0;

    // group faces per component
    std::vector<std::vector<std::uint32_t>> faces_of(n_components);
    for (std::uint32_t fi = 0; fi < mesh.face_count(); ++fi)
        faces_of[component[mesh.faces[fi][0]]].push_back(fi);

    // tiny deterministic offset keeps rays away from edges and vertices
    const double ey = grid.pitch * 1.6180339887e-4;
    const double ez = grid.pitch * 2.7182818284e-4;

    std::vector<double> crossings;
    for (const auto& faces : faces_of) {
        for (int z = 0; z < grid.nz; ++z) {
            for (int y = 0; y < grid.ny; ++y) {
                const double ry = grid.lo.y() + (y + 0.5) * grid.pitch + ey;
                const double rz = grid.lo.z() + (z + 0.5) * grid.pitch + ez;
                crossings.clear();
                for (std::uint32_t fi : faces) {
                    const auto& f = mesh.faces[fi];
                    const Vec3& a = mesh.vertices[f[0]];
                    const Vec3& b = mesh.vertices[f[1]];
                    const Vec3& c = mesh.vertices[f[2]];
                    // 2D containment in the (y, z) projection
                    const double d1 = (b.y() - a.y()) * (rz - a.z()) - (b.z() - a.z()) * (ry - a.y());
                    const double d2 = (c.y() - b.y()) * (rz - b.z()) - (c.z() - b.z()) * (ry - b.y());
                    const double d3 = (a.y() - c.y()) * (rz - c.z()) - (a.z() - c.z()) * (ry - c.y());
                    const bool has_neg = (d1 < 0) || (d2 < 0) || (d3 < 0);
                    const bool has_pos = (d1 > 0) || (d2 > 0) || (d3 > 0);
                    if (has_neg && has_pos)
                        continue;
                    // intersect the ray with the triangle plane
                    const Vec3 normal = (b - a).cross(c - a);
                    if (std::abs(normal.x()) < 1e-15)
                        continue; // parallel to the ray
                    const double x =
                        a.x() + (normal.y() * (a.y() - ry) + normal.z() * (a.z() - rz)) / normal.x();
                    crossings.push_back(x);
                }
                if (crossings.empty())
                    continue;
                std::sort(crossings.begin(), crossings.end());
                for (int x = 0; x < grid.nx; ++x) {
                    const double rx = grid.lo.x() + (x + 0.5) * grid.pitch;
                    const size_t behind =
                        std::upper_bound(crossings.begin(), crossings.end(), rx) -
                        crossings.begin();
                    const size_t ahead = crossings.size() - behind;
                    if (ahead % 2 == 1)
                        grid.occupied[grid.index(x, y, z)] = 1;
                }
            }
        }
    }
}

} // namespace

double mask_iou(const GrayImage& a, const GrayImage& b) {
    require(a.width == b.width && a.height == b.height, errc::dimension_mismatch,
            "mask dimensions differ");
    size_t intersection = 0, uni = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        const bool fa = a.pixels[i] != 0;
        const bool fb = b.pixels[i] != 0;
        intersection += fa && fb;
        uni += fa || fb;
    }
    return uni == 0 ? 0.0 : static_cast<double>(intersection) / static_cast<double>(uni);
}

MaskMapResult mask_map(const std::vector<std::vector<MaskDetection>>& predictions,
                       const std::vector<std::vector<GrayImage>>& ground_truth) {
    require(predictions.size() == ground_truth.size(), errc::dimension_mismatch,
            "prediction and ground-truth image counts differ");
    const size_t n_images = predictions.size();

    // cache the IoU matrix per image
    struct ImageIous {
        std::vector<std::vector<double>> iou; // [det][gt]
    };
    std::vector<ImageIous> cache(n_images);
    size_t gt_count = 0;
    for (size_t img = 0; img < n_images; ++img) {
        gt_count += ground_truth[img].size();
        cache[img].iou.resize(predictions[img].size());
        for (size_t d = 0; d < predictions[img].size(); ++d) {
            cache[img].iou[d].resize(ground_truth[img].size());
            for (size_t g = 0; g < ground_truth[img].size(); ++g)
                cache[img].iou[d][g] = mask_iou(predictions[img][d].mask, ground_truth[img][g]);
        }
    }

    // global score ordering of (image, detection)
    std::vector<std::pair<size_t, size_t>> order;
    for (size_t img = 0; img < n_images; ++img)
        for (size_t d = 0; d < predictions[img].size(); ++d)
            order.emplace_back(img, d);
    std::stable_sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
        return predictions[a.first][a.second].score > predictions[b.first][b.second].score;
    });

    MaskMapResult result;
    for (int t = 0; t < 10; ++t) {
        const double threshold = 0.50 + 0.05 * t;
        std::vector<std::vector<char>> matched(n_images);
        for (size_t img = 0; img < n_images; ++img)
            matched[img].assign(ground_truth[img].size(), 0);
        std::vector<std::pair<double, bool>> outcomes;
        for (const auto& [img, d] : order) {
            double best_iou = -1.0;
            std::int64_t best_gt = -1;
            for (size_t g = 0; g < ground_truth[img].size(); ++g) {
                if (matched[img][g])
                    continue;
                const double iou = cache[img].iou[d][g];
                if (iou >= threshold && iou > best_iou)
                    best_iou = iou, best_gt = static_cast<std::int64_t>(g);
            }
            if (best_gt >= 0)
                matched[img][best_gt] = 1;
            outcomes.emplace_back(predictions[img][d].score, best_gt >= 0);
        }
        const double ap = average_precision(std::move(outcomes), gt_count);
        result.per_threshold.emplace_back(threshold, ap);
        result.map += ap / 10.0;
        if (t == 0)
            result.ap50 = ap;
        if (t == 5)
            result.ap75 = ap;
    }
    return result;
}

double mesh_volumetric_iou(const Mesh& a, const Mesh& b, double voxel_pitch) {
    require(!a.vertices.empty() && !b.vertices.empty(), errc::empty_mesh,
            "volumetric IoU of empty mesh");
    require(voxel_pitch > 0.0, errc::invalid_argument, "voxel pitch must be positive");
    const auto [alo, ahi] = a.bounding_box();
    const auto [blo, bhi] = b.bounding_box();
    const Vec3 lo = alo.cwiseMin(blo) - Vec3::Constant(voxel_pitch);
    const Vec3 hi = ahi.cwiseMax(bhi) + Vec3::Constant(voxel_pitch);

    VoxelGrid grid_a, grid_b;
    grid_a.lo = grid_b.lo = lo;
    grid_a.pitch = grid_b.pitch = voxel_pitch;
    grid_a.nx = grid_b.nx = std::max(1, static_cast<int>(std::ceil((hi.x() - lo.x()) / voxel_pitch)));
    grid_a.ny = grid_b.ny = std::max(1, static_cast<int>(std::ceil((hi.y() - lo.y()) / voxel_pitch)));
    grid_a.nz = grid_b.nz = std::max(1, static_cast<int>(std::ceil((hi.z() - lo.z()) / voxel_pitch)));
    grid_a.occupied.assign(static_cast<size_t>(grid_a.nx) * grid_a.ny * grid_a.nz, 0);
    grid_b.occupied = grid_a.occupied;

    voxelize_into(a, grid_a);
    voxelize_into(b, grid_b);

    size_t intersection = 0, uni = 0;
    for (size_t i = 0; i < grid_a.occupied.size(); ++i) {
        intersection += grid_a.occupied[i] && grid_b.occupied[i];
        uni += grid_a.occupied[i] || grid_b.occupied[i];
    }
    return uni == 0 ? 0.0 : static_cast<double>(intersection) / static_cast<double>(uni);
}

PoseDistance pose_distance(const Pose& pred_pose, const Mesh& pred_mesh, const Pose& gt_pose,
                           const Mesh& gt_mesh, double voxel_pitch) {
    PoseDistance d;
    d.trans_abs = (pred_pose.translation - gt_pose.translation).norm();
    const double gt_norm = gt_pose.translation.norm();
    require(gt_norm > 0.0, errc::invalid_argument,
            "relative translation undefined for zero ground-truth translation");
    d.trans_rel = d.trans_abs / gt_norm;
    d.rot = rotation_angle(pred_pose.rotation, gt_pose.rotation);
    d.shape_sim = mesh_volumetric_iou(pred_mesh, gt_mesh, voxel_pitch);
    return d;
}

A3dpThresholds A3dpThresholds::defaults() {
    A3dpThresholds t;
    for (int j = 0; j < 10; ++j) {
        t.shape.push_back(0.5 + 0.05 * j);
        t.trans.push_back(2.8 - 0.3 * j);
        t.rot.push_back(M_PI / 6 - j * (M_PI / 60));
    }
    return t;
}

namespace {

double a3dp_level_ap(const std::vector<Detection3d>& detections,
                     const std::vector<GroundTruth3d>& ground_truth,
                     const std::vector<std::vector<PoseDistance>>& distance, double shape_min,
                     double trans_max, double rot_max, A3dpMode mode,
                     const std::vector<size_t>& order) {
    std::vector<char> matched(ground_truth.size(), 0);
    std::vector<std::pair<double, bool>> outcomes;
    for (size_t d : order) {
        double best_sim = -1.0;
        std::int64_t best_gt = -1;
        for (size_t g = 0; g < ground_truth.size(); ++g) {
            if (matched[g] || ground_truth[g].frame != detections[d].frame)
                continue;
            const PoseDistance& pd = distance[d][g];
            const double trans = mode == A3dpMode::abs ? pd.trans_abs : pd.trans_rel;
            if (pd.shape_sim >= shape_min && trans <= trans_max && pd.rot <= rot_max &&
                pd.shape_sim > best_sim) {
                best_sim = pd.shape_sim;
                best_gt = static_cast<std::int64_t>(g);
            }
        }
        if (best_gt >= 0)
            matched[best_gt] = 1;
        outcomes.emplace_back(detections[d].score, best_gt >= 0);
    }
    return average_precision(std::move(outcomes), ground_truth.size());
}

} // namespace

A3dpResult a3dp(const std::vector<Detection3d>& detections,
                const std::vector<GroundTruth3d>& ground_truth, const A3dpThresholds& thresholds,
                A3dpMode mode, double voxel_pitch) {
    thresholds.validate();

    std::vector<std::vector<PoseDistance>> distance(detections.size());
    for (size_t d = 0; d < detections.size(); ++d) {
        distance[d].resize(ground_truth.size());
        for (size_t g = 0; g < ground_truth.size(); ++g) {
            if (ground_truth[g].frame != detections[d].frame)
                continue;
            distance[d][g] = pose_distance(detections[d].pose, detections[d].mesh,
                                           ground_truth[g].pose, ground_truth[g].mesh, voxel_pitch);
        }
    }

    std::vector<size_t> order(detections.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return detections[a].score > detections[b].score;
    });

    A3dpResult result;
    for (size_t j = 0; j < thresholds.shape.size(); ++j) {
        const double ap = a3dp_level_ap(detections, ground_truth, distance, thresholds.shape[j],
                                        thresholds.trans[j], thresholds.rot[j], mode, order);
        result.per_level.push_back(ap);
        result.mean += ap / static_cast<double>(thresholds.shape.size());
    }
    result.c_l = a3dp_level_ap(detections, ground_truth, distance, thresholds.loose[0],
                               thresholds.loose[1], thresholds.loose[2], mode, order);
    result.c_s = a3dp_level_ap(detections, ground_truth, distance, thresholds.strict[0],
                               thresholds.strict[1], thresholds.strict[2], mode, order);
    return result;
}

void write_a3dp_csv(const std::filesystem::path& path, const A3dpResult& result,
                    const A3dpThresholds& thresholds) {
    std::ofstream out(path);
    require(out.good(), errc::io_error, "cannot open for writing: " + path.string());
    out << "level,shape_min,trans_max,rot_max,ap\n";
    for (size_t j = 0; j < result.per_level.size(); ++j)
        out << j << "," << thresholds.shape[j] << "," << thresholds.trans[j] << ","
            << thresholds.rot[j] << "," << result.per_level[j] << "\n";
    out << "mean,,,," << result.mean << "\n";
    out << "c_l,,,," << result.c_l << "\n";
    out << "c_s,,,," << result.c_s << "\n";
}

namespace {

using Polygon = std::vector<Vec2>;

double polygon_area(const Polygon& poly) {
    double a = 0.0;
    for (size_t i = 0; i < poly.size(); ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % poly.size()];
        a += p.x() * q.y() - q.x() * p.y();
    }
    return std::abs(a) / 2.0;
}

Polygon footprint(const OrientedBox& box) {
    const double c = std::cos(box.yaw), s = std::sin(box.yaw);
    const double hx = box.dims.x() / 2, hy = box.dims.y() / 2;
    Polygon poly;
    for (const auto& [sx, sy] :
         {std::pair{-1.0, -1.0}, std::pair{1.0, -1.0}, std::pair{1.0, 1.0}, std::pair{-1.0, 1.0}})
        poly.emplace_back(box.center.x() + c * sx * hx - s * sy * hy,
                          box.center.y() + s * sx * hx + c * sy * hy);
    return poly;
}

// Sutherland-Hodgman clip of `subject` against the CCW convex `clip`.
Polygon clip_convex(const Polygon& subject, const Polygon& clip) {
    Polygon output = subject;
    for (size_t e = 0; e < clip.size() && !output.empty(); ++e) {
        const Vec2& a = clip[e];
        const Vec2& b = clip[(e + 1) % clip.size()];
        const auto side = [&](const Vec2& p) {
            return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
        };
        Polygon input;
        input.swap(output);
        for (size_t i = 0; i < input.size(); ++i) {
            const Vec2& p = input[i];
            const Vec2& q = input[(i + 1) % input.size()];
            const double sp = side(p), sq = side(q);
            if (sp >= 0.0)
                output.push_back(p);
            if ((sp >= 0.0) != (sq >= 0.0) && sp != sq)
                output.push_back(p + sp / (sp - sq) * (q - p));
        }
    }
    return output;
}

} // namespace

double box3d_iou(const OrientedBox& a, const OrientedBox& b) {
    require(a.dims.minCoeff() > 0.0 && b.dims.minCoeff() > 0.0, errc::nonpositive_dims,
            "box dimensions must be positive");
    const Polygon fa = footprint(a);
    const Polygon fb = footprint(b);
    const Polygon inter = clip_convex(fa, fb);
    const double bev = inter.size() >= 3 ? polygon_area(inter) : 0.0;
    const double z_lo = std::max(a.center.z() - a.dims.z() / 2, b.center.z() - b.dims.z() / 2);
    const double z_hi = std::min(a.center.z() + a.dims.z() / 2, b.center.z() + b.dims.z() / 2);
    const double overlap = bev * std::max(0.0, z_hi - z_lo);
    const double va = a.dims.prod();
    const double vb = b.dims.prod();
    return overlap / (va + vb - overlap);
}

DimensionError shape_dim_error(const Mesh& pred_mesh, const Mesh& gt_mesh) {
    const auto [plo, phi] = pred_mesh.bounding_box();
    const auto [glo, ghi] = gt_mesh.bounding_box();
    const Vec3 pe = phi - plo;
    const Vec3 ge = ghi - glo;
    // canonical frame: x length, y width, z height -> report (w, h, l)
    const Vec3 pred(pe.y(), pe.z(), pe.x());
    const Vec3 gt(ge.y(), ge.z(), ge.x());
    require(gt.minCoeff() > 0.0, errc::empty_mesh, "ground-truth mesh has zero extent");
    DimensionError result;
    result.error = (pred - gt).cwiseAbs();
    result.rate = result.error.cwiseQuotient(gt);
    return result;
}

} // namespace carfit
