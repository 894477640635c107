#include "carfit/correspondence.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

#include "carfit/rng.hpp"

namespace carfit {

namespace {

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Signed barycentric weights; sum equals the signed doubled area.
Vec3 barycentric_weights(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& p) {
    return Vec3(cross2(b - p, c - p), cross2(c - p, a - p), cross2(a - p, b - p));
}

Vec2 closest_point_on_segment(const Vec2& a, const Vec2& b, const Vec2& p, double& t_out) {
    const Vec2 d = b - a;
    const double len2 = d.squaredNorm();
    double t = len2 > 0.0 ? (p - a).dot(d) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    t_out = t;
    return a + t * d;
}

} // namespace

UvAtlasIndex::UvAtlasIndex(const Mesh& topology, int grid_resolution) : topology_(&topology) {
    require(grid_resolution >= 1, errc::invalid_argument, "grid resolution must be >= 1");
    std::array<std::vector<std::uint32_t>, PartId::kPartCount> part_faces;
    for (std::uint32_t fi = 0; fi < topology.face_count(); ++fi)
        part_faces[topology.face_part[fi].value()].push_back(fi);

    for (int part = 0; part < PartId::kPartCount; ++part) {
        PartGrid& grid = grids_[part];
        if (part_faces[part].empty())
            continue;
        grid.empty = false;
        grid.resolution = grid_resolution;
        Vec2 lo(1e300, 1e300), hi(-1e300, -1e300);
        for (std::uint32_t fi : part_faces[part])
            for (int c = 0; c < 3; ++c) {
                lo = lo.cwiseMin(topology.corner_uv[fi][c]);
                hi = hi.cwiseMax(topology.corner_uv[fi][c]);
            }
        // pad so snap-distance queries near the boundary stay in range
        grid.lo = lo - Vec2(kSnapTolerance, kSnapTolerance);
        grid.hi = hi + Vec2(kSnapTolerance, kSnapTolerance);
        grid.bins.assign(static_cast<size_t>(grid_resolution) * grid_resolution, {});
        const Vec2 extent = grid.hi - grid.lo;
        const auto bin_of = [&](double v, double lo_v, double ext) {
            return std::clamp(static_cast<int>((v - lo_v) / ext * grid_resolution), 0,
                              grid_resolution - 1);
        };
        for (std::uint32_t fi : part_faces[part]) {
            Vec2 flo(1e300, 1e300), fhi(-1e300, -1e300);
            for (int c = 0; c < 3; ++c) {
                flo = flo.cwiseMin(topology.corner_uv[fi][c]);
                fhi = fhi.cwiseMax(topology.corner_uv[fi][c]);
            }
            const int x0 = bin_of(flo.x() - kSnapTolerance, grid.lo.x(), extent.x());
            const int x1 = bin_of(fhi.x() + kSnapTolerance, grid.lo.x(), extent.x());
            const int y0 = bin_of(flo.y() - kSnapTolerance, grid.lo.y(), extent.y());
            const int y1 = bin_of(fhi.y() + kSnapTolerance, grid.lo.y(), extent.y());
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x)
                    grid.bins[static_cast<size_t>(y) * grid_resolution + x].push_back(fi);
        }
    }
}

std::optional<SurfaceLocation> UvAtlasIndex::try_locate(PartId part, const Vec2& uv) const {
    return locate_impl(part, uv, true);
}

std::optional<SurfaceLocation> UvAtlasIndex::try_locate_strict(PartId part, const Vec2& uv) const {
    return locate_impl(part, uv, false);
}

std::optional<SurfaceLocation> UvAtlasIndex::locate_impl(PartId part, const Vec2& uv,
                                                         bool snap) const {
    if (part.is_background())
        return std::nullopt;
    const PartGrid& grid = grids_[part.value()];
    if (grid.empty)
        return std::nullopt;
    if (uv.x() < grid.lo.x() || uv.x() > grid.hi.x() || uv.y() < grid.lo.y() ||
        uv.y() > grid.hi.y())
        return std::nullopt;

    const Vec2 extent = grid.hi - grid.lo;
    const int bx = std::clamp(static_cast<int>((uv.x() - grid.lo.x()) / extent.x() * grid.resolution),
                              0, grid.resolution - 1);
    const int by = std::clamp(static_cast<int>((uv.y() - grid.lo.y()) / extent.y() * grid.resolution),
                              0, grid.resolution - 1);

    std::vector<std::uint32_t> candidates;
    for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
            const int x = bx + dx, y = by + dy;
            if (x < 0 || x >= grid.resolution || y < 0 || y >= grid.resolution)
                continue;
            const auto& bin = grid.bins[static_cast<size_t>(y) * grid.resolution + x];
            candidates.insert(candidates.end(), bin.begin(), bin.end());
        }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    // exact containment first, lowest face index wins
    for (std::uint32_t fi : candidates) {
        const auto& uvs = topology_->corner_uv[fi];
        const Vec3 w = barycentric_weights(uvs[0], uvs[1], uvs[2], uv);
        const double sum = w.sum();
        if (sum == 0.0)
            continue;
        const Vec3 bary = w / sum;
        if (bary.minCoeff() >= 0.0)
            return SurfaceLocation{fi, bary};
    }

    if (!snap)
        return std::nullopt;

    // snap to the nearest triangle boundary within tolerance
    double best_d2 = kSnapTolerance * kSnapTolerance;
    std::optional<SurfaceLocation> best;
    for (std::uint32_t fi : candidates) {
        const auto& uvs = topology_->corner_uv[fi];
        for (int e = 0; e < 3; ++e) {
            double t = 0.0;
            const Vec2 q = closest_point_on_segment(uvs[e], uvs[(e + 1) % 3], uv, t);
            const double d2 = (q - uv).squaredNorm();
            if (d2 < best_d2) {
                best_d2 = d2;
                Vec3 bary = Vec3::Zero();
                bary[e] = 1.0 - t;
                bary[(e + 1) % 3] = t;
                best = SurfaceLocation{fi, bary};
            }
        }
    }
    return best;
}

SurfaceLocation UvAtlasIndex::locate(PartId part, const Vec2& uv) const {
    require(!part.is_background(), errc::invalid_argument, "cannot locate the background part");
    require(!grids_[part.value()].empty, errc::missing_part,
            "mesh has no faces of part " + std::to_string(part.value()));
    auto location = try_locate(part, uv);
    require(location.has_value(), errc::off_atlas,
            "uv (" + std::to_string(uv.x()) + "," + std::to_string(uv.y()) +
                ") outside part " + std::to_string(part.value()) + " atlas");
    return *location;
}

Vec3 UvAtlasIndex::surface_point(const Mesh& mesh, const SurfaceLocation& location) const {
    const auto& face = mesh.faces[location.face];
    return location.barycentric[0] * mesh.vertices[face[0]] +
           location.barycentric[1] * mesh.vertices[face[1]] +
           location.barycentric[2] * mesh.vertices[face[2]];
}

Vec3 uv_to_surface(const Mesh& mesh, PartId part, const Vec2& uv) {
    const UvAtlasIndex index(mesh);
    return index.surface_point(mesh, index.locate(part, uv));
}

std::vector<Correspondence> sample_correspondences(const LabelMaps& maps, int instance, int count,
                                                   const NoiseModel& noise) {
    noise.validate();
    require(count >= 1, errc::invalid_argument, "count must be >= 1");

    std::vector<std::pair<int, int>> fg;
    for (int y = 0; y < maps.instance_map.height; ++y)
        for (int x = 0; x < maps.instance_map.width; ++x)
            if (maps.instance_map.at(x, y) == instance)
                fg.emplace_back(x, y);
    require(!fg.empty(), errc::instance_absent,
            "instance " + std::to_string(instance) + " not present in label maps");

    Rng rng(noise.seed);
    const size_t n = std::min<size_t>(count, fg.size());
    // partial Fisher-Yates: the first n entries become the sample
    for (size_t i = 0; i < n; ++i) {
        const size_t j = i + static_cast<size_t>(rng.uniform_index(fg.size() - i));
        std::swap(fg[i], fg[j]);
    }

    std::vector<Correspondence> out;
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        if (noise.dropout_rate > 0.0 && rng.uniform() < noise.dropout_rate)
            continue;
        const auto [x, y] = fg[i];
        Correspondence c;
        c.pixel = Vec2(x + 0.5, y + 0.5);
        if (noise.pixel_sigma > 0.0)
            c.pixel += Vec2(rng.normal(0.0, noise.pixel_sigma), rng.normal(0.0, noise.pixel_sigma));
        c.part = PartId(maps.part_map.at(x, y));
        c.uv = Vec2(maps.u_map.at(x, y), maps.v_map.at(x, y));
        if (noise.uv_sigma > 0.0) {
            c.uv += Vec2(rng.normal(0.0, noise.uv_sigma), rng.normal(0.0, noise.uv_sigma));
            c.uv = c.uv.cwiseMax(0.0).cwiseMin(1.0);
        }
        if (noise.part_flip_rate > 0.0 && rng.uniform() < noise.part_flip_rate) {
            int other = static_cast<int>(rng.uniform_index(PartId::kPartCount - 1));
            if (other >= c.part.value())
                ++other;
            c.part = PartId(other);
        }
        c.weight = 1.0;
        out.push_back(c);
    }
    return out;
}

namespace {

std::string format_full(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

} // namespace

void save_correspondences_csv(const std::filesystem::path& path,
                              const std::vector<Correspondence>& correspondences) {
    std::ofstream out(path);
    require(out.good(), errc::io_error, "cannot open for writing: " + path.string());
    out << "pixel_x,pixel_y,part,u,v,weight\n";
    for (const Correspondence& c : correspondences)
        out << format_full(c.pixel.x()) << "," << format_full(c.pixel.y()) << "," << c.part.value()
            << "," << format_full(c.uv.x()) << "," << format_full(c.uv.y()) << ","
            << format_full(c.weight) << "\n";
    require(out.good(), errc::io_error, "short write: " + path.string());
}

std::vector<Correspondence> load_correspondences_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), errc::io_error, "cannot open: " + path.string());
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), errc::parse_error,
            path.string() + ": empty file");
    require(line == "pixel_x,pixel_y,part,u,v,weight", errc::parse_error,
            path.string() + ": unexpected header '" + line + "'");
    std::vector<Correspondence> out;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        std::array<double, 6> fields{};
        size_t pos = 0;
        for (int f = 0; f < 6; ++f) {
            const size_t next = f == 5 ? line.size() : line.find(',', pos);
            require(next != std::string::npos, errc::parse_error,
                    path.string() + ":" + std::to_string(line_no) + ": expected 6 fields");
            const std::string tok = line.substr(pos, next - pos);
            const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), fields[f]);
            require(res.ec == std::errc() && res.ptr == tok.data() + tok.size(), errc::parse_error,
                    path.string() + ":" + std::to_string(line_no) + ": bad number '" + tok + "'");
            pos = next + 1;
        }
        Correspondence c;
        c.pixel = Vec2(fields[0], fields[1]);
        c.part = PartId(static_cast<int>(fields[2]));
        require(!c.part.is_background(), errc::invalid_argument,
                path.string() + ":" + std::to_string(line_no) + ": background part");
        c.uv = Vec2(fields[3], fields[4]);
        c.weight = fields[5];
        out.push_back(c);
    }
    return out;
}

} // namespace carfit
