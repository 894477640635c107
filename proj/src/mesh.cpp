#include "carfit/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

namespace carfit {

namespace {

// Shortest representation that parses back to the identical double.
std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

struct UvTriangle {
    Vec2 a, b, c;
};

// Inclusive point-in-triangle test in atlas space.
bool uv_contains(const UvTriangle& t, const Vec2& p) {
    const auto side = [](const Vec2& a, const Vec2& b, const Vec2& q) {
        return (b.x() - a.x()) * (q.y() - a.y()) - (b.y() - a.y()) * (q.x() - a.x());
    };
    const double d0 = side(t.a, t.b, p);
    const double d1 = side(t.b, t.c, p);
    const double d2 = side(t.c, t.a, p);
    const bool has_neg = (d0 < 0) || (d1 < 0) || (d2 < 0);
    const bool has_pos = (d0 > 0) || (d1 > 0) || (d2 > 0);
    return !(has_neg && has_pos);
}

} // namespace

void Mesh::validate(int atlas_check_resolution) const {
    require(faces.size() == face_part.size() && faces.size() == corner_uv.size(),
            errc::length_mismatch, "face attribute arrays disagree in length");
    const std::uint32_t n = static_cast<std::uint32_t>(vertices.size());
    for (size_t fi = 0; fi < faces.size(); ++fi) {
        const auto& f = faces[fi];
        for (int c = 0; c < 3; ++c)
            require(f[c] < n, errc::index_out_of_range,
                    "face " + std::to_string(fi) + " references vertex " + std::to_string(f[c]) +
                        " of " + std::to_string(n));
        require(f[0] != f[1] && f[1] != f[2] && f[0] != f[2], errc::degenerate_face,
                "face " + std::to_string(fi) + " repeats a vertex index");
        require(!face_part[fi].is_background(), errc::invalid_argument,
                "face " + std::to_string(fi) + " labeled background");
    }

    // One part per atlas texel: rasterize every face's UV triangle and flag
    // texels claimed by two different parts.
    const int res = atlas_check_resolution;
    std::vector<std::int8_t> owner(static_cast<size_t>(res) * res, -1);
    for (size_t fi = 0; fi < faces.size(); ++fi) {
        const UvTriangle tri{corner_uv[fi][0], corner_uv[fi][1], corner_uv[fi][2]};
        const double lo_u = std::min({tri.a.x(), tri.b.x(), tri.c.x()});
        const double hi_u = std::max({tri.a.x(), tri.b.x(), tri.c.x()});
        const double lo_v = std::min({tri.a.y(), tri.b.y(), tri.c.y()});
        const double hi_v = std::max({tri.a.y(), tri.b.y(), tri.c.y()});
        const int x0 = std::max(0, static_cast<int>(std::floor(lo_u * res)));
        const int x1 = std::min(res - 1, static_cast<int>(std::ceil(hi_u * res)));
        const int y0 = std::max(0, static_cast<int>(std::floor(lo_v * res)));
        const int y1 = std::min(res - 1, static_cast<int>(std::ceil(hi_v * res)));
        const std::int8_t part = static_cast<std::int8_t>(face_part[fi].value());
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const Vec2 center((x + 0.5) / res, (y + 0.5) / res);
                if (!uv_contains(tri, center))
                    continue;
                std::int8_t& cell = owner[static_cast<size_t>(y) * res + x];
                require(cell == -1 || cell == part, errc::atlas_overlap,
                        "atlas texel (" + std::to_string(x) + "," + std::to_string(y) +
                            ") claimed by parts " + std::to_string(int(cell)) + " and " +
                            std::to_string(int(part)));
                cell = part;
            }
        }
    }
}

std::pair<Vec3, Vec3> Mesh::bounding_box() const {
    require(!vertices.empty(), errc::empty_mesh, "bounding box of empty mesh");
    Vec3 lo = vertices.front();
    Vec3 hi = vertices.front();
    for (const Vec3& v : vertices) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    return {lo, hi};
}

std::vector<std::vector<std::uint32_t>> vertex_adjacency(const Mesh& mesh) {
    std::vector<std::vector<std::uint32_t>> adjacency(mesh.vertex_count());
    for (const auto& f : mesh.faces) {
        for (int c = 0; c < 3; ++c) {
            const std::uint32_t a = f[c];
            const std::uint32_t b = f[(c + 1) % 3];
            adjacency[a].push_back(b);
            adjacency[b].push_back(a);
        }
    }
    for (auto& ring : adjacency) {
        std::sort(ring.begin(), ring.end());
        ring.erase(std::unique(ring.begin(), ring.end()), ring.end());
    }
    return adjacency;
}

namespace {

Mesh parse_obj(std::istream& in, const std::string& origin) {
    Mesh mesh;
    std::vector<Vec2> uvs;
    int active_part = -1;
    std::string line;
    size_t line_no = 0;

    const auto parse_double = [&](const std::string& tok) {
        double value = 0.0;
        const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), value);
        require(res.ec == std::errc() && res.ptr == tok.data() + tok.size(), errc::parse_error,
                origin + ":" + std::to_string(line_no) + ": bad number '" + tok + "'");
        return value;
    };

    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ss(line);
        std::string keyword;
        if (!(ss >> keyword) || keyword[0] == '#')
            continue;
        if (keyword == "v") {
            std::string xs, ys, zs;
            require(static_cast<bool>(ss >> xs >> ys >> zs), errc::parse_error,
                    origin + ":" + std::to_string(line_no) + ": malformed vertex");
            mesh.vertices.emplace_back(parse_double(xs), parse_double(ys), parse_double(zs));
        } else if (keyword == "vt") {
            std::string us, vs;
            require(static_cast<bool>(ss >> us >> vs), errc::parse_error,
                    origin + ":" + std::to_string(line_no) + ": malformed uv");
            uvs.emplace_back(parse_double(us), parse_double(vs));
        } else if (keyword == "g") {
            std::string group;
            require(static_cast<bool>(ss >> group), errc::parse_error,
                    origin + ":" + std::to_string(line_no) + ": empty group");
            int part = -1;
            if (group.size() == 7 && group.rfind("part_", 0) == 0 &&
                std::isdigit(group[5]) && std::isdigit(group[6]))
                part = (group[5] - '0') * 10 + (group[6] - '0');
            require(part >= 0 && part < PartId::kPartCount, errc::unknown_group,
                    origin + ":" + std::to_string(line_no) + ": group '" + group + "'");
            active_part = part;
        } else if (keyword == "f") {
            require(active_part >= 0, errc::unknown_group,
                    origin + ":" + std::to_string(line_no) + ": face before any part group");
            std::array<std::uint32_t, 3> face{};
            std::array<Vec2, 3> uv{};
            for (int c = 0; c < 3; ++c) {
                std::string corner;
                require(static_cast<bool>(ss >> corner), errc::parse_error,
                        origin + ":" + std::to_string(line_no) + ": face needs 3 corners");
                const auto slash = corner.find('/');
                require(slash != std::string::npos && corner.find('/', slash + 1) == std::string::npos,
                        errc::parse_error,
                        origin + ":" + std::to_string(line_no) + ": corner must be v/vt");
                long vi = 0, ti = 0;
                try {
                    vi = std::stol(corner.substr(0, slash));
                    ti = std::stol(corner.substr(slash + 1));
                } catch (const std::exception&) {
                    throw Error(errc::parse_error, origin + ":" + std::to_string(line_no) +
                                                       ": bad face index '" + corner + "'");
                }
                require(vi >= 1 && static_cast<size_t>(vi) <= mesh.vertices.size(),
                        errc::index_out_of_range,
                        origin + ":" + std::to_string(line_no) + ": vertex index " +
                            std::to_string(vi) + " of " + std::to_string(mesh.vertices.size()));
                require(ti >= 1 && static_cast<size_t>(ti) <= uvs.size(), errc::index_out_of_range,
                        origin + ":" + std::to_string(line_no) + ": uv index " +
                            std::to_string(ti) + " of " + std::to_string(uvs.size()));
                face[c] = static_cast<std::uint32_t>(vi - 1);
                uv[c] = uvs[static_cast<size_t>(ti - 1)];
            }
            std::string extra;
            require(!(ss >> extra), errc::parse_error,
                    origin + ":" + std::to_string(line_no) + ": non-triangular face");
            mesh.faces.push_back(face);
            mesh.corner_uv.push_back(uv);
            mesh.face_part.push_back(PartId(active_part));
        } else if (keyword == "o") {
            ss >> mesh.name;
        } else {
            throw Error(errc::parse_error, origin + ":" + std::to_string(line_no) +
                                               ": unsupported record '" + keyword + "'");
        }
    }
    mesh.validate();
    return mesh;
}

void write_obj(std::ostream& out, const Mesh& mesh) {
    if (!mesh.name.empty())
        out << "o " << mesh.name << "\n";
    for (const Vec3& v : mesh.vertices)
        out << "v " << format_double(v.x()) << " " << format_double(v.y()) << " "
            << format_double(v.z()) << "\n";

    // Deduplicate identical uv records; keyed on exact bit patterns.
    std::map<std::pair<double, double>, size_t> uv_index;
    std::vector<std::array<size_t, 3>> face_uv(mesh.face_count());
    for (size_t fi = 0; fi < mesh.face_count(); ++fi) {
        for (int c = 0; c < 3; ++c) {
            const Vec2& uv = mesh.corner_uv[fi][c];
            const auto key = std::make_pair(uv.x(), uv.y());
            auto it = uv_index.find(key);
            if (it == uv_index.end()) {
                it = uv_index.emplace(key, uv_index.size()).first;
                out << "vt " << format_double(uv.x()) << " " << format_double(uv.y()) << "\n";
            }
            face_uv[fi][c] = it->second;
        }
    }

    int active_part = -1;
    for (size_t fi = 0; fi < mesh.face_count(); ++fi) {
        if (mesh.face_part[fi].value() != active_part) {
            active_part = mesh.face_part[fi].value();
            out << "g part_" << (active_part < 10 ? "0" : "") << active_part << "\n";
        }
        out << "f";
        for (int c = 0; c < 3; ++c)
            out << " " << mesh.faces[fi][c] + 1 << "/" << face_uv[fi][c] + 1;
        out << "\n";
    }
}

} // namespace

Mesh load_mesh(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), errc::io_error, "cannot open mesh: " + path.string());
    return parse_obj(in, path.string());
}

void save_mesh(const std::filesystem::path& path, const Mesh& mesh) {
    std::ofstream out(path);
    require(out.good(), errc::io_error, "cannot open for writing: " + path.string());
    write_obj(out, mesh);
    require(out.good(), errc::io_error, "short write: " + path.string());
}

Mesh mesh_from_obj(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    return parse_obj(in, origin);
}

std::string mesh_to_obj(const Mesh& mesh) {
    std::ostringstream out;
    write_obj(out, mesh);
    return out.str();
}

void save_ply(const std::filesystem::path& path, const Mesh& mesh) {
    std::ofstream out(path);
    require(out.good(), errc::io_error, "cannot open for writing: " + path.string());
    out << "ply\nformat ascii 1.0\n";
    out << "element vertex " << mesh.vertex_count() << "\n";
    out << "property double x\nproperty double y\nproperty double z\n";
    out << "element face " << mesh.face_count() << "\n";
    out << "property list uchar uint vertex_indices\n";
    out << "property int part\n";
    out << "end_header\n";
    for (const Vec3& v : mesh.vertices)
        out << format_double(v.x()) << " " << format_double(v.y()) << " " << format_double(v.z())
            << "\n";
    for (size_t fi = 0; fi < mesh.face_count(); ++fi) {
        const auto& f = mesh.faces[fi];
        out << "3 " << f[0] << " " << f[1] << " " << f[2] << " " << mesh.face_part[fi].value()
            << "\n";
    }
    require(out.good(), errc::io_error, "short write: " + path.string());
}

std::vector<Vec3> mesh_gradient(const Mesh& mesh) {
    const auto adjacency = vertex_adjacency(mesh);
    std::vector<Vec3> gradient(mesh.vertex_count());
    for (size_t i = 0; i < adjacency.size(); ++i) {
        require(!adjacency[i].empty(), errc::isolated_vertex,
                "vertex " + std::to_string(i) + " belongs to no face");
        Vec3 mean = Vec3::Zero();
        for (std::uint32_t j : adjacency[i])
            mean += mesh.vertices[j];
        mean /= static_cast<double>(adjacency[i].size());
        gradient[i] = mesh.vertices[i] - mean;
    }
    return gradient;
}

SymmetryPairs symmetry_map(const Mesh& mesh, const SymmetryPlane& plane, double tol) {
    require(tol > 0.0, errc::invalid_argument, "symmetry tolerance must be positive");
    SymmetryPairs result;
    const std::uint32_t n = static_cast<std::uint32_t>(mesh.vertex_count());
    if (n == 0)
        return result;

    // Hash grid over vertex positions; cell >= tol so a 3^3 neighborhood
    // covers every candidate within tol.
    const auto [lo, hi] = mesh.bounding_box();
    const double cell = std::max(tol, (hi - lo).norm() / 64.0 + 1e-300);
    const auto key_of = [&](const Vec3& p) {
        const auto q = [&](double v, double o) { return static_cast<long long>(std::floor((v - o) / cell)); };
        return std::tuple<long long, long long, long long>(q(p.x(), lo.x()), q(p.y(), lo.y()),
                                                           q(p.z(), lo.z()));
    };
    std::map<std::tuple<long long, long long, long long>, std::vector<std::uint32_t>> grid;
    for (std::uint32_t i = 0; i < n; ++i)
        grid[key_of(mesh.vertices[i])].push_back(i);

    const auto nearest_within_tol = [&](const Vec3& p) -> std::int64_t {
        const auto [kx, ky, kz] = key_of(p);
        std::int64_t best = -1;
        double best_d2 = tol * tol;
        for (long long dx = -1; dx <= 1; ++dx)
            for (long long dy = -1; dy <= 1; ++dy)
                for (long long dz = -1; dz <= 1; ++dz) {
                    const auto it = grid.find({kx + dx, ky + dy, kz + dz});
                    if (it == grid.end())
                        continue;
                    for (std::uint32_t j : it->second) {
                        const double d2 = (mesh.vertices[j] - p).squaredNorm();
                        if (d2 < best_d2 || (d2 == best_d2 && best >= 0 && j < best)) {
                            best_d2 = d2;
                            best = j;
                        }
                    }
                }
        return best;
    };

    std::vector<std::int64_t> match(n, -1);
    for (std::uint32_t i = 0; i < n; ++i)
        match[i] = nearest_within_tol(plane.reflect(mesh.vertices[i]));

    for (std::uint32_t i = 0; i < n; ++i) {
        const std::int64_t j = match[i];
        if (j >= 0 && match[static_cast<size_t>(j)] == static_cast<std::int64_t>(i))
            result.pairs.emplace_back(i, static_cast<std::uint32_t>(j));
        else
            result.unpaired.push_back(i);
    }
    return result;
}

} // namespace carfit
