#include "carfit/synthetic.hpp"

#include <cmath>

namespace carfit {

namespace {

// part ids
constexpr int kFrontFace = 0;
constexpr int kHood = 1;
constexpr int kWindshield = 2;
constexpr int kRoof = 3;
constexpr int kRearWindow = 4;
constexpr int kTrunk = 5;
constexpr int kRearFace = 6;
constexpr int kLeftPanel = 7;
constexpr int kLeftDoor = 8;
constexpr int kRightPanel = 9;
constexpr int kRightDoor = 10;
constexpr int kLeftWindow = 11;
constexpr int kRightWindow = 12;
constexpr int kChassis = 13;
constexpr int kWheelFL = 14;
constexpr int kWheelFR = 15;
constexpr int kWheelRL = 16;
constexpr int kWheelRR = 17;

const char* kPartNames[PartId::kPartCount + 1] = {
    "front_face", "hood",       "windshield",   "roof",         "rear_window",
    "trunk",      "rear_face",  "left_panel",   "left_door",    "right_panel",
    "right_door", "left_window", "right_window", "chassis",      "wheel_front_left",
    "wheel_front_right", "wheel_rear_left", "wheel_rear_right", "background"};

struct AtlasMapper {
    Vec2 lo, hi;
    Vec2 map(double u, double v) const {
        return Vec2(lo.x() + u * (hi.x() - lo.x()), lo.y() + v * (hi.y() - lo.y()));
    }
};

AtlasMapper mapper_for(int part) {
    const auto [lo, hi] = atlas_cell(PartId(part));
    return AtlasMapper{lo, hi};
}

struct Builder {
    Mesh mesh;

    std::uint32_t add_vertex(const Vec3& p) {
        mesh.vertices.push_back(p);
        return static_cast<std::uint32_t>(mesh.vertices.size() - 1);
    }

    void add_face(std::uint32_t a, std::uint32_t b, std::uint32_t c, int part, const Vec2& ua,
                  const Vec2& ub, const Vec2& uc) {
        mesh.faces.push_back({a, b, c});
        mesh.face_part.push_back(PartId(part));
        mesh.corner_uv.push_back({ua, ub, uc});
    }

    void add_quad(std::uint32_t a, std::uint32_t b, std::uint32_t c, std::uint32_t d, int part,
                  const Vec2& ua, const Vec2& ub, const Vec2& uc, const Vec2& ud) {
        add_face(a, b, c, part, ua, ub, uc);
        add_face(a, c, d, part, ua, uc, ud);
    }
};

} // namespace

std::pair<Vec2, Vec2> atlas_cell(PartId part) {
    require(!part.is_background(), errc::invalid_argument, "background has no atlas cell");
    const int col = part.value() % 5;
    const int row = part.value() / 5;
    const double cw = 0.2, ch = 0.25;
    const Vec2 lo(col * cw + 0.015, row * ch + 0.020);
    const Vec2 hi(col * cw + 0.185, row * ch + 0.230);
    return {lo, hi};
}

const char* part_name(PartId part) { return kPartNames[part.value()]; }

Mesh make_vehicle(const VehicleParams& p) {
    require(p.resolution >= 1, errc::invalid_argument, "resolution must be >= 1");
    const int m = p.resolution;
    const double L = p.length, W = p.width, H = p.height;
    const double z_base = p.base * H;
    const double z_belt = p.belt * H;
    const double z_lip = z_belt + p.lip * (H - z_belt);

    // profile regions rear -> front, segment counts scale with resolution
    const int seg_trunk = 4 * m, seg_rwin = 3 * m, seg_roof = 6 * m, seg_wshield = 3 * m,
              seg_hood = 4 * m;
    const int n_seg = seg_trunk + seg_rwin + seg_roof + seg_wshield + seg_hood;
    const double x_rear = -L / 2;
    const double x_tf = x_rear + p.trunk_frac * L;
    const double x_rb = x_tf + p.rear_window_frac * L;
    const double x_rf = x_rb + p.roof_frac * L;
    const double x_wsb = x_rf + p.windshield_frac * L;
    const double x_front = L / 2;

    std::vector<double> station_x;
    std::vector<double> station_top;
    const auto emit_region = [&](double x0, double x1, double z0, double z1, int segs, bool first) {
        for (int i = first ? 0 : 1; i <= segs; ++i) {
            const double t = static_cast<double>(i) / segs;
            station_x.push_back(x0 + t * (x1 - x0));
            station_top.push_back(z0 + t * (z1 - z0));
        }
    };
    emit_region(x_rear, x_tf, z_lip, z_lip, seg_trunk, true);
    emit_region(x_tf, x_rb, z_lip, H, seg_rwin, false);
    emit_region(x_rb, x_rf, H, H, seg_roof, false);
    emit_region(x_rf, x_wsb, H, z_lip, seg_wshield, false);
    emit_region(x_wsb, x_front, z_lip, z_lip, seg_hood, false);

    // ring segment counts: left-lower, left-upper, top, right-upper,
    // right-lower, bottom
    const int r_ll = 2 * m, r_lu = 2 * m, r_top = 6 * m, r_bot = 6 * m;
    const int ring_n = r_ll + r_lu + r_top + r_lu + r_ll + r_bot;

    // tumblehome/taper: the hull is widest at the belt line mid-body and
    // narrows toward roof, underbody, and bumpers, which keeps the width
    // observable from a single side view
    const auto width_factor = [&](double x, double z) {
        const double tz = (z - z_belt) / std::max(H - z_belt, 1e-9);
        const double bz = (z_belt - z) / std::max(z_belt, 1e-9);
        const double vertical = z >= z_belt ? tz : bz;
        const double tx = 2.0 * x / L;
        return 1.0 - p.tumblehome * vertical * vertical - p.taper * tx * tx;
    };

    const auto ring_point = [&](int node, double x, double z_top) -> Eigen::Vector2d {
        // (y, z) of ring node; node in [0, ring_n)
        const auto shaped = [&](double y, double z) -> Eigen::Vector2d {
            return {y * width_factor(x, z), z};
        };
        int k = node;
        if (k < r_ll) // left lower, bottom -> belt
            return shaped(W / 2, z_base + (z_belt - z_base) * k / r_ll);
        k -= r_ll;
        if (k < r_lu) // left upper, belt -> top
            return shaped(W / 2, z_belt + (z_top - z_belt) * k / r_lu);
        k -= r_lu;
        if (k < r_top) // top, +W/2 -> -W/2
            return shaped(W / 2 - W * k / r_top, z_top);
        k -= r_top;
        if (k < r_lu) // right upper, top -> belt
            return shaped(-W / 2, z_top - (z_top - z_belt) * k / r_lu);
        k -= r_lu;
        if (k < r_ll) // right lower, belt -> bottom
            return shaped(-W / 2, z_belt - (z_belt - z_base) * k / r_ll);
        k -= r_ll;
        // bottom, -W/2 -> +W/2
        return shaped(-W / 2 + W * k / r_bot, z_base);
    };

    Builder b;
    b.mesh.name = "vehicle";

    // body vertices: station-major
    const int n_station = n_seg + 1;
    for (int s = 0; s < n_station; ++s)
        for (int r = 0; r < ring_n; ++r) {
            const auto yz = ring_point(r, station_x[s], station_top[s]);
            b.add_vertex(Vec3(station_x[s], yz.x(), yz.y()));
        }
    const auto body_vertex = [&](int s, int r) {
        return static_cast<std::uint32_t>(s * ring_n + (r % ring_n));
    };

    // sweep faces; part derived from (station segment, ring segment)
    struct IndexRect {
        int s0, s1, r0, r1; // inclusive segment bounds of the part
    };
    const auto part_of = [&](int si, int rj, IndexRect& rect) -> int {
        const int cab0 = seg_trunk, cab1 = seg_trunk + seg_rwin, cab2 = cab1 + seg_roof,
                  cab3 = cab2 + seg_wshield;
        const int half = n_seg / 2;
        if (rj < r_ll) { // left lower
            if (si < half) {
                rect = {0, half - 1, 0, r_ll - 1};
                return kLeftDoor;
            }
            rect = {half, n_seg - 1, 0, r_ll - 1};
            return kLeftPanel;
        }
        if (rj < r_ll + r_lu) { // left upper
            rect = {0, n_seg - 1, r_ll, r_ll + r_lu - 1};
            return kLeftWindow;
        }
        if (rj < r_ll + r_lu + r_top) { // top, by profile region
            const int r0 = r_ll + r_lu, r1 = r_ll + r_lu + r_top - 1;
            if (si < cab0) {
                rect = {0, cab0 - 1, r0, r1};
                return kTrunk;
            }
            if (si < cab1) {
                rect = {cab0, cab1 - 1, r0, r1};
                return kRearWindow;
            }
            if (si < cab2) {
                rect = {cab1, cab2 - 1, r0, r1};
                return kRoof;
            }
            if (si < cab3) {
                rect = {cab2, cab3 - 1, r0, r1};
                return kWindshield;
            }
            rect = {cab3, n_seg - 1, r0, r1};
            return kHood;
        }
        if (rj < r_ll + 2 * r_lu + r_top) { // right upper
            rect = {0, n_seg - 1, r_ll + r_lu + r_top, r_ll + 2 * r_lu + r_top - 1};
            return kRightWindow;
        }
        if (rj < 2 * r_ll + 2 * r_lu + r_top) { // right lower
            const int r0 = r_ll + 2 * r_lu + r_top, r1 = 2 * r_ll + 2 * r_lu + r_top - 1;
            if (si < half) {
                rect = {0, half - 1, r0, r1};
                return kRightDoor;
            }
            rect = {half, n_seg - 1, r0, r1};
            return kRightPanel;
        }
        rect = {0, n_seg - 1, 2 * r_ll + 2 * r_lu + r_top, ring_n - 1}; // bottom
        return kChassis;
    };

    for (int si = 0; si < n_seg; ++si) {
        for (int rj = 0; rj < ring_n; ++rj) {
            IndexRect rect{};
            const int part = part_of(si, rj, rect);
            const AtlasMapper atlas = mapper_for(part);
            const auto corner_uv = [&](int s, int r) {
                const double u = static_cast<double>(s - rect.s0) / (rect.s1 - rect.s0 + 1);
                const double v = static_cast<double>(r - rect.r0) / (rect.r1 - rect.r0 + 1);
                return atlas.map(u, v);
            };
            b.add_quad(body_vertex(si, rj), body_vertex(si, rj + 1), body_vertex(si + 1, rj + 1),
                       body_vertex(si + 1, rj), part, corner_uv(si, rj), corner_uv(si, rj + 1),
                       corner_uv(si + 1, rj + 1), corner_uv(si + 1, rj));
        }
    }

    // front and rear caps: triangle fans around a center vertex; UVs use
    // ring-index disk coordinates so they are identical across the family
    const auto add_cap = [&](int s, int part) {
        const double z_top = station_top[s];
        const double outward = (s == 0 ? -1.0 : 1.0) * p.cap_bulge * L;
        const std::uint32_t center =
            b.add_vertex(Vec3(station_x[s] + outward, 0.0, (z_base + z_top) / 2));
        const AtlasMapper atlas = mapper_for(part);
        const auto cap_uv = [&](int rj) {
            const double angle = 2 * M_PI * rj / ring_n;
            return atlas.map(0.5 + 0.45 * std::cos(angle), 0.5 + 0.45 * std::sin(angle));
        };
        for (int rj = 0; rj < ring_n; ++rj) {
            const std::uint32_t a = body_vertex(s, rj);
            const std::uint32_t c = body_vertex(s, rj + 1);
            b.add_face(center, a, c, part, atlas.map(0.5, 0.5), cap_uv(rj), cap_uv(rj + 1));
        }
    };
    add_cap(n_seg, kFrontFace);
    add_cap(0, kRearFace);

    // wheels: short cylinders, axis along y
    const int wheel_seg = 16 * m;
    const auto add_wheel = [&](int part, double x_c, double side) {
        const double y_out = side * (W / 2);
        const double y_in = side * (W / 2 - p.wheel_width);
        const double r = p.wheel_radius;
        const Vec3 center(x_c, 0.0, r);
        const AtlasMapper atlas = mapper_for(part);

        std::vector<std::uint32_t> ring_in(wheel_seg), ring_out(wheel_seg);
        for (int k = 0; k < wheel_seg; ++k) {
            const double a = 2 * M_PI * k / wheel_seg;
            const Vec3 rim(x_c + r * std::cos(a), 0.0, r + r * std::sin(a));
            ring_in[k] = b.add_vertex(Vec3(rim.x(), y_in, rim.z()));
            ring_out[k] = b.add_vertex(Vec3(rim.x(), y_out, rim.z()));
        }
        const std::uint32_t cap_in = b.add_vertex(Vec3(x_c, y_in, r));
        const std::uint32_t cap_out = b.add_vertex(Vec3(x_c, y_out, r));

        // tread strip occupies the top of the cell; caps are two disks below
        const auto strip_uv = [&](int k, int ring) {
            return atlas.map(static_cast<double>(k) / wheel_seg, 0.58 + 0.42 * ring);
        };
        const auto disk_uv = [&](int which, double angle, double radius01) {
            const double cx = which == 0 ? 0.25 : 0.75;
            return atlas.map(cx + 0.20 * radius01 * std::cos(angle),
                             0.28 + 0.24 * radius01 * std::sin(angle));
        };
        for (int k = 0; k < wheel_seg; ++k) {
            const int k1 = (k + 1) % wheel_seg;
            const double a0 = 2 * M_PI * k / wheel_seg;
            const double a1 = 2 * M_PI * (k + 1) / wheel_seg;
            // side quad; unwrapped u so the last segment maps to [.., 1]
            const auto u_in0 = strip_uv(k, 0), u_out0 = strip_uv(k, 1);
            const AtlasMapper& am = atlas;
            const Vec2 u_in1 = am.map(static_cast<double>(k + 1) / wheel_seg, 0.58);
            const Vec2 u_out1 = am.map(static_cast<double>(k + 1) / wheel_seg, 1.0);
            b.add_quad(ring_in[k], ring_in[k1], ring_out[k1], ring_out[k], part, u_in0, u_in1,
                       u_out1, u_out0);
            b.add_face(cap_in, ring_in[k1], ring_in[k], part, disk_uv(0, 0, 0),
                       disk_uv(0, a1, 1.0), disk_uv(0, a0, 1.0));
            b.add_face(cap_out, ring_out[k], ring_out[k1], part, disk_uv(1, 0, 0),
                       disk_uv(1, a0, 1.0), disk_uv(1, a1, 1.0));
        }
    };
    add_wheel(kWheelFL, p.axle_front * L, +1.0);
    add_wheel(kWheelFR, p.axle_front * L, -1.0);
    add_wheel(kWheelRL, p.axle_rear * L, +1.0);
    add_wheel(kWheelRR, p.axle_rear * L, -1.0);

    b.mesh.validate();
    return b.mesh;
}

VehicleParams random_vehicle_params(Rng& rng, int resolution) {
    VehicleParams p;
    p.length = rng.uniform(3.9, 5.1);
    p.width = rng.uniform(1.65, 1.95);
    p.height = rng.uniform(1.38, 1.75);
    p.belt = rng.uniform(0.48, 0.58);
    p.base = rng.uniform(0.15, 0.22);
    p.lip = rng.uniform(0.06, 0.12);
    p.trunk_frac = rng.uniform(0.10, 0.20);
    p.rear_window_frac = rng.uniform(0.10, 0.16);
    p.roof_frac = rng.uniform(0.28, 0.38);
    p.windshield_frac = rng.uniform(0.12, 0.18);
    p.wheel_radius = rng.uniform(0.27, 0.35);
    p.wheel_width = rng.uniform(0.10, 0.16);
    p.axle_front = rng.uniform(0.30, 0.36);
    p.axle_rear = -rng.uniform(0.30, 0.36);
    p.tumblehome = rng.uniform(0.07, 0.11);
    p.taper = rng.uniform(0.04, 0.08);
    p.cap_bulge = rng.uniform(0.025, 0.045);
    p.resolution = resolution;
    return p;
}

std::vector<Mesh> make_vehicle_family(int count, std::uint64_t seed, int resolution) {
    Rng rng(seed);
    std::vector<Mesh> family;
    family.reserve(count);
    for (int i = 0; i < count; ++i)
        family.push_back(make_vehicle(random_vehicle_params(rng, resolution)));
    return family;
}

RgbImage make_prior_texture(int resolution, double hue_shift) {
    const auto body = [&](double t) {
        // body paint rotated by hue_shift, slightly darkened toward t=1
        const double h = std::fmod(hue_shift, 1.0) * 6.0;
        const double c = 0.55;
        const double x = c * (1.0 - std::abs(std::fmod(h, 2.0) - 1.0));
        double r = 0.35, g = 0.05, bl = 0.08;
        if (h < 1) { r = 0.3 + c; g = 0.05 + x; bl = 0.08; }
        else if (h < 2) { r = 0.3 + x; g = 0.05 + c; bl = 0.08; }
        else if (h < 3) { r = 0.08; g = 0.05 + c; bl = 0.08 + x; }
        else if (h < 4) { r = 0.08; g = 0.05 + x; bl = 0.08 + c; }
        else if (h < 5) { r = 0.3 + x; g = 0.05; bl = 0.08 + c; }
        else { r = 0.3 + c; g = 0.05; bl = 0.08 + x; }
        const double shade = 1.0 - 0.25 * t;
        return Rgb(r * shade, g * shade, bl * shade);
    };
    const auto glass = [](double t) { return Rgb(0.10 + 0.05 * t, 0.12 + 0.05 * t, 0.18); };
    const auto dark = [](double t) { return Rgb(0.06 + 0.04 * t, 0.06 + 0.04 * t, 0.07); };

    RgbImage image(resolution, resolution, Rgb(0, 0, 0));
    for (int part = 0; part < PartId::kPartCount; ++part) {
        const auto [lo, hi] = atlas_cell(PartId(part));
        const int x0 = static_cast<int>(lo.x() * resolution);
        const int x1 = static_cast<int>(hi.x() * resolution);
        const int y0 = static_cast<int>(lo.y() * resolution);
        const int y1 = static_cast<int>(hi.y() * resolution);
        for (int y = y0; y <= y1 && y < resolution; ++y) {
            for (int x = x0; x <= x1 && x < resolution; ++x) {
                const double t = static_cast<double>(x - x0) / std::max(1, x1 - x0);
                Rgb color;
                if (part == kWindshield || part == kRearWindow || part == kLeftWindow ||
                    part == kRightWindow)
                    color = glass(t);
                else if (part == kChassis || PartId(part).is_tire())
                    color = dark(t);
                else
                    color = body(t);
                image.at(x, y) = color;
            }
        }
    }
    return image;
}

} // namespace carfit
