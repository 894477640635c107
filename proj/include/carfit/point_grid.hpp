#pragma once

#include <limits>
#include <map>
#include <tuple>
#include <vector>

#include "carfit/geometry.hpp"

namespace carfit {

/// Hash grid over a fixed point set for nearest-neighbor queries. Ties are
/// broken toward the lower point index, so results are deterministic.
class PointGrid {
public:
    explicit PointGrid(const std::vector<Vec3>& points, double cell_hint = 0.0)
        : points_(&points) {
        Vec3 lo = Vec3::Constant(1e300), hi = Vec3::Constant(-1e300);
        for (const Vec3& p : points) {
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
        lo_ = points.empty() ? Vec3::Zero() : lo;
        const double span = points.empty() ? 1.0 : (hi - lo).norm();
        cell_ = std::max(cell_hint, std::max(span / 32.0, 1e-9));
        for (std::uint32_t i = 0; i < points.size(); ++i)
            cells_[key(points[i])].push_back(i);
    }

    bool empty() const { return points_->empty(); }

    /// Index of the nearest point; call only on a non-empty grid.
    std::uint32_t nearest(const Vec3& q) const {
        double best_d2 = std::numeric_limits<double>::infinity();
        std::uint32_t best = 0;
        nearest_within(q, std::numeric_limits<double>::infinity(), best, best_d2);
        return best;
    }

    /// Nearest point within `radius`, or -1 when none qualifies.
    std::int64_t nearest_within(const Vec3& q, double radius) const {
        double best_d2 = radius * radius;
        std::uint32_t best = 0;
        if (nearest_within(q, radius, best, best_d2))
            return best;
        return -1;
    }

private:
    using Key = std::tuple<long long, long long, long long>;

    Key key(const Vec3& p) const {
        return {static_cast<long long>(std::floor((p.x() - lo_.x()) / cell_)),
                static_cast<long long>(std::floor((p.y() - lo_.y()) / cell_)),
                static_cast<long long>(std::floor((p.z() - lo_.z()) / cell_))};
    }

    bool nearest_within(const Vec3& q, double radius, std::uint32_t& best, double& best_d2) const {
        if (points_->empty())
            return false;
        const auto [kx, ky, kz] = key(q);
        bool found = false;
        const long long max_radius =
            std::isfinite(radius) ? static_cast<long long>(radius / cell_) + 2 : 1 << 20;
        for (long long ring = 1; ring <= max_radius + 1; ++ring) {
            for (long long dx = -ring; dx <= ring; ++dx)
                for (long long dy = -ring; dy <= ring; ++dy)
                    for (long long dz = -ring; dz <= ring; ++dz) {
                        if (ring > 1 && std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring)
                            continue; // only the new shell after the first pass
                        const auto it = cells_.find({kx + dx, ky + dy, kz + dz});
                        if (it == cells_.end())
                            continue;
                        for (std::uint32_t i : it->second) {
                            const double d2 = ((*points_)[i] - q).squaredNorm();
                            if (d2 < best_d2 || (d2 == best_d2 && found && i < best)) {
                                best_d2 = d2;
                                best = i;
                                found = true;
                            }
                        }
                    }
            // a hit within ring*cell distance cannot be beaten by farther shells
            if (found && best_d2 <= (ring * cell_) * (ring * cell_))
                break;
            if (!found && ring > max_radius)
                break;
        }
        return found;
    }

    const std::vector<Vec3>* points_;
    Vec3 lo_ = Vec3::Zero();
    double cell_ = 1.0;
    std::map<Key, std::vector<std::uint32_t>> cells_;
};

} // namespace carfit
