#pragma once

// Area-weighted surface sampling and a uniform-grid radius index.

#include "mesh.hpp"

#include <cstdint>
#include <random>
#include <unordered_map>

namespace semfm {

struct SurfaceSample {
    int face;
    Eigen::Vector3d barycentric;
    Eigen::Vector3d position;
};

///
/// Draws `count` points uniformly with respect to surface area. `face_filter`,
/// when non-empty, restricts sampling to faces whose flag is true.
///
inline std::vector<SurfaceSample> sample_surface(const TriangleMesh& mesh, int count, std::mt19937_64& rng,
                                                 const std::vector<bool>& face_filter = {})
{
    std::vector<double> cdf(static_cast<std::size_t>(mesh.num_faces()));
    double total = 0.0;
    for (int f = 0; f < mesh.num_faces(); ++f) {
        if (face_filter.empty() || face_filter[f]) total += mesh.face_area(f);
        cdf[f] = total;
    }
    if (!(total > 0.0)) throw ArgumentError("sample_surface: no eligible faces");
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<SurfaceSample> out;
    out.reserve(static_cast<std::size_t>(std::max(count, 0)));
    for (int s = 0; s < count; ++s) {
        const double u = uni(rng) * total;
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        if (it == cdf.end()) --it;
        // skip filtered-out faces that share the cumulative value
        while (!face_filter.empty() && !face_filter[static_cast<std::size_t>(it - cdf.begin())]) ++it;
        const int f = static_cast<int>(it - cdf.begin());
        double r1 = uni(rng), r2 = uni(rng);
        if (r1 + r2 > 1.0) {
            r1 = 1.0 - r1;
            r2 = 1.0 - r2;
        }
        const Eigen::Vector3d bary(1.0 - r1 - r2, r1, r2);
        const auto& F = mesh.faces();
        const Eigen::Vector3d p =
            bary[0] * mesh.vertex(F(f, 0)) + bary[1] * mesh.vertex(F(f, 1)) + bary[2] * mesh.vertex(F(f, 2));
        out.push_back({f, bary, p});
    }
    return out;
}

///
/// Hash grid over a fixed point set for radius queries. Results come back in
/// ascending point index, so sums over them are order-deterministic.
///
class PointGrid {
public:
    PointGrid(const Points& points, double cell) : points_(points), cell_(cell)
    {
        if (!(cell > 0.0)) throw ArgumentError("PointGrid: cell size must be positive");
        for (Eigen::Index i = 0; i < points.rows(); ++i)
            cells_[cell_of(points.row(i).transpose())].push_back(static_cast<int>(i));
    }

    /// Indices of points within `radius` (<= cell size) of `q`, ascending.
    std::vector<int> within(const Eigen::Vector3d& q, double radius) const
    {
        std::vector<int> hits;
        const auto c = cell_of(q);
        const int reach = static_cast<int>(std::ceil(radius / cell_));
        for (int dx = -reach; dx <= reach; ++dx)
            for (int dy = -reach; dy <= reach; ++dy)
                for (int dz = -reach; dz <= reach; ++dz) {
                    const auto it = cells_.find(Cell{c[0] + dx, c[1] + dy, c[2] + dz});
                    if (it == cells_.end()) continue;
                    for (int i : it->second)
                        if ((points_.row(i).transpose() - q).norm() <= radius) hits.push_back(i);
                }
        std::sort(hits.begin(), hits.end());
        return hits;
    }

private:
    std::array<std::int64_t, 3> cell_of(const Eigen::Vector3d& p) const
    {
        return {static_cast<std::int64_t>(std::floor(p[0] / cell_)), static_cast<std::int64_t>(std::floor(p[1] / cell_)),
                static_cast<std::int64_t>(std::floor(p[2] / cell_))};
    }
    using Cell = std::array<std::int64_t, 3>;
    struct CellHash {
        std::size_t operator()(const Cell& c) const
        {
            const auto h = [](std::int64_t v) { return static_cast<std::uint64_t>(v) * 0x9E3779B97F4A7C15ULL; };
            return static_cast<std::size_t>(h(c[0]) ^ (h(c[1]) >> 1) ^ (h(c[2]) << 1));
        }
    };

    const Points& points_;
    double cell_;
    std::unordered_map<Cell, std::vector<int>, CellHash> cells_;
};

/// Index of the nearest point (lowest index on ties), brute force.
inline int nearest_point(const Points& points, const Eigen::Vector3d& q)
{
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        const double d = (points.row(i).transpose() - q).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(i);
        }
    }
    return best;
}

} // namespace semfm
