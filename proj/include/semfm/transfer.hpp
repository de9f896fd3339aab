#pragma once

#include "error.hpp"
#include "fmap.hpp"
#include "mesh.hpp"
#include "semantics.hpp"
#include "spectral.hpp"

#include <algorithm>
#include <iterator>
#include <random>
#include <string>

namespace semfm {

/// Sorted, duplicate-free, non-empty vertex set on a named mesh.
class AffordanceRegion {
public:
    AffordanceRegion(std::string mesh_id, std::vector<int> vertices, int num_vertices = -1)
        : mesh_id_(std::move(mesh_id)), vertices_(std::move(vertices))
    {
        std::sort(vertices_.begin(), vertices_.end());
        vertices_.erase(std::unique(vertices_.begin(), vertices_.end()), vertices_.end());
        if (vertices_.empty()) throw ArgumentError("AffordanceRegion: empty region on '" + mesh_id_ + "'");
        if (vertices_.front() < 0 || (num_vertices >= 0 && vertices_.back() >= num_vertices))
            throw ArgumentError("AffordanceRegion: vertex index out of range on '" + mesh_id_ + "'");
    }

    const std::string& mesh_id() const noexcept { return mesh_id_; }
    const std::vector<int>& vertices() const noexcept { return vertices_; }
    int size() const noexcept { return static_cast<int>(vertices_.size()); }

    std::vector<bool> mask(int num_vertices) const
    {
        std::vector<bool> m(static_cast<std::size_t>(num_vertices), false);
        for (int v : vertices_) m[static_cast<std::size_t>(v)] = true;
        return m;
    }

    Vector indicator(int num_vertices) const
    {
        Vector f = Vector::Zero(num_vertices);
        for (int v : vertices_) f[v] = 1.0;
        return f;
    }

private:
    std::string mesh_id_;
    std::vector<int> vertices_;
};

/// Image of the region under T, on `target_id`.
inline AffordanceRegion transfer_region_pointwise(const PointwiseMap& T, const AffordanceRegion& region,
                                                  std::string target_id)
{
    std::vector<int> out;
    out.reserve(region.vertices().size());
    for (int v : region.vertices()) {
        if (v >= T.size()) throw ArgumentError("transfer_region_pointwise: region vertex outside the map domain");
        out.push_back(T(v));
    }
    return AffordanceRegion(std::move(target_id), std::move(out));
}

///
/// Spectral transfer: the region indicator is projected on shape 1, carried
/// to shape 2 with C^T, reconstructed, and thresholded at
/// threshold_fraction * max.
///
inline AffordanceRegion transfer_region_indicator(const SpectralBasis& b1, const SpectralBasis& b2, const Matrix& C,
                                                  const AffordanceRegion& region, double threshold_fraction,
                                                  std::string target_id)
{
    if (!(threshold_fraction > 0.0 && threshold_fraction <= 1.0))
        throw ArgumentError("transfer_region_indicator: threshold_fraction must lie in (0, 1]");
    const int k = static_cast<int>(C.rows());
    detail::require_dim(b1, b2, k, "transfer_region_indicator");
    const Vector f1 = region.indicator(b1.num_vertices());
    const Vector a1 = b1.phi(k).transpose() * b1.mass.cwiseProduct(f1);
    const Vector g2 = b2.phi(k) * (C.transpose() * a1);
    const double peak = g2.maxCoeff();
    std::vector<int> out;
    if (peak > 0.0)
        for (Eigen::Index v = 0; v < g2.size(); ++v)
            if (g2[v] >= threshold_fraction * peak) out.push_back(static_cast<int>(v));
    if (out.empty())
        throw NumericError("transfer_region_indicator: empty region after thresholding; lower the threshold");
    return AffordanceRegion(std::move(target_id), std::move(out));
}

inline double iou(const AffordanceRegion& a, const AffordanceRegion& b)
{
    if (a.mesh_id() != b.mesh_id())
        throw ArgumentError("iou: regions live on different meshes ('" + a.mesh_id() + "' vs '" + b.mesh_id() + "')");
    std::vector<int> inter;
    std::set_intersection(a.vertices().begin(), a.vertices().end(), b.vertices().begin(), b.vertices().end(),
                          std::back_inserter(inter));
    const std::size_t uni = a.vertices().size() + b.vertices().size() - inter.size();
    return static_cast<double>(inter.size()) / static_cast<double>(uni);
}

struct TransferReport {
    std::string source;
    std::string target;
    std::optional<double> iou; // empty when no ground truth was supplied
    double runtime_seconds = 0.0;
    int alpha = 0;
    std::vector<double> anchor_similarities;
    std::string mode = "pointwise"; // pointwise | indicator
    std::string method = "semfm";   // semfm | fm-wks
    std::optional<double> median_geodesic_error;
};

/// Mean IoU over all N(N-1) ordered pairs of N objects.
inline double category_average_iou(std::span<const TransferReport> reports, int num_objects)
{
    const std::size_t expected = static_cast<std::size_t>(num_objects) * static_cast<std::size_t>(num_objects - 1);
    if (num_objects < 2 || reports.size() != expected)
        throw ArgumentError("category_average_iou: expected " + std::to_string(expected) + " reports, got " +
                            std::to_string(reports.size()));
    // summed in sorted order so the mean does not depend on report order
    std::vector<double> values;
    values.reserve(reports.size());
    for (const auto& r : reports) {
        if (!r.iou) throw ArgumentError("category_average_iou: report without IoU");
        values.push_back(*r.iou);
    }
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

inline constexpr int kDiameterSamples = 8;

/// Largest graph distance seen from kDiameterSamples farthest-point sources.
inline double geodesic_diameter_estimate(const EdgeGraph& graph, std::uint64_t seed = 0)
{
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(0, graph.num_vertices() - 1);
    int source = pick(rng);
    double diameter = 0.0;
    for (int s = 0; s < kDiameterSamples; ++s) {
        const int src[1] = {source};
        const auto d = graph.distances(src);
        int far = source;
        double far_d = 0.0;
        for (int v = 0; v < graph.num_vertices(); ++v) {
            if (std::isfinite(d[v]) && d[v] > far_d) {
                far_d = d[v];
                far = v;
            }
        }
        diameter = std::max(diameter, far_d);
        source = far;
    }
    return diameter;
}

///
/// Per-vertex graph distance on shape 2 between T(i) and T_gt(i), divided by
/// the diameter estimate. Disconnected pairs stay +inf.
///
inline std::vector<double> geodesic_error(const PointwiseMap& T, const PointwiseMap& T_gt, const TriangleMesh& mesh2,
                                          std::uint64_t seed = 0)
{
    if (T.size() != T_gt.size()) throw ArgumentError("geodesic_error: maps cover different vertex counts");
    const EdgeGraph graph(mesh2);
    const double diameter = geodesic_diameter_estimate(graph, seed);
    if (!(diameter > 0.0)) throw NumericError("geodesic_error: zero diameter");
    std::vector<double> err(static_cast<std::size_t>(T.size()), 0.0);
    for (int i = 0; i < T.size(); ++i) {
        if (T(i) == T_gt(i)) continue;
        err[static_cast<std::size_t>(i)] = graph.distance(T_gt(i), T(i)) / diameter;
    }
    return err;
}

} // namespace semfm
