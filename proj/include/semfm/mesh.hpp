#pragma once

#include "error.hpp"

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <limits>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace semfm {

using Points = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Faces = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Smallest face area accepted by TriangleMesh.
inline constexpr double kMinFaceArea = 1e-12;

///
/// Immutable triangle mesh. Construction validates the index, non-repetition
/// and non-degeneracy invariants; every accessor afterwards can rely on them.
///
class TriangleMesh {
public:
    TriangleMesh(Points vertices, Faces faces) : vertices_(std::move(vertices)), faces_(std::move(faces))
    {
        validate();
    }

    const Points& vertices() const noexcept { return vertices_; }
    const Faces& faces() const noexcept { return faces_; }
    int num_vertices() const noexcept { return static_cast<int>(vertices_.rows()); }
    int num_faces() const noexcept { return static_cast<int>(faces_.rows()); }

    Eigen::Vector3d vertex(int i) const { return vertices_.row(i).transpose(); }

    double face_area(int f) const
    {
        const Eigen::Vector3d a = vertex(faces_(f, 0));
        const Eigen::Vector3d b = vertex(faces_(f, 1));
        const Eigen::Vector3d c = vertex(faces_(f, 2));
        return 0.5 * (b - a).cross(c - a).norm();
    }

private:
    void validate() const
    {
        const auto nv = vertices_.rows();
        if (nv < 4) throw ArgumentError("mesh needs at least 4 vertices, got " + std::to_string(nv));
        if (faces_.rows() < 1) throw ArgumentError("mesh needs at least one face");
        if (!vertices_.allFinite()) throw ArgumentError("mesh has non-finite vertex coordinates");
        for (Eigen::Index f = 0; f < faces_.rows(); ++f) {
            for (int c = 0; c < 3; ++c) {
                const int v = faces_(f, c);
                if (v < 0 || v >= nv)
                    throw ArgumentError("face " + std::to_string(f) + " references vertex " + std::to_string(v) +
                                        " out of range [0, " + std::to_string(nv) + ")");
            }
            if (faces_(f, 0) == faces_(f, 1) || faces_(f, 1) == faces_(f, 2) || faces_(f, 0) == faces_(f, 2))
                throw ArgumentError("face " + std::to_string(f) + " repeats a vertex");
            if (!(face_area(static_cast<int>(f)) > kMinFaceArea))
                throw ArgumentError("face " + std::to_string(f) + " is degenerate (area <= 1e-12)");
        }
    }

    Points vertices_;
    Faces faces_;
};

inline double surface_area(const TriangleMesh& mesh)
{
    double total = 0.0;
    for (int f = 0; f < mesh.num_faces(); ++f) total += mesh.face_area(f);
    return total;
}

/// Lumped mass: one third of the incident triangle areas per vertex.
/// Vertices referenced by no face get zero.
inline Vector vertex_areas(const TriangleMesh& mesh)
{
    Vector areas = Vector::Zero(mesh.num_vertices());
    const auto& F = mesh.faces();
    for (int f = 0; f < mesh.num_faces(); ++f) {
        const double third = mesh.face_area(f) / 3.0;
        for (int c = 0; c < 3; ++c) areas[F(f, c)] += third;
    }
    return areas;
}

/// Unique undirected edges (i < j), sorted.
inline std::vector<std::pair<int, int>> mesh_edges(const TriangleMesh& mesh)
{
    std::vector<std::pair<int, int>> edges;
    edges.reserve(static_cast<std::size_t>(mesh.num_faces()) * 3);
    const auto& F = mesh.faces();
    for (int f = 0; f < mesh.num_faces(); ++f) {
        for (int c = 0; c < 3; ++c) {
            int a = F(f, c), b = F(f, (c + 1) % 3);
            if (a > b) std::swap(a, b);
            edges.emplace_back(a, b);
        }
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

inline double mean_edge_length(const TriangleMesh& mesh)
{
    const auto edges = mesh_edges(mesh);
    double sum = 0.0;
    for (const auto& [a, b] : edges) sum += (mesh.vertex(a) - mesh.vertex(b)).norm();
    return sum / static_cast<double>(edges.size());
}

inline double bounding_box_diagonal(const Points& pts)
{
    if (pts.rows() == 0) return 0.0;
    return (pts.colwise().maxCoeff() - pts.colwise().minCoeff()).norm();
}

/// Cotangents are clamped to this magnitude.
inline constexpr double kMaxCotangent = 1e6;
/// Corner angles below this (radians) are reported as near-degenerate.
inline constexpr double kMinAngle = 1e-6;

///
/// Cotangent stiffness matrix, PSD convention: off-diagonal (i,j) accumulates
/// -cot(theta)/2 for every corner theta opposite edge (i,j); the diagonal is
/// minus the off-diagonal row sum. Non-manifold edges simply get more terms.
///
inline SparseMatrix cotangent_laplacian(const TriangleMesh& mesh, Warnings* warnings = nullptr)
{
    const auto& F = mesh.faces();
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(mesh.num_faces()) * 12);
    int clamped = 0;
    for (int f = 0; f < mesh.num_faces(); ++f) {
        for (int c = 0; c < 3; ++c) {
            const int k = F(f, c);
            const int i = F(f, (c + 1) % 3);
            const int j = F(f, (c + 2) % 3);
            const Eigen::Vector3d e1 = mesh.vertex(i) - mesh.vertex(k);
            const Eigen::Vector3d e2 = mesh.vertex(j) - mesh.vertex(k);
            const double cross = e1.cross(e2).norm();
            const double dot = e1.dot(e2);
            const double angle = std::atan2(cross, dot);
            double cot = dot / cross;
            if (angle < kMinAngle || angle > M_PI - kMinAngle || !std::isfinite(cot)) {
                ++clamped;
                cot = std::clamp(std::isfinite(cot) ? cot : (dot >= 0 ? kMaxCotangent : -kMaxCotangent),
                                 -kMaxCotangent, kMaxCotangent);
            }
            const double w = 0.5 * cot;
            trips.emplace_back(i, j, -w);
            trips.emplace_back(j, i, -w);
            trips.emplace_back(i, i, w);
            trips.emplace_back(j, j, w);
        }
    }
    if (clamped > 0)
        warn(warnings, "cotangent_laplacian: clamped " + std::to_string(clamped) + " near-degenerate corner(s)");
    SparseMatrix L(mesh.num_vertices(), mesh.num_vertices());
    L.setFromTriplets(trips.begin(), trips.end());
    L.makeCompressed();
    return L;
}

/// Diagonal lumped mass matrix.
inline SparseMatrix mass_matrix(const TriangleMesh& mesh)
{
    const Vector a = vertex_areas(mesh);
    SparseMatrix M(a.size(), a.size());
    M.reserve(Eigen::VectorXi::Ones(a.size()));
    for (Eigen::Index i = 0; i < a.size(); ++i) M.insert(i, i) = a[i];
    M.makeCompressed();
    return M;
}

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

///
/// Edge graph of a mesh with Euclidean edge lengths, for Dijkstra queries.
///
class EdgeGraph {
public:
    explicit EdgeGraph(const TriangleMesh& mesh) : adjacency_(static_cast<std::size_t>(mesh.num_vertices()))
    {
        for (const auto& [a, b] : mesh_edges(mesh)) {
            const double len = (mesh.vertex(a) - mesh.vertex(b)).norm();
            adjacency_[a].push_back({b, len});
            adjacency_[b].push_back({a, len});
        }
    }

    int num_vertices() const noexcept { return static_cast<int>(adjacency_.size()); }

    /// Multi-source shortest-path distances. Unreachable vertices get +inf.
    std::vector<double> distances(std::span<const int> sources) const
    {
        if (sources.empty()) throw ArgumentError("graph_geodesics: empty source set");
        const int n = num_vertices();
        std::vector<double> dist(static_cast<std::size_t>(n), kUnreachable);
        Queue q;
        for (int s : sources) {
            if (s < 0 || s >= n) throw ArgumentError("graph_geodesics: source " + std::to_string(s) + " out of range");
            if (dist[s] != 0.0) {
                dist[s] = 0.0;
                q.push({0.0, s});
            }
        }
        run(q, dist, -1);
        return dist;
    }

    /// Point-to-point distance; stops as soon as the target is settled.
    double distance(int source, int target) const
    {
        if (source == target) return 0.0;
        std::vector<double> dist(adjacency_.size(), kUnreachable);
        Queue q;
        dist[source] = 0.0;
        q.push({0.0, source});
        run(q, dist, target);
        return dist[target];
    }

private:
    struct Arc {
        int to;
        double length;
    };
    using Item = std::pair<double, int>;
    using Queue = std::priority_queue<Item, std::vector<Item>, std::greater<>>;

    void run(Queue& q, std::vector<double>& dist, int stop_at) const
    {
        while (!q.empty()) {
            const auto [d, v] = q.top();
            q.pop();
            if (d > dist[v]) continue;
            if (v == stop_at) return;
            for (const Arc& arc : adjacency_[v]) {
                const double nd = d + arc.length;
                if (nd < dist[arc.to]) {
                    dist[arc.to] = nd;
                    q.push({nd, arc.to});
                }
            }
        }
    }

    std::vector<std::vector<Arc>> adjacency_;
};

inline std::vector<double> graph_geodesics(const TriangleMesh& mesh, std::span<const int> sources)
{
    return EdgeGraph(mesh).distances(sources);
}

/// FNV-1a over the raw vertex and face buffers. Used as the basis cache key.
inline std::uint64_t content_hash(const TriangleMesh& mesh)
{
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const void* data, std::size_t bytes) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < bytes; ++i) {
            h ^= p[i];
            h *= 1099511628211ULL;
        }
    };
    const std::int64_t nv = mesh.num_vertices(), nf = mesh.num_faces();
    mix(&nv, sizeof nv);
    mix(&nf, sizeof nf);
    mix(mesh.vertices().data(), sizeof(double) * static_cast<std::size_t>(mesh.vertices().size()));
    mix(mesh.faces().data(), sizeof(int) * static_cast<std::size_t>(mesh.faces().size()));
    return h;
}

} // namespace semfm
