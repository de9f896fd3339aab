#pragma once

// Procedural category benchmark: labeled implicit templates, polygonized once,
// then deformed per object so every member shares connectivity (the ground
// truth correspondence between any two members is the index identity).

#include "error.hpp"
#include "mesh.hpp"
#include "sampling.hpp"
#include "semantics.hpp"
#include "transfer.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <unordered_map>

namespace semfm {

enum class BaseShape { HandleTool, Container, BladeTool };

inline std::string to_string(BaseShape s)
{
    switch (s) {
    case BaseShape::HandleTool: return "handle-tool";
    case BaseShape::Container: return "two-part-container";
    case BaseShape::BladeTool: return "blade-tool";
    }
    return "unknown";
}

inline BaseShape parse_base_shape(const std::string& name)
{
    if (name == "handle-tool") return BaseShape::HandleTool;
    if (name == "two-part-container" || name == "container") return BaseShape::Container;
    if (name == "blade-tool") return BaseShape::BladeTool;
    throw ArgumentError("unknown base shape '" + name + "' (handle-tool, two-part-container, blade-tool)");
}

inline constexpr double kMaxAmplitude = 0.5;

struct CategorySpec {
    BaseShape base = BaseShape::HandleTool;
    int num_objects = 4;
    double amplitude = 0.25;
    int embedding_dim = 32;
    double noise = 0.1;
    std::uint64_t seed = 7;
    /// Ground-truth affordance radius as a fraction of the geodesic diameter.
    double affordance_radius = 0.15;
    /// Lifted samples drawn per object.
    int samples_per_object = 3000;

    void validate() const
    {
        if (num_objects < 2) throw ArgumentError("CategorySpec: need at least 2 objects");
        if (!(amplitude >= 0.0 && amplitude <= kMaxAmplitude))
            throw ArgumentError("CategorySpec: amplitude " + std::to_string(amplitude) +
                                " outside the stable range [0, 0.5]");
        if (!(noise >= 0.0)) throw ArgumentError("CategorySpec: noise must be >= 0");
        if (embedding_dim < 2) throw ArgumentError("CategorySpec: embedding dimension must be >= 2");
        if (!(affordance_radius >= 0.0)) throw ArgumentError("CategorySpec: affordance radius must be >= 0");
        if (samples_per_object < 1) throw ArgumentError("CategorySpec: samples_per_object must be >= 1");
    }
};

struct SyntheticObject {
    int index = 0;
    std::string id;
    TriangleMesh mesh;
    std::vector<int> part_labels;
    int num_parts = 0;
    AffordanceRegion gt_affordance;
    std::vector<int> gt_map_to_base;
};

namespace sdf {

using Vec3 = Eigen::Vector3d;

inline double smin(double a, double b, double k)
{
    const double h = std::max(k - std::abs(a - b), 0.0) / k;
    return std::min(a, b) - h * h * k * 0.25;
}

inline double capsule(const Vec3& p, const Vec3& a, const Vec3& b, double r)
{
    const Vec3 pa = p - a, ba = b - a;
    const double h = std::clamp(pa.dot(ba) / ba.dot(ba), 0.0, 1.0);
    return (pa - ba * h).norm() - r;
}

inline double round_box(const Vec3& p, const Vec3& center, const Vec3& half, double r)
{
    const Vec3 q = (p - center).cwiseAbs() - (half - Vec3::Constant(r));
    return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0) - r;
}

inline double sphere(const Vec3& p, const Vec3& c, double r) { return (p - c).norm() - r; }

/// Capped cylinder along x, rounded edges.
inline double cylinder_x(const Vec3& p, const Vec3& center, double half_len, double radius, double round)
{
    const Vec3 q = p - center;
    const double radial = std::hypot(q.y(), q.z()) - (radius - round);
    const double axial = std::abs(q.x()) - (half_len - round);
    return std::min(std::max(radial, axial), 0.0) + std::hypot(std::max(radial, 0.0), std::max(axial, 0.0)) - round;
}

/// Capped cylinder along y, rounded edges.
inline double cylinder_y(const Vec3& p, const Vec3& center, double half_len, double radius, double round)
{
    return cylinder_x(Vec3(p.y(), p.x(), p.z()), Vec3(center.y(), center.x(), center.z()), half_len, radius, round);
}

/// Torus in the xy-plane.
inline double torus_xy(const Vec3& p, const Vec3& c, double major, double minor)
{
    const Vec3 q = p - c;
    return std::hypot(std::hypot(q.x(), q.y()) - major, q.z()) - minor;
}

} // namespace sdf

///
/// A labeled implicit template. `distance` is negative inside; `part` labels
/// a template-space point; `cell` is the polygonization grid spacing.
///
struct ShapeTemplate {
    std::string name;
    std::function<double(const Eigen::Vector3d&)> distance;
    std::function<int(const Eigen::Vector3d&)> part;
    Eigen::Vector3d lo, hi;
    double cell = 0.02;
    int num_parts = 0;
    int affordance_part = 0;
    std::vector<std::string> part_names;
};

inline ShapeTemplate make_template(BaseShape base)
{
    using sdf::Vec3;
    ShapeTemplate t;
    t.name = to_string(base);
    switch (base) {
    case BaseShape::HandleTool: {
        // double open-end wrench: jaws of nearly equal size at both ends of a
        // flat shank with a raised rib on one face
        t.distance = [](const Vec3& p) {
            const double shank = sdf::round_box(p, Vec3(0, 0, 0), Vec3(0.045, 0.36, 0.03), 0.015);
            const double rib = sdf::round_box(p, Vec3(0, 0, 0.03), Vec3(0.02, 0.26, 0.02), 0.008);
            auto jaw = [&p](double yc, double r, double dir) {
                const Vec3 q(p.x(), p.y() - yc, p.z() - 0.02);
                const double disk = sdf::cylinder_x(Vec3(q.z(), q.x(), q.y()), Vec3::Zero(), 0.032, r, 0.012);
                const double c = std::cos(0.26), s = std::sin(0.26);
                const Vec3 u(c * q.x() - s * q.y(), dir * (s * q.x() + c * q.y()), q.z());
                const double slot = sdf::round_box(u, Vec3(0, 0.75 * r, 0), Vec3(0.42 * r, 0.75 * r, 0.1), 0.01);
                return std::max(disk, -slot);
            };
            double d = sdf::smin(shank, rib, 0.015);
            d = sdf::smin(d, jaw(0.42, 0.11, 1.0), 0.03);
            return sdf::smin(d, jaw(-0.42, 0.105, -1.0), 0.03);
        };
        t.part = [](const Vec3& p) {
            if (p.y() < -0.33) return 0;
            if (p.y() < -0.1) return 1;
            if (p.y() < 0.1) return 2;
            if (p.y() < 0.33) return 3;
            return 4;
        };
        t.lo = Vec3(-0.14, -0.56, -0.06);
        t.hi = Vec3(0.14, 0.56, 0.09);
        t.cell = 0.02;
        t.num_parts = 5;
        t.affordance_part = 1;
        t.part_names = {"small-jaw", "grip", "shank", "neck", "large-jaw"};
        break;
    }
    case BaseShape::Container: {
        // mug: rounded cylindrical body with a side handle ring
        t.distance = [](const Vec3& p) {
            const double body = sdf::cylinder_y(p, Vec3(0, 0, 0), 0.32, 0.27, 0.05);
            const double ring = sdf::torus_xy(Vec3(p.x(), p.y(), p.z() / 0.8), Vec3(0.27, 0.03, 0), 0.16, 0.045) * 0.8;
            return sdf::smin(body, ring, 0.03);
        };
        t.part = [](const Vec3& p) {
            if (p.x() > 0.285 && std::abs(p.z()) < 0.12) return 3;
            if (p.y() < -0.17) return 0;
            if (p.y() > 0.2) return 2;
            return 1;
        };
        t.lo = Vec3(-0.34, -0.40, -0.34);
        t.hi = Vec3(0.54, 0.40, 0.34);
        t.cell = 0.03;
        t.num_parts = 4;
        t.affordance_part = 3;
        t.part_names = {"base", "body", "rim", "handle"};
        break;
    }
    case BaseShape::BladeTool: {
        // knife: handle, guard, tapered blade
        t.distance = [](const Vec3& p) {
            const double handle = sdf::round_box(p, Vec3(-0.30, 0.0, 0.0), Vec3(0.20, 0.05, 0.036), 0.02);
            const double guard = sdf::round_box(p, Vec3(-0.085, 0.0, 0.0), Vec3(0.02, 0.085, 0.045), 0.012);
            const double u = std::clamp((p.x() + 0.07) / 0.58, 0.0, 1.0);
            const Vec3 half(0.29, 0.068 * (1.0 - 0.75 * u * u), 0.03 * (1.0 - 0.3 * u));
            const double blade = sdf::round_box(p, Vec3(0.22, 0.012 + 0.02 * u * u, 0.0), half, 0.012);
            return sdf::smin(sdf::smin(handle, guard, 0.02), blade, 0.02);
        };
        t.part = [](const Vec3& p) {
            if (p.x() < -0.38) return 0;
            if (p.x() < -0.105) return 1;
            if (p.x() < -0.062) return 2;
            if (p.x() > 0.3) return 4;
            return 3;
        };
        t.lo = Vec3(-0.56, -0.14, -0.10);
        t.hi = Vec3(0.56, 0.14, 0.10);
        t.cell = 0.016;
        t.num_parts = 5;
        t.affordance_part = 1;
        t.part_names = {"butt", "handle", "guard", "blade", "tip"};
        break;
    }
    }
    return t;
}

namespace detail {

inline Eigen::Vector3d sdf_gradient(const std::function<double(const Eigen::Vector3d&)>& f, const Eigen::Vector3d& p,
                                    double h)
{
    Eigen::Vector3d g;
    for (int a = 0; a < 3; ++a) {
        Eigen::Vector3d e = Eigen::Vector3d::Zero();
        e[a] = h;
        g[a] = (f(p + e) - f(p - e)) / (2 * h);
    }
    return g;
}

inline Eigen::Vector3d project_to_surface(const std::function<double(const Eigen::Vector3d&)>& f, Eigen::Vector3d p,
                                          double h)
{
    for (int it = 0; it < 4; ++it) {
        const double v = f(p);
        const Eigen::Vector3d g = sdf_gradient(f, p, 1e-3 * h);
        const double g2 = g.squaredNorm();
        if (g2 < 1e-12) break;
        p -= v * g / g2;
    }
    return p;
}

// Keeps the largest edge-connected component and drops unreferenced vertices.
inline TriangleMesh largest_component(const std::vector<Eigen::Vector3d>& verts, const std::vector<std::array<int, 3>>& faces)
{
    std::vector<int> parent(verts.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
    for (const auto& f : faces) {
        parent[find(f[1])] = find(f[0]);
        parent[find(f[2])] = find(f[0]);
    }
    std::map<int, int> count;
    for (const auto& f : faces) ++count[find(f[0])];
    int best_root = -1, best = -1;
    for (const auto& [root, c] : count)
        if (c > best) {
            best = c;
            best_root = root;
        }
    std::vector<int> remap(verts.size(), -1);
    std::vector<Eigen::Vector3d> kept_v;
    std::vector<std::array<int, 3>> kept_f;
    for (const auto& f : faces) {
        if (find(f[0]) != best_root) continue;
        std::array<int, 3> g{};
        for (int c = 0; c < 3; ++c) {
            if (remap[f[c]] < 0) {
                remap[f[c]] = static_cast<int>(kept_v.size());
                kept_v.push_back(verts[f[c]]);
            }
            g[c] = remap[f[c]];
        }
        kept_f.push_back(g);
    }
    Points V(static_cast<Eigen::Index>(kept_v.size()), 3);
    for (std::size_t i = 0; i < kept_v.size(); ++i) V.row(static_cast<Eigen::Index>(i)) = kept_v[i].transpose();
    Faces F(static_cast<Eigen::Index>(kept_f.size()), 3);
    for (std::size_t i = 0; i < kept_f.size(); ++i) F.row(static_cast<Eigen::Index>(i)) << kept_f[i][0], kept_f[i][1], kept_f[i][2];
    return TriangleMesh(std::move(V), std::move(F));
}

} // namespace detail

///
/// Marching tetrahedra (six-tetrahedron cube split along the main diagonal)
/// over the template's distance field, followed by a few rounds of umbrella
/// smoothing with re-projection onto the zero level set.
///
inline TriangleMesh polygonize(const ShapeTemplate& t, double cell = 0.0, int smoothing_rounds = 6)
{
    const double h = cell > 0.0 ? cell : t.cell;
    const Eigen::Vector3d lo = t.lo - Eigen::Vector3d::Constant(2 * h);
    const Eigen::Vector3d hi = t.hi + Eigen::Vector3d::Constant(2 * h);
    const int nx = static_cast<int>(std::ceil((hi.x() - lo.x()) / h)) + 1;
    const int ny = static_cast<int>(std::ceil((hi.y() - lo.y()) / h)) + 1;
    const int nz = static_cast<int>(std::ceil((hi.z() - lo.z()) / h)) + 1;
    auto node = [&](int x, int y, int z) { return (static_cast<std::int64_t>(z) * ny + y) * nx + x; };
    auto pos = [&](std::int64_t id) {
        const int x = static_cast<int>(id % nx), y = static_cast<int>((id / nx) % ny), z = static_cast<int>(id / (static_cast<std::int64_t>(nx) * ny));
        return Eigen::Vector3d(lo.x() + x * h, lo.y() + y * h, lo.z() + z * h);
    };
    std::vector<double> value(static_cast<std::size_t>(nx) * ny * nz);
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
                double v = t.distance(pos(node(x, y, z)));
                // keep the level set off the grid nodes
                if (std::abs(v) < 1e-3 * h) v = v < 0 ? -1e-3 * h : 1e-3 * h;
                value[static_cast<std::size_t>(node(x, y, z))] = v;
            }

    std::vector<Eigen::Vector3d> verts;
    std::unordered_map<std::uint64_t, int> edge_vertex;
    auto vertex_on = [&](std::int64_t a, std::int64_t b) {
        if (a > b) std::swap(a, b);
        const std::uint64_t key = static_cast<std::uint64_t>(a) * 0x100000000ULL + static_cast<std::uint64_t>(b);
        if (auto it = edge_vertex.find(key); it != edge_vertex.end()) return it->second;
        const double va = value[static_cast<std::size_t>(a)], vb = value[static_cast<std::size_t>(b)];
        const double s = va / (va - vb);
        verts.push_back(pos(a) + s * (pos(b) - pos(a)));
        const int id = static_cast<int>(verts.size()) - 1;
        edge_vertex.emplace(key, id);
        return id;
    };
    std::vector<std::array<int, 3>> faces;
    auto emit = [&](int a, int b, int c, const Eigen::Vector3d& outward) {
        const Eigen::Vector3d n = (verts[b] - verts[a]).cross(verts[c] - verts[a]);
        if (n.dot(outward) < 0) std::swap(b, c);
        faces.push_back({a, b, c});
    };
    static constexpr int kTets[6][4] = {{0, 1, 3, 7}, {0, 1, 5, 7}, {0, 2, 3, 7}, {0, 2, 6, 7}, {0, 4, 5, 7}, {0, 4, 6, 7}};
    for (int z = 0; z + 1 < nz; ++z)
        for (int y = 0; y + 1 < ny; ++y)
            for (int x = 0; x + 1 < nx; ++x) {
                std::array<std::int64_t, 8> corner{};
                for (int c = 0; c < 8; ++c) corner[c] = node(x + (c & 1), y + ((c >> 1) & 1), z + ((c >> 2) & 1));
                for (const auto& tet : kTets) {
                    std::vector<std::int64_t> in, out;
                    for (int c : tet) (value[static_cast<std::size_t>(corner[c])] < 0 ? in : out).push_back(corner[c]);
                    if (in.empty() || out.empty()) continue;
                    Eigen::Vector3d cin = Eigen::Vector3d::Zero(), cout = Eigen::Vector3d::Zero();
                    for (auto v : in) cin += pos(v) / static_cast<double>(in.size());
                    for (auto v : out) cout += pos(v) / static_cast<double>(out.size());
                    const Eigen::Vector3d outward = cout - cin;
                    if (in.size() == 1 || out.size() == 1) {
                        const auto apex = in.size() == 1 ? in[0] : out[0];
                        const auto& others = in.size() == 1 ? out : in;
                        emit(vertex_on(apex, others[0]), vertex_on(apex, others[1]), vertex_on(apex, others[2]), outward);
                    } else {
                        const int a = vertex_on(in[0], out[0]), b = vertex_on(in[0], out[1]);
                        const int c = vertex_on(in[1], out[1]), d = vertex_on(in[1], out[0]);
                        emit(a, b, c, outward);
                        emit(a, c, d, outward);
                    }
                }
            }

    // umbrella smoothing + re-projection
    std::vector<std::vector<int>> nbrs(verts.size());
    for (const auto& f : faces)
        for (int c = 0; c < 3; ++c) {
            nbrs[f[c]].push_back(f[(c + 1) % 3]);
            nbrs[f[c]].push_back(f[(c + 2) % 3]);
        }
    for (auto& n : nbrs) {
        std::sort(n.begin(), n.end());
        n.erase(std::unique(n.begin(), n.end()), n.end());
    }
    for (int round = 0; round < smoothing_rounds; ++round) {
        std::vector<Eigen::Vector3d> next(verts.size());
        for (std::size_t i = 0; i < verts.size(); ++i) {
            Eigen::Vector3d avg = Eigen::Vector3d::Zero();
            for (int j : nbrs[i]) avg += verts[j];
            avg /= static_cast<double>(std::max<std::size_t>(nbrs[i].size(), 1));
            next[i] = detail::project_to_surface(t.distance, 0.5 * verts[i] + 0.5 * avg, h);
        }
        verts = std::move(next);
    }
    return detail::largest_component(verts, faces);
}

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt)
{
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Smooth partition of unity from hard part labels (graph averaging).
inline Matrix smooth_part_weights(const TriangleMesh& mesh, const std::vector<int>& labels, int parts, int rounds)
{
    const int n = mesh.num_vertices();
    Matrix W = Matrix::Zero(n, parts);
    for (int v = 0; v < n; ++v) W(v, labels[v]) = 1.0;
    std::vector<std::vector<int>> nbrs(static_cast<std::size_t>(n));
    for (const auto& [a, b] : mesh_edges(mesh)) {
        nbrs[a].push_back(b);
        nbrs[b].push_back(a);
    }
    for (int r = 0; r < rounds; ++r) {
        Matrix next(n, parts);
        for (int v = 0; v < n; ++v) {
            Eigen::RowVectorXd acc = W.row(v);
            for (int u : nbrs[v]) acc += W.row(u);
            next.row(v) = acc / static_cast<double>(nbrs[v].size() + 1);
        }
        W = std::move(next);
    }
    return W;
}

} // namespace detail

/// Per-vertex part ids of a polygonized template.
inline std::vector<int> label_parts(const ShapeTemplate& t, const TriangleMesh& mesh)
{
    std::vector<int> labels(static_cast<std::size_t>(mesh.num_vertices()));
    for (int v = 0; v < mesh.num_vertices(); ++v) labels[v] = t.part(mesh.vertex(v));
    return labels;
}

///
/// Seeded smooth deformation: per-part, per-axis scaling about part centroids
/// (blended by smoothed part weights), a quadratic bend along the long axis
/// and a small vertex jitter. The displacement field is scaled
/// so no vertex moves more than amplitude/2 bounding-box diagonals, which
/// bounds any pairwise displacement between members by amplitude diagonals.
///
inline Points deform(const TriangleMesh& base, const std::vector<int>& labels, int parts, double amplitude,
                     std::uint64_t seed)
{
    const Points& P = base.vertices();
    if (amplitude == 0.0) return P;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    const Matrix weights = detail::smooth_part_weights(base, labels, parts, 8);

    Matrix centroid = Matrix::Zero(parts, 3);
    Vector count = Vector::Zero(parts);
    for (int v = 0; v < base.num_vertices(); ++v) {
        centroid.row(labels[v]) += P.row(v);
        count[labels[v]] += 1.0;
    }
    for (int p = 0; p < parts; ++p)
        if (count[p] > 0) centroid.row(p) /= count[p];

    Matrix part_scale(parts, 3);
    for (int k = 0; k < parts; ++k)
        for (int a = 0; a < 3; ++a) part_scale(k, a) = 1.0 + 0.5 * amplitude * uni(rng);
    // bend: offset perpendicular to the longest bounding-box axis
    const Eigen::Vector3d extent = P.colwise().maxCoeff() - P.colwise().minCoeff();
    int axis = 0;
    extent.maxCoeff(&axis);
    const int bend_dir = (axis + 1) % 3;
    const double bend = 0.8 * amplitude * uni(rng);
    const double mid = 0.5 * (P.col(axis).maxCoeff() + P.col(axis).minCoeff());
    const double half = 0.5 * extent[axis];
    const double diag = bounding_box_diagonal(P);
    const double jitter = 0.01 * amplitude * mean_edge_length(base);

    Points Q = P;
    for (int v = 0; v < base.num_vertices(); ++v) {
        Eigen::Vector3d p = P.row(v).transpose();
        Eigen::Vector3d q = p;
        for (int k = 0; k < parts; ++k)
            q += weights(v, k) * ((part_scale.row(k).transpose().array() - 1.0) *
                                  (p - centroid.row(k).transpose()).array()).matrix();
        const double s = (p[axis] - mid) / half;
        q[bend_dir] += bend * half * s * s;
        for (int a = 0; a < 3; ++a) q[a] += jitter * uni(rng);
        Q.row(v) = q.transpose();
    }
    const double max_disp = (Q - P).rowwise().norm().maxCoeff();
    const double limit = 0.5 * amplitude * diag;
    if (max_disp > limit) Q = P + (Q - P) * (limit / max_disp);
    return Q;
}

///
/// Geodesic ball of radius radius_fraction * diameter (graph distances)
/// around a seeded vertex of `part`, intersected with the part. The seed
/// picks a vertex index, so members sharing connectivity share the centre.
///
inline AffordanceRegion generate_affordance(const TriangleMesh& mesh, const std::vector<int>& part_labels, int part,
                                            double radius_fraction, std::uint64_t seed, std::string mesh_id)
{
    if (!(radius_fraction >= 0.0)) throw ArgumentError("generate_affordance: radius_fraction must be >= 0");
    std::vector<int> members;
    for (int v = 0; v < mesh.num_vertices(); ++v)
        if (part_labels[static_cast<std::size_t>(v)] == part) members.push_back(v);
    if (members.empty()) throw ArgumentError("generate_affordance: part " + std::to_string(part) + " has no vertices");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
    const int centre = members[pick(rng)];
    const EdgeGraph graph(mesh);
    const double radius = radius_fraction * geodesic_diameter_estimate(graph, seed);
    const int src[1] = {centre};
    const auto dist = graph.distances(src);
    std::vector<int> region;
    for (int v : members)
        if (dist[static_cast<std::size_t>(v)] <= radius) region.push_back(v);
    if (region.empty()) throw ArgumentError("generate_affordance: empty region");
    return AffordanceRegion(std::move(mesh_id), std::move(region), mesh.num_vertices());
}

/// Template mesh and part labels for a base shape (deterministic).
struct LabeledTemplate {
    ShapeTemplate shape;
    TriangleMesh mesh;
    std::vector<int> labels;
};

inline LabeledTemplate build_template(BaseShape base)
{
    ShapeTemplate shape = make_template(base);
    TriangleMesh mesh = polygonize(shape);
    std::vector<int> labels = label_parts(shape, mesh);
    return {std::move(shape), std::move(mesh), std::move(labels)};
}

inline std::vector<SyntheticObject> generate_category(const CategorySpec& spec)
{
    spec.validate();
    const LabeledTemplate tpl = build_template(spec.base);
    const std::uint64_t affordance_seed = detail::mix_seed(spec.seed, 0xAFF);
    std::vector<SyntheticObject> out;
    out.reserve(static_cast<std::size_t>(spec.num_objects));
    for (int i = 0; i < spec.num_objects; ++i) {
        Points V = deform(tpl.mesh, tpl.labels, tpl.shape.num_parts, spec.amplitude,
                          detail::mix_seed(spec.seed, static_cast<std::uint64_t>(i) + 1));
        TriangleMesh mesh(std::move(V), tpl.mesh.faces());
        std::string id = to_string(spec.base) + "_" + std::to_string(i);
        AffordanceRegion gt = generate_affordance(mesh, tpl.labels, tpl.shape.affordance_part, spec.affordance_radius,
                                                  affordance_seed, id);
        std::vector<int> identity(static_cast<std::size_t>(mesh.num_vertices()));
        std::iota(identity.begin(), identity.end(), 0);
        out.push_back(SyntheticObject{i, std::move(id), std::move(mesh), tpl.labels, tpl.shape.num_parts, std::move(gt),
                                      std::move(identity)});
    }
    return out;
}

/// Minimum lifted samples per part.
inline constexpr int kMinSamplesPerPart = 20;

///
/// Lifted samples for a synthetic object: each part owns a seeded random unit
/// vector (shared by every object generated from the same seed); a sample's
/// embedding is its part vector plus N(0, noise^2) per component.
///
inline LiftedSampleSet generate_semantic_field(const SyntheticObject& obj, int dim, double noise, std::uint64_t seed,
                                               int count = 3000)
{
    if (dim < 2) throw ArgumentError("generate_semantic_field: embedding dimension must be >= 2");
    if (!(noise >= 0.0)) throw ArgumentError("generate_semantic_field: noise must be >= 0");
    std::mt19937_64 part_rng(detail::mix_seed(seed, 0x5E3));
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix part_vectors(obj.num_parts, dim);
    for (int p = 0; p < obj.num_parts; ++p) {
        for (int c = 0; c < dim; ++c) part_vectors(p, c) = normal(part_rng);
        part_vectors.row(p).normalize();
    }

    std::mt19937_64 rng(detail::mix_seed(seed, 0x1000 + static_cast<std::uint64_t>(obj.index)));
    const auto& F = obj.mesh.faces();
    auto sample_part = [&](const SurfaceSample& s) {
        int corner = 0;
        s.barycentric.maxCoeff(&corner);
        return obj.part_labels[static_cast<std::size_t>(F(s.face, corner))];
    };
    std::vector<SurfaceSample> samples = sample_surface(obj.mesh, count, rng);
    std::vector<int> per_part(static_cast<std::size_t>(obj.num_parts), 0);
    for (const auto& s : samples) ++per_part[static_cast<std::size_t>(sample_part(s))];
    for (int p = 0; p < obj.num_parts; ++p) {
        std::vector<bool> filter(static_cast<std::size_t>(obj.mesh.num_faces()));
        bool any = false;
        for (int f = 0; f < obj.mesh.num_faces(); ++f) {
            bool in = false;
            for (int c = 0; c < 3; ++c) in = in || obj.part_labels[static_cast<std::size_t>(F(f, c))] == p;
            filter[static_cast<std::size_t>(f)] = in;
            any = any || in;
        }
        if (!any) continue;
        while (per_part[static_cast<std::size_t>(p)] < kMinSamplesPerPart) {
            for (const auto& s : sample_surface(obj.mesh, 1, rng, filter)) {
                if (sample_part(s) != p) continue;
                samples.push_back(s);
                ++per_part[static_cast<std::size_t>(p)];
            }
        }
    }

    LiftedSampleSet set;
    set.positions.resize(static_cast<Eigen::Index>(samples.size()), 3);
    set.embeddings.resize(static_cast<Eigen::Index>(samples.size()), dim);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        set.positions.row(row) = samples[i].position.transpose();
        set.embeddings.row(row) = part_vectors.row(sample_part(samples[i]));
        if (noise > 0.0)
            for (int c = 0; c < dim; ++c) set.embeddings(row, c) += noise * normal(rng);
    }
    return set;
}

} // namespace semfm
