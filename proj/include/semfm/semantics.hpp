#pragma once

// Sparse semantic point cloud, semantic kNN graph, spectral clustering and
// mutually exclusive anchor selection.

#include "error.hpp"
#include "mesh.hpp"
#include "sampling.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>

namespace semfm {

/// Lifted samples: one 3D position and one d-dimensional embedding per row.
struct LiftedSampleSet {
    Points positions;
    Matrix embeddings;

    int size() const noexcept { return static_cast<int>(positions.rows()); }
    int dim() const noexcept { return static_cast<int>(embeddings.cols()); }

    void validate() const
    {
        if (positions.rows() != embeddings.rows())
            throw ArgumentError("LiftedSampleSet: position/embedding count mismatch");
        if (embeddings.cols() < 1) throw ArgumentError("LiftedSampleSet: embedding dimension must be >= 1");
        if (!positions.allFinite() || !embeddings.allFinite())
            throw ArgumentError("LiftedSampleSet: non-finite entries");
    }
};

struct SemanticPointCloud {
    Points positions;
    Matrix embeddings;

    int size() const noexcept { return static_cast<int>(positions.rows()); }
    int dim() const noexcept { return static_cast<int>(embeddings.cols()); }
};

///
/// Draws `count` area-uniform surface points (seeded) and gives each the mean
/// embedding of the samples within `radius`. A point with no sample in range
/// takes the embedding of its nearest sample.
///
inline SemanticPointCloud aggregate_samples(const TriangleMesh& mesh, const LiftedSampleSet& samples, int count,
                                            double radius, std::uint64_t seed)
{
    samples.validate();
    if (samples.size() == 0) throw ArgumentError("aggregate_samples: empty sample set");
    if (!(radius > 0.0)) throw ArgumentError("aggregate_samples: radius must be positive");
    if (count < 1) throw ArgumentError("aggregate_samples: point count must be >= 1");

    std::mt19937_64 rng(seed);
    SemanticPointCloud pc;
    pc.positions.resize(count, 3);
    pc.embeddings.resize(count, samples.dim());

    const PointGrid sample_grid(samples.positions, radius);
    int filled = 0;
    // coincident draws (within 1e-9) are redrawn
    auto coincident = [&](const Eigen::Vector3d& p) {
        for (int j = 0; j < filled; ++j)
            if ((pc.positions.row(j).transpose() - p).norm() <= 1e-9) return true;
        return false;
    };
    while (filled < count) {
        const auto batch = sample_surface(mesh, count - filled, rng);
        for (const auto& s : batch) {
            if (filled > 0 && coincident(s.position)) continue;
            pc.positions.row(filled) = s.position.transpose();
            const auto hits = sample_grid.within(s.position, radius);
            if (hits.empty()) {
                pc.embeddings.row(filled) = samples.embeddings.row(nearest_point(samples.positions, s.position));
            } else {
                Vector sum = Vector::Zero(samples.dim());
                for (int h : hits) sum += samples.embeddings.row(h).transpose();
                pc.embeddings.row(filled) = (sum / static_cast<double>(hits.size())).transpose();
            }
            ++filled;
        }
    }
    return pc;
}

struct GraphEdge {
    int a; // a < b
    int b;
    double weight;
};

///
/// Symmetrized kNN graph over point positions; weights carry semantic
/// similarity exp(-|s_a - s_b|^2 / sigma^2).
///
struct SemanticGraph {
    int num_nodes = 0;
    int k_nn = 0;
    double sigma = 1.0;
    std::vector<GraphEdge> edges; // sorted by (a, b)

    Matrix dense_weights() const
    {
        Matrix W = Matrix::Zero(num_nodes, num_nodes);
        for (const auto& e : edges) W(e.a, e.b) = W(e.b, e.a) = e.weight;
        return W;
    }
};

/// Indices of the k nearest other points of `i` (squared distance, then index).
inline std::vector<int> k_nearest(const Points& pts, int i, int k)
{
    std::vector<std::pair<double, int>> d;
    d.reserve(static_cast<std::size_t>(pts.rows()));
    for (Eigen::Index j = 0; j < pts.rows(); ++j)
        if (j != i) d.emplace_back((pts.row(j) - pts.row(i)).squaredNorm(), static_cast<int>(j));
    std::partial_sort(d.begin(), d.begin() + k, d.end());
    std::vector<int> out(static_cast<std::size_t>(k));
    for (int t = 0; t < k; ++t) out[t] = d[t].second;
    return out;
}

inline double median(std::vector<double> values)
{
    if (values.empty()) return 0.0;
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + mid, values.end());
    const double upper = values[mid];
    if (values.size() % 2 == 1) return upper;
    const double lower = *std::max_element(values.begin(), values.begin() + mid);
    return 0.5 * (lower + upper);
}

/// `sigma` empty selects the median of embedding distances over the kNN edges.
inline SemanticGraph build_semantic_graph(const SemanticPointCloud& pc, int k_nn, std::optional<double> sigma = {})
{
    const int m = pc.size();
    if (k_nn < 1 || k_nn >= m)
        throw ArgumentError("build_semantic_graph: need 1 <= k_nn < M (k_nn=" + std::to_string(k_nn) +
                            ", M=" + std::to_string(m) + ")");
    if (sigma && !(*sigma > 0.0)) throw ArgumentError("build_semantic_graph: sigma must be positive");

    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(static_cast<std::size_t>(m) * k_nn);
    for (int i = 0; i < m; ++i)
        for (int j : k_nearest(pc.positions, i, k_nn)) pairs.emplace_back(std::min(i, j), std::max(i, j));
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

    std::vector<double> dist(pairs.size());
    for (std::size_t e = 0; e < pairs.size(); ++e)
        dist[e] = (pc.embeddings.row(pairs[e].first) - pc.embeddings.row(pairs[e].second)).norm();

    SemanticGraph g;
    g.num_nodes = m;
    g.k_nn = k_nn;
    if (sigma) {
        g.sigma = *sigma;
    } else {
        const double med = median(dist);
        g.sigma = med > 0.0 ? med : 1.0;
    }
    g.edges.reserve(pairs.size());
    for (std::size_t e = 0; e < pairs.size(); ++e) {
        double w = std::exp(-(dist[e] * dist[e]) / (g.sigma * g.sigma));
        // keep weights strictly positive when the exponential underflows
        w = std::max(w, std::numeric_limits<double>::min());
        g.edges.push_back({pairs[e].first, pairs[e].second, w});
    }
    return g;
}

struct ClusterSet {
    std::vector<int> labels; // per point, in [0, K)
    int num_clusters = 0;
    Matrix centroids; // K x d mean embeddings
    std::vector<int> sizes;
};

namespace detail {

// Ids ordered by first occurrence in point order.
inline std::vector<int> relabel_by_first_occurrence(const std::vector<int>& labels, int k)
{
    std::vector<int> remap(static_cast<std::size_t>(k), -1);
    int next = 0;
    std::vector<int> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        int& r = remap[static_cast<std::size_t>(labels[i])];
        if (r < 0) r = next++;
        out[i] = r;
    }
    return out;
}

inline ClusterSet finish_clusters(const SemanticPointCloud& pc, std::vector<int> labels, int k)
{
    ClusterSet cs;
    cs.labels = relabel_by_first_occurrence(labels, k);
    cs.num_clusters = k;
    cs.centroids = Matrix::Zero(k, pc.dim());
    cs.sizes.assign(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < cs.labels.size(); ++i) {
        cs.centroids.row(cs.labels[i]) += pc.embeddings.row(static_cast<Eigen::Index>(i));
        ++cs.sizes[static_cast<std::size_t>(cs.labels[i])];
    }
    for (int c = 0; c < k; ++c) cs.centroids.row(c) /= static_cast<double>(cs.sizes[static_cast<std::size_t>(c)]);
    return cs;
}

struct KMeansResult {
    std::vector<int> labels;
    bool has_empty = false;
};

/// Lloyd iterations from k-means++ seeding; ties go to the lowest center index.
inline KMeansResult kmeans(const Matrix& rows, int k, std::uint64_t seed, int max_iter = 100, double tol = 1e-6)
{
    const Eigen::Index n = rows.rows();
    std::mt19937_64 rng(seed);
    Matrix centers(k, rows.cols());
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    centers.row(0) = rows.row(pick(rng));
    Vector d2 = (rows.rowwise() - centers.row(0)).rowwise().squaredNorm();
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int c = 1; c < k; ++c) {
        const double total = d2.sum();
        Eigen::Index chosen = 0;
        if (total > 0.0) {
            const double u = uni(rng) * total;
            double acc = 0.0;
            chosen = n - 1;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc > u && d2[i] > 0.0) {
                    chosen = i;
                    break;
                }
            }
        }
        centers.row(c) = rows.row(chosen);
        d2 = d2.cwiseMin((rows.rowwise() - centers.row(c)).rowwise().squaredNorm());
    }

    KMeansResult res;
    res.labels.assign(static_cast<std::size_t>(n), 0);
    for (int iter = 0; iter < max_iter; ++iter) {
        for (Eigen::Index i = 0; i < n; ++i) {
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                const double d = (rows.row(i) - centers.row(c)).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            res.labels[static_cast<std::size_t>(i)] = best;
        }
        Matrix next = Matrix::Zero(k, rows.cols());
        std::vector<int> count(static_cast<std::size_t>(k), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            next.row(res.labels[i]) += rows.row(i);
            ++count[static_cast<std::size_t>(res.labels[i])];
        }
        double shift = 0.0;
        res.has_empty = false;
        for (int c = 0; c < k; ++c) {
            if (count[static_cast<std::size_t>(c)] == 0) {
                res.has_empty = true;
                next.row(c) = centers.row(c);
            } else {
                next.row(c) /= static_cast<double>(count[static_cast<std::size_t>(c)]);
            }
            shift = std::max(shift, (next.row(c) - centers.row(c)).norm());
        }
        centers = std::move(next);
        if (shift <= tol) break;
    }
    return res;
}

} // namespace detail

inline constexpr int kKMeansMaxIterations = 100;
inline constexpr double kKMeansTolerance = 1e-6;

///
/// Normalized spectral clustering: the K lowest eigenvectors of
/// I - D^{-1/2} W D^{-1/2}, rows normalized to unit length, then seeded
/// k-means++. An empty cluster triggers one re-seed before failing.
///
inline ClusterSet spectral_cluster(const SemanticPointCloud& pc, const SemanticGraph& graph, int k, std::uint64_t seed)
{
    const int m = graph.num_nodes;
    if (m != pc.size()) throw ArgumentError("spectral_cluster: graph and point cloud sizes differ");
    if (k < 2 || k > m) throw ArgumentError("spectral_cluster: need 2 <= K <= M (K=" + std::to_string(k) + ")");
    if (k == m) {
        // a partition into M non-empty clusters is the singleton partition
        std::vector<int> labels(static_cast<std::size_t>(m));
        std::iota(labels.begin(), labels.end(), 0);
        return detail::finish_clusters(pc, std::move(labels), k);
    }

    const Matrix W = graph.dense_weights();
    const Vector inv_sqrt_deg = W.rowwise().sum().cwiseSqrt().cwiseInverse();
    Matrix Lsym = -(inv_sqrt_deg.asDiagonal() * W * inv_sqrt_deg.asDiagonal());
    Lsym.diagonal().array() += 1.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(Lsym);
    if (es.info() != Eigen::Success) throw NumericError("spectral_cluster: eigensolver failed");
    Matrix U = es.eigenvectors().leftCols(k);
    for (Eigen::Index i = 0; i < U.rows(); ++i) {
        const double nrm = U.row(i).norm();
        if (nrm > 0.0) U.row(i) /= nrm;
    }

    for (int attempt = 0; attempt < 2; ++attempt) {
        auto res = detail::kmeans(U, k, seed + static_cast<std::uint64_t>(attempt) * 0x9E3779B97F4A7C15ULL,
                                  kKMeansMaxIterations, kKMeansTolerance);
        if (!res.has_empty) return detail::finish_clusters(pc, std::move(res.labels), k);
    }
    throw NumericError("spectral_cluster: k-means produced an empty cluster after re-seeding");
}

/// Cosine similarity between cluster mean embeddings. Zero-norm rows/columns give 0.
inline Matrix cluster_similarity(const ClusterSet& a, const ClusterSet& b, Warnings* warnings = nullptr)
{
    if (a.centroids.cols() != b.centroids.cols())
        throw ArgumentError("cluster_similarity: embedding dimensions differ");
    const Vector na = a.centroids.rowwise().norm();
    const Vector nb = b.centroids.rowwise().norm();
    Matrix S = a.centroids * b.centroids.transpose();
    bool zero = false;
    for (Eigen::Index i = 0; i < S.rows(); ++i) {
        for (Eigen::Index j = 0; j < S.cols(); ++j) {
            if (na[i] == 0.0 || nb[j] == 0.0) {
                S(i, j) = 0.0;
                zero = true;
            } else {
                S(i, j) = std::clamp(S(i, j) / (na[i] * nb[j]), -1.0, 1.0);
            }
        }
    }
    if (zero) warn(warnings, "cluster_similarity: zero-norm cluster embedding, similarity set to 0");
    return S;
}

struct AnchorPair {
    int source_cluster;
    int target_cluster;
    double similarity;
};

struct AnchorSet {
    std::vector<AnchorPair> pairs; // descending similarity

    int size() const noexcept { return static_cast<int>(pairs.size()); }
    double total() const
    {
        double t = 0.0;
        for (const auto& p : pairs) t += p.similarity;
        return t;
    }
};

/// Largest cluster count supported by the exact anchor search.
inline constexpr int kMaxAnchorClusters = 10;

///
/// Exact maximum-total-similarity injective assignment of `alpha` cluster
/// pairs. Depth-first search in lexicographic (c, c') order keeps the first
/// optimum found, which breaks ties lexicographically.
///
inline AnchorSet select_anchors(const Matrix& S, int alpha)
{
    const int rows = static_cast<int>(S.rows()), cols = static_cast<int>(S.cols());
    if (alpha < 1) throw ArgumentError("select_anchors: alpha must be >= 1");
    if (alpha > std::min(rows, cols))
        throw ArgumentError("select_anchors: alpha=" + std::to_string(alpha) + " exceeds min(K1, K2)=" +
                            std::to_string(std::min(rows, cols)));
    if (std::min(rows, cols) > kMaxAnchorClusters)
        throw ArgumentError("select_anchors: unsupported size, min(K1, K2) must be <= " +
                            std::to_string(kMaxAnchorClusters));

    // suffix bounds: best[c][r] = largest sum of r row maxima among rows >= c
    const Vector row_max = S.rowwise().maxCoeff();
    std::vector<std::vector<double>> bound(static_cast<std::size_t>(rows + 1),
                                           std::vector<double>(static_cast<std::size_t>(alpha + 1), 0.0));
    for (int c = rows - 1; c >= 0; --c) {
        std::vector<double> tail(row_max.data() + c, row_max.data() + rows);
        std::sort(tail.begin(), tail.end(), std::greater<>());
        for (int r = 1; r <= alpha; ++r) {
            double s = 0.0;
            for (int t = 0; t < std::min<int>(r, static_cast<int>(tail.size())); ++t) s += tail[t];
            bound[c][r] = static_cast<int>(tail.size()) >= r ? s : -std::numeric_limits<double>::infinity();
        }
    }

    std::vector<std::pair<int, int>> current, best;
    double best_total = -std::numeric_limits<double>::infinity();
    std::vector<bool> used(static_cast<std::size_t>(cols), false);
    auto search = [&](auto&& self, int c, double total) -> void {
        const int need = alpha - static_cast<int>(current.size());
        if (need == 0) {
            if (total > best_total) {
                best_total = total;
                best = current;
            }
            return;
        }
        if (rows - c < need) return;
        if (total + bound[c][need] < best_total) return;
        for (int cp = 0; cp < cols; ++cp) {
            if (used[cp]) continue;
            used[cp] = true;
            current.emplace_back(c, cp);
            self(self, c + 1, total + S(c, cp));
            current.pop_back();
            used[cp] = false;
        }
        self(self, c + 1, total);
    };
    search(search, 0, 0.0);

    AnchorSet out;
    for (const auto& [c, cp] : best) out.pairs.push_back({c, cp, S(c, cp)});
    std::stable_sort(out.pairs.begin(), out.pairs.end(),
                     [](const AnchorPair& x, const AnchorPair& y) { return x.similarity > y.similarity; });
    return out;
}

} // namespace semfm
