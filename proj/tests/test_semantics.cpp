#include <semfm/descriptors.hpp>
#include <semfm/primitives.hpp>
#include <semfm/semantics.hpp>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "test_util.hpp"

using namespace semfm;

namespace {

LiftedSampleSet random_samples(const TriangleMesh& mesh, int count, int dim, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    const auto pts = sample_surface(mesh, count, rng);
    std::normal_distribution<double> nd;
    LiftedSampleSet s;
    s.positions.resize(count, 3);
    s.embeddings.resize(count, dim);
    for (int i = 0; i < count; ++i) {
        s.positions.row(i) = pts[i].position.transpose();
        for (int c = 0; c < dim; ++c) s.embeddings(i, c) = nd(rng);
    }
    return s;
}

// Two point groups far apart, embeddings e1 and e2.
SemanticPointCloud two_groups(int per_group, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    SemanticPointCloud pc;
    pc.positions.resize(2 * per_group, 3);
    pc.embeddings = Matrix::Zero(2 * per_group, 4);
    for (int i = 0; i < 2 * per_group; ++i) {
        const int g = i < per_group ? 0 : 1;
        pc.positions.row(i) << u(rng) + 10.0 * g, u(rng), u(rng);
        pc.embeddings(i, g) = 1.0;
        pc.embeddings(i, 2 + g) = 0.01 * u(rng);
    }
    return pc;
}

} // namespace

TEST(Aggregation, MatchesExhaustiveOracle)
{
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const TriangleMesh m = test::bumpy_sphere(2, 0.2, seed); // 162 vertices
        const LiftedSampleSet s = random_samples(m, 400, 6, seed + 100);
        const double radius = 0.05 + 0.02 * static_cast<double>(seed % 5);
        const SemanticPointCloud got = aggregate_samples(m, s, 60, radius, seed);
        const SemanticPointCloud want = oracle::aggregate_brute(m, s, 60, radius, seed);
        EXPECT_EQ(got.positions, want.positions);
        EXPECT_EQ(got.embeddings, want.embeddings);
    }
}

TEST(Aggregation, SeparatedGroupsKeepTheirEmbedding)
{
    const TriangleMesh m = grid_mesh(10, 10, 3.0, 1.0);
    LiftedSampleSet s;
    s.positions.resize(2, 3);
    s.embeddings.resize(2, 2);
    s.positions << 0.2, 0.5, 0.0, 2.8, 0.5, 0.0;
    s.embeddings << 1, 0, 0, 1;
    const SemanticPointCloud pc = aggregate_samples(m, s, 50, 0.4, 3);
    for (int i = 0; i < pc.size(); ++i) {
        const bool left = pc.positions(i, 0) < 1.5;
        EXPECT_EQ(pc.embeddings(i, 0), left ? 1.0 : 0.0);
    }
}

TEST(Aggregation, Errors)
{
    const TriangleMesh m = icosphere(1);
    const LiftedSampleSet s = random_samples(m, 10, 3, 1);
    EXPECT_THROW(aggregate_samples(m, s, 10, 0.0, 1), ArgumentError);
    EXPECT_THROW(aggregate_samples(m, s, 0, 0.1, 1), ArgumentError);
    LiftedSampleSet empty;
    empty.positions.resize(0, 3);
    empty.embeddings.resize(0, 3);
    EXPECT_THROW(aggregate_samples(m, empty, 10, 0.1, 1), ArgumentError);
}

TEST(SemanticGraph, EdgesAreSymmetrizedKnn)
{
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const SemanticPointCloud pc = two_groups(30, seed);
        const SemanticGraph g = build_semantic_graph(pc, 6);
        std::set<std::pair<int, int>> want;
        for (int i = 0; i < pc.size(); ++i)
            for (int j : oracle::knn_brute(pc.positions, i, 6)) want.insert({std::min(i, j), std::max(i, j)});
        std::set<std::pair<int, int>> got;
        for (const auto& e : g.edges) {
            got.insert({e.a, e.b});
            EXPECT_LT(e.a, e.b);
            const double d = (pc.embeddings.row(e.a) - pc.embeddings.row(e.b)).norm();
            EXPECT_DOUBLE_EQ(e.weight, std::max(std::exp(-d * d / (g.sigma * g.sigma)), 1e-308));
            EXPECT_GT(e.weight, 0.0);
            EXPECT_LE(e.weight, 1.0);
        }
        EXPECT_EQ(got, want);
        const Matrix W = g.dense_weights();
        EXPECT_EQ(W, W.transpose());
        for (int i = 0; i < pc.size(); ++i) EXPECT_GT(W.row(i).sum(), 0.0);
    }
}

TEST(SemanticGraph, WeightAtSigmaDistance)
{
    SemanticPointCloud pc;
    pc.positions.resize(2, 3);
    pc.positions << 0, 0, 0, 1, 0, 0;
    pc.embeddings.resize(2, 1);
    pc.embeddings << 0.0, 0.5;
    const SemanticGraph g = build_semantic_graph(pc, 1, 0.5);
    ASSERT_EQ(g.edges.size(), 1u);
    EXPECT_NEAR(g.edges[0].weight, 0.36787944117144233, 1e-15);
}

TEST(SemanticGraph, MedianHeuristic)
{
    const SemanticPointCloud pc = two_groups(20, 2);
    const SemanticGraph g = build_semantic_graph(pc, 4);
    std::vector<double> d;
    for (const auto& e : g.edges) d.push_back((pc.embeddings.row(e.a) - pc.embeddings.row(e.b)).norm());
    std::sort(d.begin(), d.end());
    const double med = d.size() % 2 ? d[d.size() / 2] : 0.5 * (d[d.size() / 2 - 1] + d[d.size() / 2]);
    EXPECT_DOUBLE_EQ(g.sigma, med);
    EXPECT_THROW(build_semantic_graph(pc, pc.size()), ArgumentError);
    EXPECT_THROW(build_semantic_graph(pc, 3, -1.0), ArgumentError);
}

TEST(Median, EvenAndOdd)
{
    EXPECT_DOUBLE_EQ(median({3, 1, 2}), 2.0);
    EXPECT_DOUBLE_EQ(median({4, 1, 3, 2}), 2.5);
}

TEST(SpectralCluster, SeparatedGroupsRecovered)
{
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const SemanticPointCloud pc = two_groups(25, seed);
        const SemanticGraph g = build_semantic_graph(pc, 5);
        const ClusterSet c = spectral_cluster(pc, g, 2, seed);
        for (int i = 0; i < pc.size(); ++i) EXPECT_EQ(c.labels[i], c.labels[i < 25 ? 0 : 25]);
        EXPECT_NE(c.labels[0], c.labels[25]);
        EXPECT_EQ(c.sizes, (std::vector<int>{25, 25}));
        EXPECT_NEAR(c.centroids(c.labels[0], 0), 1.0, 1e-12);
    }
}

TEST(SpectralCluster, SingletonsWhenKEqualsM)
{
    const SemanticPointCloud pc = two_groups(4, 1);
    const ClusterSet c = spectral_cluster(pc, build_semantic_graph(pc, 3), 8, 0);
    std::set<int> labels(c.labels.begin(), c.labels.end());
    EXPECT_EQ(labels.size(), 8u);
    EXPECT_THROW(spectral_cluster(pc, build_semantic_graph(pc, 3), 9, 0), ArgumentError);
}

TEST(SpectralCluster, Deterministic)
{
    const TriangleMesh m = test::bumpy_sphere(2, 0.1, 3);
    const LiftedSampleSet s = random_samples(m, 500, 5, 4);
    const SemanticPointCloud pc = aggregate_samples(m, s, 80, 0.3, 1);
    const SemanticGraph g = build_semantic_graph(pc, 8);
    EXPECT_EQ(spectral_cluster(pc, g, 5, 9).labels, spectral_cluster(pc, g, 5, 9).labels);
}

TEST(ClusterSimilarity, CosineOfCentroids)
{
    ClusterSet a, b;
    a.centroids.resize(2, 2);
    a.centroids << 1, 0, 1, 1;
    b.centroids.resize(2, 2);
    b.centroids << 0, 2, 0, 0;
    Warnings w;
    const Matrix S = cluster_similarity(a, b, &w);
    EXPECT_DOUBLE_EQ(S(0, 0), 0.0);
    EXPECT_NEAR(S(1, 0), 1.0 / std::sqrt(2.0), 1e-15);
    EXPECT_EQ(S(1, 1), 0.0);
    EXPECT_FALSE(w.empty());
}

TEST(Anchors, MatchExhaustiveOracle)
{
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        Matrix S(5, 5);
        for (int i = 0; i < 25; ++i) S.data()[i] = u(rng);
        for (int alpha = 1; alpha <= 3; ++alpha) {
            const AnchorSet a = select_anchors(S, alpha);
            ASSERT_EQ(a.size(), alpha);
            EXPECT_NEAR(a.total(), oracle::best_anchor_total(S, alpha), 1e-12);
            std::set<int> rows, cols;
            for (const auto& p : a.pairs) {
                rows.insert(p.source_cluster);
                cols.insert(p.target_cluster);
                EXPECT_EQ(p.similarity, S(p.source_cluster, p.target_cluster));
            }
            EXPECT_EQ(static_cast<int>(rows.size()), alpha);
            EXPECT_EQ(static_cast<int>(cols.size()), alpha);
            for (int i = 1; i < a.size(); ++i) EXPECT_GE(a.pairs[i - 1].similarity, a.pairs[i].similarity);
        }
    }
}

TEST(Anchors, TwoAnchorExample)
{
    const AnchorSet a = select_anchors(oracle::two_anchor_similarity(), 2);
    ASSERT_EQ(a.size(), 2);
    EXPECT_EQ(a.pairs[0].source_cluster, 2);
    EXPECT_EQ(a.pairs[0].target_cluster, 1);
    EXPECT_EQ(a.pairs[0].similarity, 0.89);
    EXPECT_EQ(a.pairs[1].source_cluster, 3);
    EXPECT_EQ(a.pairs[1].target_cluster, 4);
    EXPECT_EQ(a.pairs[1].similarity, 0.85);
}

TEST(Anchors, MonotoneInAlphaWithNonnegativeScores)
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix S(6, 6);
        for (int i = 0; i < 36; ++i) S.data()[i] = u(rng);
        double prev = -1.0;
        for (int alpha = 1; alpha <= 6; ++alpha) {
            const double t = select_anchors(S, alpha).total();
            EXPECT_GE(t, prev);
            prev = t;
        }
    }
}

TEST(Anchors, IdentitySimilarityGivesDiagonal)
{
    const AnchorSet a = select_anchors(Matrix::Identity(5, 5), 5);
    for (const auto& p : a.pairs) EXPECT_EQ(p.source_cluster, p.target_cluster);
}

TEST(Anchors, Errors)
{
    EXPECT_THROW(select_anchors(Matrix::Ones(3, 3), 4), ArgumentError);
    EXPECT_THROW(select_anchors(Matrix::Ones(3, 3), 0), ArgumentError);
    EXPECT_THROW(select_anchors(Matrix::Ones(11, 11), 2), ArgumentError);
}

TEST(Assignment, MatchesBruteForce)
{
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const TriangleMesh m = test::jittered_grid(12, 12, 0.4, seed); // 169 vertices
        std::mt19937_64 rng(seed);
        const auto pts = sample_surface(m, 40, rng);
        SemanticPointCloud pc;
        pc.positions.resize(40, 3);
        pc.embeddings = Matrix::Zero(40, 1);
        std::vector<int> labels(40);
        for (int i = 0; i < 40; ++i) {
            pc.positions.row(i) = pts[i].position.transpose();
            labels[i] = static_cast<int>(rng() % 5);
        }
        EXPECT_EQ(vertex_cluster_assignment(m, pc, labels), oracle::assignment_brute(m, pc.positions, labels));
    }
}

TEST(Assignment, TieGoesToLowestIndex)
{
    const TriangleMesh m = grid_mesh(2, 2);
    SemanticPointCloud pc;
    pc.positions.resize(2, 3);
    pc.positions << 0.5, 0.5, 1.0, 0.5, 0.5, -1.0;
    pc.embeddings = Matrix::Zero(2, 1);
    const std::vector<int> labels = {7, 3};
    for (int l : vertex_cluster_assignment(m, pc, labels)) EXPECT_EQ(l, 7);
}
