#include <semfm/descriptors.hpp>
#include <semfm/primitives.hpp>

#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace semfm;

namespace {

AnchorSet two_anchors()
{
    AnchorSet a;
    a.pairs = {{0, 2, 0.9}, {1, 0, 0.5}};
    return a;
}

TriangleMesh transformed(const TriangleMesh& m, double scale)
{
    const Eigen::Matrix3d R = Eigen::AngleAxisd(0.7, Eigen::Vector3d(1, 2, 3).normalized()).toRotationMatrix();
    Points V = (m.vertices() * R.transpose()) * scale;
    return TriangleMesh(std::move(V), m.faces());
}

} // namespace

TEST(Indicators, DisjointColumnsPerSide)
{
    const std::vector<int> assign = {0, 1, 2, 2, 1, 0, 3};
    const Matrix src = indicator_functions(assign, two_anchors(), Side::Source);
    const Matrix tgt = indicator_functions(assign, two_anchors(), Side::Target);
    ASSERT_EQ(src.cols(), 2);
    EXPECT_EQ(src.col(0).sum(), 2.0);
    EXPECT_EQ(src(0, 0), 1.0);
    EXPECT_EQ(src(1, 1), 1.0);
    EXPECT_EQ(tgt(2, 0), 1.0);
    EXPECT_EQ(tgt(5, 1), 1.0);
    EXPECT_EQ(src.col(0).dot(src.col(1)), 0.0);
    EXPECT_EQ(src.row(6).sum(), 0.0);
}

TEST(Indicators, MissingClusterIsError)
{
    const std::vector<int> assign = {0, 0, 1};
    EXPECT_THROW(indicator_functions(assign, two_anchors(), Side::Target), ArgumentError);
}

TEST(Diffusion, NonnegativeUnitColumns)
{
    const TriangleMesh m = test::bumpy_sphere(3, 0.1, 2);
    const SpectralBasis b = compute_basis(m, 60);
    Matrix ind = Matrix::Zero(m.num_vertices(), 2);
    for (int v = 0; v < m.num_vertices(); ++v) ind(v, m.vertex(v)[2] > 0.5 ? 0 : 1) = 1.0;
    for (double scale : {0.0, 1.0, 20.0}) {
        const Matrix F = diffuse_descriptors(b, ind, default_diffusion_time(m, scale));
        EXPECT_GE(F.minCoeff(), 0.0);
        for (int c = 0; c < 2; ++c) EXPECT_NEAR(F.col(c).norm(), 1.0, 1e-12);
        // diffused mass stays concentrated where the indicator was
        EXPECT_GT(F.col(0).dot(ind.col(0)) / ind.col(0).sum(), F.col(0).dot(ind.col(1)) / ind.col(1).sum());
    }
    EXPECT_THROW(diffuse_descriptors(b, Matrix::Zero(m.num_vertices(), 1), 1.0), ArgumentError);
    EXPECT_THROW(diffuse_descriptors(b, ind, -1.0), ArgumentError);
}

TEST(Diffusion, LongTimeGivesConstant)
{
    const TriangleMesh m = icosphere(2);
    const SpectralBasis b = compute_basis(m, 20);
    Matrix ind = Matrix::Zero(m.num_vertices(), 1);
    ind(0, 0) = 1.0;
    const Matrix F = diffuse_descriptors(b, ind, 1e6);
    const Vector want = b.eigenfunctions.col(0).cwiseAbs().normalized();
    EXPECT_LT((F.col(0) - want).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Wks, PositiveAndNormalized)
{
    const SpectralBasis b = compute_basis(test::bumpy_sphere(3, 0.15, 1), 50);
    const Matrix W = wks_descriptors(b);
    EXPECT_EQ(W.cols(), kDefaultWksEnergies);
    EXPECT_GT(W.minCoeff(), 0.0);
    const Vector integral = W.transpose() * b.mass;
    EXPECT_LT((integral.array() - 1.0).abs().maxCoeff(), 1e-12);
    EXPECT_THROW(wks_descriptors(b, 1), ArgumentError);
    EXPECT_THROW(wks_descriptors(b, 10, 0.0), ArgumentError);
}

TEST(Wks, RigidInvariantScaleCovariant)
{
    const TriangleMesh m = test::bumpy_sphere(2, 0.2, 6);
    const Matrix a = wks_descriptors(compute_basis(m, 40), 30);
    const Matrix r = wks_descriptors(compute_basis(transformed(m, 1.0), 40), 30);
    EXPECT_LT((a - r).cwiseAbs().maxCoeff() / a.cwiseAbs().maxCoeff(), 1e-6);
    // energies shift with log(lambda); squared eigenfunctions pick up 1 / s^2
    const Matrix s = wks_descriptors(compute_basis(transformed(m, 2.5), 40), 30);
    EXPECT_LT((a - 6.25 * s).cwiseAbs().maxCoeff() / a.cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Wks, BlindToEigenfunctionSign)
{
    SpectralBasis b = compute_basis(test::bumpy_sphere(2, 0.2, 3), 30);
    const Matrix a = wks_descriptors(b, 20);
    b.eigenfunctions.col(5) *= -1.0;
    EXPECT_EQ(wks_descriptors(b, 20), a);
}
