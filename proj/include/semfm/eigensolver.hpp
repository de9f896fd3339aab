#pragma once

// Smallest eigenpairs of the generalized problem L x = lambda M x with L
// sparse symmetric PSD and M diagonal positive.

#include "error.hpp"
#include "mesh.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SparseCholesky>

#include <cstdint>
#include <numeric>
#include <random>

namespace semfm {

struct EigenOptions {
    /// Problems with at most this many rows are solved densely.
    int dense_threshold = 500;
    /// Relative residual tolerance for the iterative path.
    double tolerance = 1e-9;
    int max_iterations = 500;
    std::uint64_t seed = 0x5eed;
};

struct EigenPairs {
    Vector values;  // ascending
    Matrix vectors; // M-orthonormal columns
    int iterations = 0;
};

namespace detail {

inline EigenPairs dense_generalized(const SparseMatrix& L, const Vector& mass, int k)
{
    const Vector inv_sqrt = mass.cwiseSqrt().cwiseInverse();
    Matrix D = inv_sqrt.asDiagonal() * Matrix(L) * inv_sqrt.asDiagonal();
    D = 0.5 * (D + D.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(D);
    if (es.info() != Eigen::Success) throw ConvergenceError("dense eigensolver failed", 0);
    EigenPairs out;
    out.values = es.eigenvalues().head(k);
    out.vectors = inv_sqrt.asDiagonal() * es.eigenvectors().leftCols(k);
    return out;
}

// M-orthonormalizes the columns of X in place (Householder QR on M^{1/2} X).
inline void m_orthonormalize(Matrix& X, const Vector& sqrt_mass)
{
    const Matrix Z = sqrt_mass.asDiagonal() * X;
    Eigen::HouseholderQR<Matrix> qr(Z);
    Matrix Q = qr.householderQ() * Matrix::Identity(Z.rows(), Z.cols());
    X = sqrt_mass.cwiseInverse().asDiagonal() * Q;
}

// Projects out span(V) from W in the M-inner product (two passes).
inline void m_orthogonalize_against(Matrix& W, const Matrix& V, const Vector& mass)
{
    if (V.cols() == 0) return;
    for (int pass = 0; pass < 2; ++pass) W -= V * (V.transpose() * (mass.asDiagonal() * W));
}

///
/// Shift-invert block Krylov iteration with thick restart. The operator
/// A = (L + shift M)^{-1} M is self-adjoint in the M-inner product; the shift
/// sits slightly below zero so the factorization stays definite despite the
/// constant null vector of L. Exact products A Q are carried alongside the
/// basis Q, so Rayleigh-Ritz and restarts need no extra solves.
///
inline EigenPairs shift_invert_krylov(const SparseMatrix& L, const Vector& mass, int k, const EigenOptions& opt)
{
    const Eigen::Index n = L.rows();
    const int block = static_cast<int>(std::min<Eigen::Index>(std::max(16, k / 4), std::max<Eigen::Index>(1, n / 8)));
    const int keep = k + block;
    const int max_dim = static_cast<int>(std::min<Eigen::Index>(keep + 4 * block, n));
    const double scale = L.diagonal().sum() / mass.sum();
    const double shift = 1e-7 * scale;

    SparseMatrix K = L;
    for (Eigen::Index i = 0; i < n; ++i) K.coeffRef(i, i) += shift * mass[i];
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(K);
    if (ldlt.info() != Eigen::Success) throw ConvergenceError("shift-invert factorization failed", 0);
    auto apply = [&](const Matrix& X) -> Matrix { return ldlt.solve(mass.asDiagonal() * X); };

    const Vector sqrt_mass = mass.cwiseSqrt();
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix seed_block(n, block);
    for (Eigen::Index j = 0; j < seed_block.cols(); ++j)
        for (Eigen::Index i = 0; i < n; ++i) seed_block(i, j) = normal(rng);

    Matrix Q(n, max_dim), AQ(n, max_dim);
    Eigen::Index dim = 0;
    int converged = 0;
    for (int cycle = 1; cycle <= opt.max_iterations; ++cycle) {
        // expand: first the seed block, then A-images of the latest block
        Eigen::Index last_begin = dim;
        Matrix W = std::move(seed_block);
        while (dim + W.cols() <= max_dim) {
            m_orthogonalize_against(W, Q.leftCols(dim), mass);
            m_orthonormalize(W, sqrt_mass);
            Q.middleCols(dim, W.cols()) = W;
            AQ.middleCols(dim, W.cols()) = apply(W);
            last_begin = dim;
            dim += W.cols();
            W = AQ.middleCols(last_begin, dim - last_begin);
        }

        Matrix T = Q.leftCols(dim).transpose() * (mass.asDiagonal() * AQ.leftCols(dim));
        T = 0.5 * (T + T.transpose());
        Eigen::SelfAdjointEigenSolver<Matrix> es(T);
        // largest theta <-> smallest lambda
        const Matrix U = es.eigenvectors().rowwise().reverse().leftCols(keep);
        const Vector theta = es.eigenvalues().reverse().head(keep);
        Matrix X = Q.leftCols(dim) * U;
        Matrix AX = AQ.leftCols(dim) * U;

        const Matrix LX = L * X.leftCols(k);
        Vector lambda(k);
        for (int j = 0; j < k; ++j) lambda[j] = X.col(j).dot(LX.col(j));
        const double ref = std::max(std::abs(lambda[k - 1]), 1e-12 * scale);
        const Vector inv_sqrt_mass = sqrt_mass.cwiseInverse();
        converged = 0;
        while (converged < k) {
            const Vector r = LX.col(converged) - lambda[converged] * mass.cwiseProduct(X.col(converged));
            if (inv_sqrt_mass.cwiseProduct(r).norm() > opt.tolerance * ref) break;
            ++converged;
        }
        if (converged == k) {
            // Ritz values can drift out of order at the tolerance level
            std::vector<int> order(static_cast<std::size_t>(k));
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return lambda[a] < lambda[b]; });
            EigenPairs out;
            out.values.resize(k);
            out.vectors.resize(n, k);
            for (int j = 0; j < k; ++j) {
                out.values[j] = lambda[order[j]];
                out.vectors.col(j) = X.col(order[j]);
            }
            out.iterations = cycle;
            return out;
        }
        // thick restart: keep the Ritz pairs, continue from residuals of the unconverged ones
        const int first = std::min(converged, keep - block);
        seed_block = AX.middleCols(first, block) - X.middleCols(first, block) * theta.segment(first, block).asDiagonal();
        Q.leftCols(keep) = X;
        AQ.leftCols(keep) = AX;
        dim = keep;
    }
    throw ConvergenceError("shift-invert Krylov iteration did not converge", converged);
}

} // namespace detail

///
/// The k algebraically smallest eigenpairs of L x = lambda M x, M = diag(mass).
/// Dense solve up to opt.dense_threshold rows, shift-invert block Krylov above.
///
inline EigenPairs smallest_eigenpairs(const SparseMatrix& L, const Vector& mass, int k, const EigenOptions& opt = {})
{
    const Eigen::Index n = L.rows();
    if (k < 1 || k >= n) throw ArgumentError("eigensolver: need 1 <= k < n (k=" + std::to_string(k) + ")");
    if (mass.size() != n) throw ArgumentError("eigensolver: mass size mismatch");
    if ((mass.array() <= 0.0).any())
        throw ArgumentError("eigensolver: every vertex needs positive mass (isolated vertex?)");
    // the Krylov path needs room for k + a few blocks; tiny or nearly full requests go dense
    if (n <= opt.dense_threshold || 2 * static_cast<Eigen::Index>(k) + 64 > n)
        return detail::dense_generalized(L, mass, k);
    return detail::shift_invert_krylov(L, mass, k, opt);
}

} // namespace semfm
