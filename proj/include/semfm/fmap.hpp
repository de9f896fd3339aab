#pragma once

#include "error.hpp"
#include "spectral.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <optional>

namespace semfm {

///
/// k x k matrix sending spectral coefficients on shape 2 to coefficients on
/// shape 1 (the pullback of functions along a map V1 -> V2).
///
struct FunctionalMap {
    Matrix C;
    int alpha = 0;           // descriptor count used for the estimate (0 for refined-only maps)
    double reg_weight = 0.0; // commutativity weight used for the estimate
    std::vector<int> trace;  // basis dimensions visited by refinement
    Warnings warnings;

    int k() const noexcept { return static_cast<int>(C.rows()); }
};

/// For each vertex of shape 1, a vertex of shape 2.
struct PointwiseMap {
    std::vector<int> target;

    int size() const noexcept { return static_cast<int>(target.size()); }
    int operator()(int i) const { return target[static_cast<std::size_t>(i)]; }
};

namespace detail {

inline void require_dim(const SpectralBasis& b1, const SpectralBasis& b2, int k, const char* op)
{
    if (k < 1 || k > b1.k() || k > b2.k())
        throw ArgumentError(std::string(op) + ": dimension " + std::to_string(k) +
                            " exceeds available eigenpairs (" + std::to_string(b1.k()) + ", " +
                            std::to_string(b2.k()) + ")");
}

// |C00| against sqrt(Area1 / Area2); recorded, never fatal.
inline void check_constant_mode(FunctionalMap& fm, const SpectralBasis& b1, const SpectralBasis& b2)
{
    const double expected = std::sqrt(b1.area() / b2.area());
    const double got = std::abs(fm.C(0, 0));
    if (std::abs(got - expected) > 0.2 * expected)
        fm.warnings.push_back("functional map: |C00|=" + std::to_string(got) + " deviates more than 20% from " +
                              std::to_string(expected));
}

} // namespace detail

/// Descriptor projections Phi[:, :k]^T M F.
inline Matrix descriptor_coefficients(const SpectralBasis& basis, const Matrix& F, int k)
{
    detail::require_rows(basis, F.rows(), "descriptor_coefficients");
    return basis.phi(k).transpose() * (basis.mass.asDiagonal() * F);
}

/// Default commutativity weight 1e-3 * |A1|_F^2 / k.
inline double default_reg_weight(const Matrix& A1)
{
    return 1e-3 * A1.squaredNorm() / static_cast<double>(A1.rows());
}

/// |C A2 - A1|_F^2 + w |C Lambda2 - Lambda1 C|_F^2.
inline double fmap_objective(const Matrix& C, const Matrix& A1, const Matrix& A2, const Vector& lambda1,
                             const Vector& lambda2, double w)
{
    const Eigen::Index k = C.rows();
    const Matrix comm = C * lambda2.head(k).asDiagonal() - lambda1.head(k).asDiagonal() * C;
    return (C * A2 - A1).squaredNorm() + w * comm.squaredNorm();
}

///
/// Least-squares functional map from paired descriptors at dimension k,
/// with a Laplacian-commutativity penalty. The objective separates by rows
/// of C; each row is a small ridge system. `reg_weight` empty selects
/// default_reg_weight.
///
inline FunctionalMap estimate_fmap(const SpectralBasis& b1, const SpectralBasis& b2, const Matrix& F1, const Matrix& F2,
                                   int k, std::optional<double> reg_weight = {})
{
    detail::require_dim(b1, b2, k, "estimate_fmap");
    if (F1.cols() != F2.cols()) throw ArgumentError("estimate_fmap: descriptor counts differ");
    if (F1.cols() == 0) throw ArgumentError("estimate_fmap: no descriptors (alpha = 0)");
    const Matrix A1 = descriptor_coefficients(b1, F1, k);
    const Matrix A2 = descriptor_coefficients(b2, F2, k);
    const double w = reg_weight ? *reg_weight : default_reg_weight(A1);
    if (!(w >= 0.0)) throw ArgumentError("estimate_fmap: reg_weight must be >= 0");

    const Matrix G = A2 * A2.transpose();
    const Matrix rhs = A2 * A1.transpose(); // column i is the right-hand side of row i
    FunctionalMap fm;
    fm.C.resize(k, k);
    fm.alpha = static_cast<int>(F1.cols());
    fm.reg_weight = w;
    fm.trace = {k};
    for (int i = 0; i < k; ++i) {
        Matrix H = G;
        for (int j = 0; j < k; ++j) {
            const double d = b2.eigenvalues[j] - b1.eigenvalues[i];
            H(j, j) += w * d * d;
        }
        Eigen::LDLT<Matrix> ldlt(H);
        const double rcond = ldlt.info() == Eigen::Success ? ldlt.rcond() : 0.0;
        if (rcond > 1e-13) {
            fm.C.row(i) = ldlt.solve(rhs.col(i)).transpose();
            continue;
        }
        if (w == 0.0)
            throw NumericError("estimate_fmap: singular system with reg_weight = 0; use a positive regularizer");
        // rank-deficient row: minimum-norm least-squares solution
        Eigen::CompleteOrthogonalDecomposition<Matrix> cod(H);
        fm.C.row(i) = cod.solve(rhs.col(i)).transpose();
    }
    detail::check_constant_mode(fm, b1, b2);
    return fm;
}

///
/// Vertex i of shape 1 goes to argmin_j |Phi1[i, :k] - (Phi2[:, :k] C^T)[j]|.
/// Distances are screened with a blocked single-precision product; every
/// candidate within the worst-case rounding bound of the screened minimum is
/// re-ranked by exact double differences, so the result equals brute force
/// (lowest j on ties).
///
inline PointwiseMap fmap_to_pointwise(const SpectralBasis& b1, const SpectralBasis& b2, const Matrix& C)
{
    if (C.rows() != C.cols()) throw ArgumentError("fmap_to_pointwise: C must be square");
    const int k = static_cast<int>(C.rows());
    detail::require_dim(b1, b2, k, "fmap_to_pointwise");
    const Matrix queries = b1.phi(k);
    const Matrix targets = b2.phi(k) * C.transpose();
    const Vector target_sq = targets.rowwise().squaredNorm();
    const double target_norm_max = target_sq.size() ? std::sqrt(target_sq.maxCoeff()) : 0.0;
    const Eigen::MatrixXf queries_f = queries.cast<float>();
    const Eigen::MatrixXf targets_f = targets.cast<float>();
    const Eigen::VectorXf target_sq_f = target_sq.cast<float>();

    // |screened - exact| <= gamma (|q|^2 + 3 |q| t_max + t_max^2), covering input
    // rounding, any summation order in the product and the final update
    const double u = std::ldexp(1.0, -24);
    const double gamma = (k + 6) * u / (1.0 - (k + 6) * u);

    const Eigen::Index n1 = queries.rows(), n2 = targets.rows();
    PointwiseMap map;
    map.target.assign(static_cast<std::size_t>(n1), 0);
    constexpr Eigen::Index kBlock = 512;
    std::vector<Eigen::Index> candidates;
    Eigen::MatrixXf D;
    for (Eigen::Index start = 0; start < n1; start += kBlock) {
        const Eigen::Index rows = std::min(kBlock, n1 - start);
        D.noalias() = targets_f * queries_f.middleRows(start, rows).transpose();
        D = (-2.0f * D).colwise() + target_sq_f;
        for (Eigen::Index r = 0; r < rows; ++r) {
            const Eigen::Index i = start + r;
            const double q_norm = queries.row(i).norm();
            const double bound =
                gamma * (q_norm * q_norm + 3.0 * q_norm * target_norm_max + target_norm_max * target_norm_max) +
                1e-300;
            const auto screened = D.col(r);
            const double cut = static_cast<double>(screened.minCoeff()) + 2.0 * bound;
            candidates.clear();
            for (Eigen::Index j = 0; j < n2; ++j)
                if (static_cast<double>(screened[j]) <= cut) candidates.push_back(j);
            Eigen::Index best = candidates.front();
            double best_d = (queries.row(i) - targets.row(best)).squaredNorm();
            for (std::size_t c = 1; c < candidates.size(); ++c) {
                const double d = (queries.row(i) - targets.row(candidates[c])).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = candidates[c];
                }
            }
            map.target[static_cast<std::size_t>(i)] = static_cast<int>(best);
        }
    }
    return map;
}

/// C = Phi1[:, :k]^T M1 Phi2[T, :k], the map consistent with T at dimension k.
inline FunctionalMap pointwise_to_fmap(const SpectralBasis& b1, const SpectralBasis& b2, const PointwiseMap& T, int k)
{
    detail::require_dim(b1, b2, k, "pointwise_to_fmap");
    if (T.size() != b1.num_vertices())
        throw ArgumentError("pointwise_to_fmap: map covers " + std::to_string(T.size()) + " vertices, shape 1 has " +
                            std::to_string(b1.num_vertices()));
    Matrix pulled(T.size(), k);
    for (int i = 0; i < T.size(); ++i) {
        const int j = T(i);
        if (j < 0 || j >= b2.num_vertices()) throw ArgumentError("pointwise_to_fmap: target index out of range");
        pulled.row(i) = b2.eigenfunctions.row(j).head(k);
    }
    FunctionalMap fm;
    fm.C = b1.phi(k).transpose() * (b1.mass.asDiagonal() * pulled);
    fm.trace = {k};
    return fm;
}

///
/// ZoomOut: alternate pointwise recovery at the current dimension and
/// re-estimation at dimension + step, until k_final is reached.
///
inline FunctionalMap zoomout_refine(const SpectralBasis& b1, const SpectralBasis& b2, const FunctionalMap& initial,
                                    int step, int k_final)
{
    if (step < 1) throw ArgumentError("zoomout_refine: step must be >= 1");
    const int k0 = initial.k();
    if (k0 > k_final)
        throw ArgumentError("zoomout_refine: initial dimension " + std::to_string(k0) + " above k_final " +
                            std::to_string(k_final));
    detail::require_dim(b1, b2, k_final, "zoomout_refine");

    FunctionalMap fm;
    fm.C = initial.C;
    fm.alpha = initial.alpha;
    fm.reg_weight = initial.reg_weight;
    fm.trace = {k0};
    int k = k0;
    while (k < k_final) {
        const PointwiseMap T = fmap_to_pointwise(b1, b2, fm.C);
        k = std::min(k + step, k_final);
        fm.C = pointwise_to_fmap(b1, b2, T, k).C;
        fm.trace.push_back(k);
    }
    detail::check_constant_mode(fm, b1, b2);
    return fm;
}

} // namespace semfm
