#pragma once

#include "error.hpp"
#include "mesh.hpp"
#include "sampling.hpp"
#include "semantics.hpp"
#include "spectral.hpp"

#include <cmath>

namespace semfm {

/// Per-vertex label of the nearest cloud point (lowest point index on ties).
inline std::vector<int> vertex_cluster_assignment(const TriangleMesh& mesh, const SemanticPointCloud& pc,
                                                  std::span<const int> labels)
{
    if (pc.size() == 0) throw ArgumentError("vertex_cluster_assignment: empty point cloud");
    if (labels.size() != static_cast<std::size_t>(pc.size()))
        throw ArgumentError("vertex_cluster_assignment: label count does not match point count");
    std::vector<int> out(static_cast<std::size_t>(mesh.num_vertices()));
    for (int i = 0; i < mesh.num_vertices(); ++i) out[i] = labels[nearest_point(pc.positions, mesh.vertex(i))];
    return out;
}

enum class Side { Source = 1, Target = 2 };

/// Column i is the indicator of anchor pair i's cluster on the given side.
inline Matrix indicator_functions(std::span<const int> assignment, const AnchorSet& anchors, Side side)
{
    Matrix ind = Matrix::Zero(static_cast<Eigen::Index>(assignment.size()), anchors.size());
    for (int a = 0; a < anchors.size(); ++a) {
        const auto& pair = anchors.pairs[a];
        const int cluster = side == Side::Source ? pair.source_cluster : pair.target_cluster;
        int hits = 0;
        for (std::size_t v = 0; v < assignment.size(); ++v) {
            if (assignment[v] == cluster) {
                ind(static_cast<Eigen::Index>(v), a) = 1.0;
                ++hits;
            }
        }
        if (hits == 0)
            throw ArgumentError("indicator_functions: anchor " + std::to_string(a) + " references cluster " +
                                std::to_string(cluster) + " absent from the vertex assignment");
    }
    return ind;
}

///
/// Heat-diffuses each indicator column by time t, clamps negatives from the
/// spectral truncation at zero, then scales each column to unit l2 norm.
///
inline Matrix diffuse_descriptors(const SpectralBasis& basis, const Matrix& indicators, double t)
{
    if (!(t >= 0.0)) throw ArgumentError("diffuse_descriptors: diffusion time must be >= 0");
    for (Eigen::Index c = 0; c < indicators.cols(); ++c)
        if (indicators.col(c).cwiseAbs().maxCoeff() == 0.0)
            throw ArgumentError("diffuse_descriptors: indicator column " + std::to_string(c) + " is empty");
    Matrix F = heat_diffuse(basis, indicators, t).cwiseMax(0.0);
    for (Eigen::Index c = 0; c < F.cols(); ++c) {
        const double nrm = F.col(c).norm();
        if (!(nrm > 0.0)) throw NumericError("diffuse_descriptors: column " + std::to_string(c) + " vanished");
        F.col(c) /= nrm;
    }
    return F;
}

inline constexpr int kDefaultWksEnergies = 100;
inline constexpr double kDefaultWksSigmaScale = 7.0;

///
/// Wave kernel signature over log-spaced energies between the first and last
/// positive eigenvalue. Eigenvalues at or below 1e-8 * max are treated as zero.
/// With `normalize`, each column is divided by its surface integral.
///
inline Matrix wks_descriptors(const SpectralBasis& basis, int n_energies = kDefaultWksEnergies,
                              double sigma_scale = kDefaultWksSigmaScale, bool normalize = true)
{
    if (n_energies < 2) throw ArgumentError("wks_descriptors: need at least 2 energies");
    if (!(sigma_scale > 0.0)) throw ArgumentError("wks_descriptors: sigma_scale must be positive");
    const double cutoff = 1e-8 * basis.eigenvalues.cwiseAbs().maxCoeff();
    std::vector<int> active;
    for (int i = 0; i < basis.k(); ++i)
        if (basis.eigenvalues[i] > cutoff) active.push_back(i);
    if (active.size() < 2) throw ArgumentError("wks_descriptors: fewer than 2 positive eigenvalues");

    const double e_min = std::log(basis.eigenvalues[active.front()]);
    const double e_max = std::log(basis.eigenvalues[active.back()]);
    const double step = (e_max - e_min) / (n_energies - 1);
    const double sigma = sigma_scale * step;

    Matrix phi2(basis.num_vertices(), static_cast<Eigen::Index>(active.size()));
    Vector log_lambda(static_cast<Eigen::Index>(active.size()));
    for (std::size_t a = 0; a < active.size(); ++a) {
        phi2.col(static_cast<Eigen::Index>(a)) = basis.eigenfunctions.col(active[a]).array().square();
        log_lambda[static_cast<Eigen::Index>(a)] = std::log(basis.eigenvalues[active[a]]);
    }
    // G(i, m) = exp(-(e_m - log lambda_i)^2 / (2 sigma^2)), columns normalized to sum 1
    Matrix G(log_lambda.size(), n_energies);
    for (int m = 0; m < n_energies; ++m) {
        const double e = e_min + step * m;
        G.col(m) = (-(e - log_lambda.array()).square() / (2.0 * sigma * sigma)).exp();
        G.col(m) /= G.col(m).sum();
    }
    Matrix wks = phi2 * G;
    if (normalize) {
        const Vector integral = wks.transpose() * basis.mass;
        for (int m = 0; m < n_energies; ++m) wks.col(m) /= integral[m];
    }
    return wks;
}

} // namespace semfm
